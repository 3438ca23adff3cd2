"""Forward samplers: planted partitions, geometric-degree substrates, and the
iterated triadic-closure process.

All generators are pure functions of (spec, rng) and emit provenance suitable
as ground truth for inference tests: per-edge creation generation and the ego
that first closed it.
"""

import math

import numpy as np

from .graphs import Partition, SimpleGraph
from .sbm import ConstraintError, PPSpec, pp_block_matrix, sample_microcanonical


def sample_pp_graph(spec, rng):
    """A planted-partition draw: equal groups, block counts from the spec's
    mixing parameter, microcanonical stub matching, multi-edges collapsed.

    Returns (SimpleGraph, Partition ground truth).
    """
    e = pp_block_matrix(spec)
    size = spec.n // spec.b
    labels = [r for r in range(spec.b) for _ in range(size)]
    b = Partition(labels)
    er = [sum(row) for row in e]
    k = [0] * spec.n
    for r in range(spec.b):
        alloc = rng.multinomial(er[r], [1.0 / size] * size)
        for off, cnt in enumerate(alloc):
            k[r * size + off] = int(cnt)
    mg = sample_microcanonical(k, e, b, rng)
    return mg.binarize(), b


def sample_geometric_degree_graph(n, mean_degree, rng, exact_edges=None,
                                  max_tries=100000):
    """A configuration-model graph with geometric degrees.

    Degrees follow a geometric law on {0, 1, 2, ...} with success probability
    1/(mean_degree+1), so the mean is ``mean_degree``.  The degree sum is
    corrected to even, stubs are paired uniformly, and self-loops plus
    multi-edge duplicates are erased.  With ``exact_edges`` set, degree
    sequences are resampled until the (pre-erasure) edge count matches
    exactly.
    """
    if mean_degree < 0:
        raise ValueError("mean degree must be non-negative")
    if mean_degree == 0:
        return SimpleGraph(n, [])
    p = 1.0 / (mean_degree + 1.0)
    for _ in range(max_tries):
        deg = rng.geometric(p, size=n) - 1
        total = int(deg.sum())
        if exact_edges is not None:
            if total != 2 * exact_edges:
                continue
        elif total % 2:
            deg[int(rng.integers(n))] += 1
            total += 1
        stubs = np.repeat(np.arange(n), deg)
        rng.shuffle(stubs)
        edges = set()
        for t in range(0, total, 2):
            i, j = int(stubs[t]), int(stubs[t + 1])
            if i != j:
                edges.add((i, j) if i < j else (j, i))
        return SimpleGraph(n, edges)
    raise ConstraintError("could not hit the requested edge count")


def _node_probs(p, n, generations):
    """Normalize p into a (generations+1) x n lookup, 1-indexed by layer."""
    arr = np.asarray(p, dtype=float)
    if arr.ndim == 0:
        out = np.full((generations + 1, n), float(arr))
    elif arr.ndim == 1:
        if arr.shape[0] != n:
            raise ValueError("per-node probabilities must have length n")
        out = np.tile(arr, (generations + 1, 1))
    else:
        if arr.shape != (generations, n):
            raise ValueError("per-generation probabilities must be (L, n)")
        out = np.vstack([np.zeros((1, n)), arr])
    if out.min() < 0 or out.max() > 1:
        raise ValueError("closure probabilities must lie in [0, 1]")
    return out


def apply_triadic_closure(a, p, generations, rng):
    """Run ``generations`` rounds of triadic closure on substrate ``a``.

    Per generation, every open triad (i, u, j) whose supporting edges exist in
    the generation-start snapshot with at least one created exactly in the
    previous generation closes independently with probability p_u; egos are
    visited in random order but all triads are judged against the snapshot.
    ``p`` may be a scalar, a per-node vector, or a (generations, n) matrix.

    Returns (graph, provenance) where provenance maps each edge to
    ``(generation, ego)``; substrate edges carry ``(0, None)``.
    """
    n = a.n
    probs = _node_probs(p, n, generations)
    created = {e: 0 for e in a.edges}  # edge -> creation generation
    adj = [set(a.adj[u]) for u in range(n)]
    prov = {e: (0, None) for e in a.edges}
    for l in range(1, generations + 1):
        snapshot_created = dict(created)
        snap_adj = [frozenset(s) for s in adj]
        new_edges = {}
        order = rng.permutation(n)
        for u in order:
            u = int(u)
            pu = probs[l][u]
            if pu == 0.0:
                continue
            nbrs = sorted(snap_adj[u])
            for x in range(len(nbrs)):
                i = nbrs[x]
                ci = snapshot_created[(u, i) if u < i else (i, u)]
                for y in range(x + 1, len(nbrs)):
                    j = nbrs[y]
                    cj = snapshot_created[(u, j) if u < j else (j, u)]
                    if max(ci, cj) != l - 1:
                        continue
                    pair = (i, j)
                    if j in snap_adj[i]:
                        continue
                    if rng.random() < pu:
                        if pair not in new_edges:
                            new_edges[pair] = u
        for (i, j), ego in new_edges.items():
            created[(i, j)] = l
            adj[i].add(j)
            adj[j].add(i)
            prov[(i, j)] = (l, ego)
    g = SimpleGraph(n, created.keys())
    return g, prov


def provenance_jsonable(g, prov):
    """Provenance sidecar document for a generated graph."""
    return {
        "schema": "provenance/v1",
        "nodes": g.n,
        "edges": [
            {
                "i": i,
                "j": j,
                "generation": prov[(i, j)][0],
                "ego": prov[(i, j)][1],
                "seminal": prov[(i, j)][0] == 0,
            }
            for (i, j) in g.edges
        ],
    }
