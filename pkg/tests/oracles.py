"""Independent brute-force oracles used by the test suite.

Everything here is written straight from the model definitions with exact
rational arithmetic and no reuse of the package's likelihood or cache code:
these are the reference answers the implementation is checked against.
"""

import itertools
import math
from fractions import Fraction
from functools import lru_cache


def factorial(n):
    return math.factorial(n)


def binom(n, k):
    if k < 0 or k > n:
        return 0
    return math.comb(n, k)


def double_factorial_even(m):
    assert m % 2 == 0
    out = 1
    for v in range(m, 0, -2):
        out *= v
    return out


@lru_cache(maxsize=None)
def brute_q(m, n):
    """Restricted partitions of m into at most n parts, by direct recursion
    over the largest part."""
    if m == 0:
        return 1
    if n == 0 or m < 0:
        return 0

    def count(m, n, maxpart):
        if m == 0:
            return 1
        if n == 0:
            return 0
        return sum(count(m - p, n - 1, p) for p in range(1, min(m, maxpart) + 1))

    return count(m, n, m)


def set_partitions(items):
    """All set partitions of a list, as lists of blocks."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for idx in range(len(part)):
            yield part[:idx] + [part[idx] + [first]] + part[idx + 1:]
        yield [[first]] + part


def labeled_partition_prior(n, sizes):
    """P(b) for a labeled partition with the given block sizes (Fraction)."""
    b = len(sizes)
    val = Fraction(1)
    for s in sizes:
        val *= factorial(s)
    val /= factorial(n)
    val /= binom(n - 1, b - 1)
    val /= n
    return val


def dcsbm_probability(n, mult, labels):
    """P(A'|b) for a multigraph given labeled partition, exact Fraction.

    ``mult`` maps sorted node pairs to positive multiplicities.
    """
    b = max(labels) + 1
    ers = {}
    deg = [0] * n
    for (i, j), w in mult.items():
        r, s = labels[i], labels[j]
        if r > s:
            r, s = s, r
        ers[(r, s)] = ers.get((r, s), 0) + (2 * w if r == s else w)
        deg[i] += w
        deg[j] += w
    er = [0] * b
    for (r, s), cnt in ers.items():
        er[r] += cnt
        if r != s:
            er[s] += cnt
    num = Fraction(1)
    for (r, s), cnt in ers.items():
        num *= double_factorial_even(cnt) if r == s else factorial(cnt)
    for k in deg:
        num *= factorial(k)
    den = Fraction(1)
    for w in mult.values():
        den *= factorial(w)
    for r in range(b):
        den *= factorial(er[r])
    val = num / den
    sizes = [0] * b
    for x in labels:
        sizes[x] += 1
    for r in range(b):
        eta = {}
        for i in range(n):
            if labels[i] == r:
                eta[deg[i]] = eta.get(deg[i], 0) + 1
        for cnt in eta.values():
            val *= factorial(cnt)
        val /= factorial(sizes[r]) * brute_q(er[r], sizes[r])
    e_tot = sum(mult.values())
    val /= binom(b * (b + 1) // 2 + e_tot - 1, e_tot)
    return val


def closure_probability_l1(n, substrate_edges, owners_by_edge, graph_edges):
    """P(g|A) for one generation under the generalized (Heaviside) marginal.

    ``substrate_edges``: set of sorted pairs present in the binarized
    substrate A.  ``owners_by_edge``: dict edge -> frozenset of ego nodes
    owning it at generation 1.  ``graph_edges`` is the full edge set of G
    (pairs absent from the substrate but present in G are still non-edges of
    A, hence open).  Exact Fraction; 0 for invalid assignments.
    """
    adj = {v: set() for v in range(n)}
    for i, j in substrate_edges:
        adj[i].add(j)
        adj[j].add(i)
    m_u = {u: 0 for u in range(n)}
    open_pairs = {}
    for u in range(n):
        nb = sorted(adj[u])
        for x in range(len(nb)):
            for y in range(x + 1, len(nb)):
                i, j = nb[x], nb[y]
                if (i, j) not in substrate_edges:
                    m_u[u] += 1
                    open_pairs.setdefault((i, j), set()).add(u)
    e_u = {u: 0 for u in range(n)}
    for edge, owns in owners_by_edge.items():
        for u in owns:
            if u not in open_pairs.get(edge, ()):  # g edge without open triad
                return Fraction(0)
            e_u[u] += 1
    val = Fraction(1)
    for u in range(n):
        if e_u[u] > 0:
            val /= binom(m_u[u], e_u[u]) * m_u[u]
    n_m = sum(1 for u in range(n) if m_u[u] > 0)
    n_g = sum(1 for u in range(n) if e_u[u] > 0)
    if n_g > n_m:
        return Fraction(0)
    val /= binom(n_m, n_g)
    val /= 1 + n_m
    return val


def enumerate_posterior_l1(g, mult_cap=5):
    """Exact L=1 posterior over (A' <= cap, g, b) for a small SimpleGraph.

    Returns (pi, total): pi maps each edge of G to its exact seminal
    marginal Fraction; set-partition states are weighted by B! P(b) to match
    the labeled posterior.
    """
    edges = list(g.edges)
    n = g.n
    ne = len(edges)
    # precompute partition weights once per support pattern is wasteful;
    # P(A'|b) depends on multiplicities, so cache per (mults, labels) calls
    partitions = []
    for blocks in set_partitions(range(n)):
        labels = [0] * n
        for gid, block in enumerate(blocks):
            for v in block:
                labels[v] = gid
        sizes = [len(b) for b in blocks]
        weight = factorial(len(blocks)) * labeled_partition_prior(n, sizes)
        partitions.append((labels, weight))

    pi_num = {e: Fraction(0) for e in edges}
    total = Fraction(0)
    for pattern in itertools.product((0, 1), repeat=ne):
        substrate = {e for e, s in zip(edges, pattern) if s}
        uncovered = [e for e, s in zip(edges, pattern) if not s]
        # candidate egos per uncovered edge
        adj = {v: set() for v in range(n)}
        for i, j in substrate:
            adj[i].add(j)
            adj[j].add(i)
        cands = []
        feasible = True
        for (i, j) in uncovered:
            cu = frozenset(adj[i] & adj[j])
            if not cu:
                feasible = False
                break
            cands.append(((i, j), cu))
        if not feasible:
            continue
        closure_sum = Fraction(0)
        owner_choices = []
        for (edge, cu) in cands:
            subsets = []
            members = sorted(cu)
            for mask in range(1, 1 << len(members)):
                subsets.append(
                    frozenset(members[t] for t in range(len(members)) if mask >> t & 1)
                )
            owner_choices.append((edge, subsets))
        for combo in itertools.product(*[s for (_, s) in owner_choices]) if owner_choices else [()]:
            owners = {edge: owns for (edge, _), owns in zip(owner_choices, combo)}
            closure_sum += closure_probability_l1(n, substrate, owners, set(edges))
        if closure_sum == 0:
            continue
        sbm_sum = Fraction(0)
        present = sorted(substrate)
        for mults in itertools.product(range(1, mult_cap + 1), repeat=len(present)):
            mdict = dict(zip(present, mults))
            for labels, weight in partitions:
                sbm_sum += weight * dcsbm_probability(n, mdict, labels)
        mass = sbm_sum * closure_sum
        total += mass
        for e in substrate:
            pi_num[e] += mass
    return {e: pi_num[e] / total for e in edges}, total


def sbm_partition_posterior(g, mult_cap=5):
    """Exact pure-SBM posterior over set partitions for a small graph,
    marginalized over latent multiplicities (each edge 1..cap).

    Returns dict: canonical-blocks tuple -> Fraction probability.
    """
    edges = list(g.edges)
    n = g.n
    out = {}
    total = Fraction(0)
    for blocks in set_partitions(range(n)):
        labels = [0] * n
        for gid, block in enumerate(blocks):
            for v in block:
                labels[v] = gid
        sizes = [len(b) for b in blocks]
        weight = factorial(len(blocks)) * labeled_partition_prior(n, sizes)
        mass = Fraction(0)
        for mults in itertools.product(range(1, mult_cap + 1), repeat=len(edges)):
            mdict = dict(zip(edges, mults))
            mass += weight * dcsbm_probability(n, mdict, labels)
        key = tuple(sorted(tuple(sorted(b)) for b in blocks))
        out[key] = out.get(key, Fraction(0)) + mass
        total += mass
    return {k: v / total for k, v in out.items()}


def brute_global_clustering(g):
    """Transitivity by explicit ordered-triple enumeration."""
    n = g.n
    tri = 0
    for i in range(n):
        for j in range(n):
            for k in range(n):
                if len({i, j, k}) < 3:
                    continue
                if g.has_edge(i, j) and g.has_edge(j, k) and g.has_edge(k, i):
                    tri += 1
    wedges = sum(g.degree(i) * (g.degree(i) - 1) for i in range(n))
    if wedges == 0:
        return 0.0
    return tri / wedges


def brute_max_overlap(labels_a, labels_b):
    """Maximum label-matched agreement over all bijections, brute force."""
    n = len(labels_a)
    ga = sorted(set(labels_a))
    gb = sorted(set(labels_b))
    big, small = (ga, gb) if len(ga) >= len(gb) else (gb, ga)
    swap = len(ga) < len(gb)
    best = 0
    for perm in itertools.permutations(big, len(small)):
        mapping = dict(zip(small, perm))
        agree = 0
        for x, y in zip(labels_a, labels_b):
            if swap:
                if mapping.get(x) == y:
                    agree += 1
            else:
                if mapping.get(y) == x:
                    agree += 1
        best = max(best, agree)
    return best / n
