"""Exact DC-SBM marginal likelihood, partition prior, planted partitions, and
microcanonical sampling.

All likelihoods are in nats over the *latent multigraph* substrate: the
marginal of a multigraph A' given a partition b is the product of the
microcanonical pairing term, the degree prior with restricted-partition counts
q(e_r, n_r), and the binomial prior on block edge counts.  Block edge counts
use the doubled-diagonal convention (e_rr counts twice the internal edges).
"""

import math
from dataclasses import dataclass

from .graphs import GraphError, MultiGraph, Partition
from .tables import (
    log_binom,
    log_double_factorial_even,
    log_factorial,
    log_restricted_partitions,
)


class ConstraintError(ValueError):
    """Microcanonical constraints (degrees vs block counts) are infeasible."""


# ---------------------------------------------------------------------------
# marginal likelihood


def _pairing_term(a, b):
    """ln P(A' | k, e, b): the microcanonical stub-pairing probability."""
    ers = b.block_edge_counts(a)
    val = 0.0
    for (r, s), cnt in ers.items():
        if r == s:
            val += log_double_factorial_even(cnt)
        else:
            val += log_factorial(cnt)
    for k in a.degrees():
        val += log_factorial(k)
    for w in a.mult.values():
        val -= log_factorial(w)
    er = [0] * b.b
    for (r, s), cnt in ers.items():
        er[r] += cnt
        if r != s:
            er[s] += cnt
    for e_r in er:
        val -= log_factorial(e_r)
    return val


def _degree_term(a, b):
    """ln P(k | e, b): uniform over degree multisets via q(e_r, n_r)."""
    ers = b.block_edge_counts(a)
    er = [0] * b.b
    for (r, s), cnt in ers.items():
        er[r] += cnt
        if r != s:
            er[s] += cnt
    val = 0.0
    hists = b.degree_histograms(a)
    for r in range(b.b):
        for cnt in hists[r].values():
            val += log_factorial(cnt)
        val -= log_factorial(b.sizes[r])
        val -= log_restricted_partitions(er[r], b.sizes[r])
    return val


def _edge_count_term(a, b):
    """ln P(e | b): uniform over block-count matrices with total E."""
    e = a.total_edges
    nb = b.b
    return -log_binom(nb * (nb + 1) // 2 + e - 1, e)


def microcanonical_decompose(a, b):
    """The three log-terms (ln P(A'|k,e,b), ln P(k|e,b), ln P(e|b)).

    Their sum equals ``dcsbm_log_marginal(a, b)``.
    """
    if a.n != b.n:
        raise GraphError("partition/graph size mismatch")
    return _pairing_term(a, b), _degree_term(a, b), _edge_count_term(a, b)


def dcsbm_log_marginal(a, b):
    """ln P(A' | b) for multigraph ``a`` under partition ``b``."""
    if a.n != b.n:
        raise GraphError("partition/graph size mismatch")
    ers = b.block_edge_counts(a)
    er = [0] * b.b
    val = 0.0
    for (r, s), cnt in ers.items():
        er[r] += cnt
        if r != s:
            er[s] += cnt
            val += log_factorial(cnt)
        else:
            val += log_double_factorial_even(cnt)
    for k in a.degrees():
        val += log_factorial(k)
    for w in a.mult.values():
        val -= log_factorial(w)
    hists = b.degree_histograms(a)
    for r in range(b.b):
        val -= log_factorial(er[r])
        for cnt in hists[r].values():
            val += log_factorial(cnt)
        val -= log_factorial(b.sizes[r])
        val -= log_restricted_partitions(er[r], b.sizes[r])
    e = a.total_edges
    nb = b.b
    val -= log_binom(nb * (nb + 1) // 2 + e - 1, e)
    return val


def partition_log_prior(b):
    """ln P(b) for a labeled partition: uniform over B in [1, N], over size
    compositions, and over labelings given sizes."""
    n = b.n
    val = -log_factorial(n) - log_binom(n - 1, b.b - 1) - math.log(n)
    for s in b.sizes:
        val += log_factorial(s)
    return val


def partition_structure_log_weight(b):
    """ln of the set-partition posterior weight: B! labelings share P(b)."""
    return partition_log_prior(b) + log_factorial(b.b)


# ---------------------------------------------------------------------------
# planted partition model


@dataclass(frozen=True)
class PPSpec:
    """Planted partition: B equal groups, assortativity c, mean degree <k>."""

    b: int
    n: int
    c: float
    mean_degree: float

    def __post_init__(self):
        if self.b < 1 or self.n < 1:
            raise ConstraintError("need B >= 1 and N >= 1")
        if self.n % self.b:
            raise ConstraintError("N must be divisible by B")
        if not 0.0 <= self.c <= 1.0:
            raise ConstraintError("assortativity c must lie in [0, 1]")
        if self.mean_degree < 0:
            raise ConstraintError("mean degree must be non-negative")

    @property
    def e(self):
        return round(self.n * self.mean_degree / 2)

    def detectability_thresholds(self):
        """(c*_-, c*_+): outside this band the planted partition is
        detectable in the large-N limit."""
        spread = (self.b - 1) / (self.b * math.sqrt(self.mean_degree))
        return 1.0 / self.b - spread, 1.0 / self.b + spread


def pp_block_matrix(spec):
    """Integer block edge-count matrix (doubled diagonal) for a PPSpec.

    Cell targets follow the planted-partition mixing: a fraction c of the edge
    mass on the diagonal, the rest spread evenly off-diagonal.  Rounded by
    largest remainder in edge units (diagonal cells count internal edges), so
    the total is exactly E, the matrix is symmetric, and diagonals are even.
    """
    nb, e, c = spec.b, spec.e, spec.c
    cells = []  # (target_edges, r, s) on the upper triangle
    for r in range(nb):
        cells.append((e * c / nb, r, r))
    if nb > 1:
        off = 2 * e * (1.0 - c) / (nb * (nb - 1))  # doubled-convention cell
        for r in range(nb):
            for s in range(r + 1, nb):
                cells.append((off, r, s))
    floors = [math.floor(t) for t, _, _ in cells]
    rem = e - sum(floors)
    if rem < 0:
        raise ConstraintError("infeasible planted-partition spec")
    order = sorted(
        range(len(cells)), key=lambda idx: (floors[idx] - cells[idx][0], idx)
    )
    for idx in order[:rem]:
        floors[idx] += 1
    mat = [[0] * nb for _ in range(nb)]
    for (t, r, s), cnt in zip(cells, floors):
        if r == s:
            mat[r][r] = 2 * cnt
        else:
            mat[r][s] = mat[s][r] = cnt
    return mat


# ---------------------------------------------------------------------------
# microcanonical sampling


def sample_microcanonical(k, e, b, rng, max_retries=200):
    """A uniformly random stub matching with degrees ``k`` and block counts
    ``e`` (doubled diagonal), returned as a MultiGraph without self-loops.

    Raises ConstraintError when (k, e, b) are inconsistent or a loop-free
    diagonal pairing cannot be realized.
    """
    nb = b.b
    lab = b.labels
    er = [sum(e[r][s] for s in range(nb)) for r in range(nb)]
    ksum = [0] * nb
    for i, deg in enumerate(k):
        if deg < 0:
            raise ConstraintError("negative degree")
        ksum[lab[i]] += deg
    for r in range(nb):
        if ksum[r] != er[r]:
            raise ConstraintError(
                "group %d: degree sum %d != e_r %d" % (r, ksum[r], er[r])
            )
        if e[r][r] % 2:
            raise ConstraintError("odd diagonal count e_%d%d" % (r, r))
        for s in range(nb):
            if e[r][s] != e[s][r] or e[r][s] < 0:
                raise ConstraintError("block matrix not symmetric/non-negative")

    # per-group stub lists, shuffled once: slicing a shuffled list into the
    # per-pair buckets is a uniform allocation of stubs to block pairs
    stubs = [[] for _ in range(nb)]
    for i, deg in enumerate(k):
        stubs[lab[i]].extend([i] * deg)
    for r in range(nb):
        perm = rng.permutation(len(stubs[r]))
        stubs[r] = [stubs[r][t] for t in perm]

    out = MultiGraph(b.n)
    offset = [0] * nb
    for r in range(nb):
        for s in range(r, nb):
            cnt = e[r][s]
            if cnt == 0:
                continue
            if r == s:
                bucket = stubs[r][offset[r]: offset[r] + cnt]
                offset[r] += cnt
                _pair_within(bucket, out, rng, max_retries)
            else:
                left = stubs[r][offset[r]: offset[r] + cnt]
                right = stubs[s][offset[s]: offset[s] + cnt]
                offset[r] += cnt
                offset[s] += cnt
                for x, y in zip(left, right):
                    out.add(x, y)
    return out


def _pair_within(bucket, out, rng, max_retries):
    """Pair an even-length stub bucket into edges without self-loops.

    Uniform over loop-free pairings while whole-shuffle rejection succeeds;
    when a dominant node makes rejection hopeless (its stubs approach half
    the bucket) the last shuffle is repaired by random pair swaps, which
    keeps the marginal structure but is no longer exactly uniform in that
    corner.
    """
    cnt = len(bucket)
    if cnt % 2:
        raise ConstraintError("odd stub bucket")
    most = max(bucket.count(v) for v in set(bucket)) if bucket else 0
    if most > cnt // 2:
        raise ConstraintError("self-loop unavoidable in diagonal pairing")
    work = list(bucket)
    pairs = None
    for _ in range(max_retries):
        perm = rng.permutation(cnt)
        pairs = [[work[perm[t]], work[perm[t + 1]]] for t in range(0, cnt, 2)]
        if all(x != y for x, y in pairs):
            for x, y in pairs:
                out.add(x, y)
            return
    for _ in range(100 * cnt):
        loops = [idx for idx, (x, y) in enumerate(pairs) if x == y]
        if not loops:
            for x, y in pairs:
                out.add(x, y)
            return
        idx = loops[int(rng.integers(len(loops)))]
        other = int(rng.integers(len(pairs)))
        if other == idx:
            continue
        side = int(rng.integers(2))
        if pairs[other][side] != pairs[idx][0] and \
                pairs[other][1 - side] != pairs[idx][1]:
            pairs[idx][0], pairs[other][side] = pairs[other][side], pairs[idx][0]
    raise ConstraintError("diagonal pairing kept producing self-loops")
