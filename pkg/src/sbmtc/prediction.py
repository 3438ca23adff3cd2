"""Measurement model and reconstruction posterior for edge prediction.

The holdout protocol hides a fraction f of edges plus an equal number of
non-edges (no data on either: n = x = 0), keeps every other pair perfectly
certain, and infers the hidden pairs from the joint posterior of the network
and the model parameters.  Certainty is a hard constraint, not a large count,
so the measurement likelihood runs over finite-count pairs only.
"""

import math
from dataclasses import dataclass, field

from .graphs import SimpleGraph
from .sampler import ChainCollectors, make_streams, mcmc_sweep, merge_collectors
from .state import DecompositionState
from .tables import log_binom
from . import tables


@dataclass
class MeasurementData:
    """Per-pair observation counts.

    ``certain_edges``/``certain_nonedges`` are hard constraints (the paper's
    n -> infinity limit); ``counts`` holds finite (n_ij, x_ij) for noisy
    pairs; ``uncertain`` lists pairs the posterior must decide (n = x = 0
    unless they appear in ``counts``).
    """

    n_nodes: int
    certain_edges: list
    uncertain: list
    counts: dict = field(default_factory=dict)

    def __post_init__(self):
        self.certain_edges = [tuple(sorted(e)) for e in self.certain_edges]
        self.uncertain = [tuple(sorted(p)) for p in self.uncertain]
        self.counts = {tuple(sorted(k)): (int(n), int(x))
                       for k, (n, x) in self.counts.items()}
        for (n, x) in self.counts.values():
            if not 0 <= x <= n:
                raise ValueError("need 0 <= x_ij <= n_ij")
        overlap = set(self.certain_edges) & set(self.uncertain)
        if overlap:
            raise ValueError("pairs both certain and uncertain: %r" % overlap)

    @property
    def total_n(self):
        return sum(n for n, _ in self.counts.values())

    @property
    def total_x(self):
        return sum(x for _, x in self.counts.values())


@dataclass
class HoldoutSpec:
    """A held-out evaluation set: |P_t| = |N_t| = ceil(f E)."""

    f: float
    seed: int
    positives: list
    negatives: list

    def __post_init__(self):
        self.positives = [tuple(sorted(e)) for e in self.positives]
        self.negatives = [tuple(sorted(e)) for e in self.negatives]
        if set(self.positives) & set(self.negatives):
            raise ValueError("holdout sets overlap")


def make_holdout(g, f, rng, seed=0):
    """Hide ceil(f E) random edges and as many random non-edges of ``g``."""
    ne = g.num_edges
    size = math.ceil(f * ne)
    if size < 1:
        raise ValueError("holdout fraction too small: no pairs hidden")
    if size > ne:
        raise ValueError("cannot hide more edges than exist")
    max_nonedges = g.n * (g.n - 1) // 2 - ne
    if size > max_nonedges:
        raise ValueError("not enough non-edges for the holdout")
    pos_idx = rng.choice(ne, size=size, replace=False)
    positives = [g.edges[int(t)] for t in sorted(pos_idx)]
    negatives = []
    seen = set()
    while len(negatives) < size:
        i = int(rng.integers(g.n))
        j = int(rng.integers(g.n))
        if i == j:
            continue
        pair = (i, j) if i < j else (j, i)
        if pair in seen or g.has_edge(*pair):
            continue
        seen.add(pair)
        negatives.append(pair)
    spec = HoldoutSpec(f=f, seed=seed, positives=positives, negatives=negatives)
    hidden = set(positives)
    certain = [e for e in g.edges if e not in hidden]
    data = MeasurementData(
        n_nodes=g.n,
        certain_edges=certain,
        uncertain=positives + negatives,
    )
    return data, spec


def measurement_log_likelihood(data, g_candidate):
    """ln P(x | G, n) for a candidate graph; -inf when the candidate
    contradicts a certain pair."""
    cert = set(data.certain_edges)
    unc = set(data.uncertain)
    cand = set(g_candidate.edges)
    if not cert <= cand:
        return float("-inf")
    if cand - cert - unc:
        return float("-inf")
    mm = data.total_n
    xx = data.total_x
    ee = tt = 0
    for pair, (n_ij, x_ij) in data.counts.items():
        if pair in cand:
            ee += n_ij
            tt += x_ij
    val = -log_binom(ee, tt) - math.log(ee + 1)
    val += -log_binom(mm - ee, xx - tt) - math.log(mm - ee + 1)
    return val


def run_reconstruction_chain(data, config, prior="sbmtc", chains=1):
    """Sample the joint reconstruction posterior and return
    (pair -> posterior edge probability, merged collectors).

    ``prior`` picks the network model: the full decomposition ("sbmtc") or
    the pure latent-multigraph SBM ("sbm").  Toggled-on pairs enter as
    seminal multiplicity 1; owner swaps may then relocate them into closure
    layers.
    """
    if prior not in ("sbmtc", "sbm"):
        raise ValueError("prior must be 'sbm' or 'sbmtc'")
    base = SimpleGraph(data.n_nodes, data.certain_edges)
    tables.prepare_partition_table(
        int(2 * (len(data.certain_edges) + len(data.uncertain)) * 1.4) + 64,
        base.n,
    )
    parts = []
    for chain_idx in range(chains):
        state = DecompositionState(
            base,
            l_max=config.l_max,
            closure=(prior == "sbmtc"),
            extra_pairs=data.uncertain,
            measurement=data,
        )
        collectors = ChainCollectors(base.edges, uncertain=data.uncertain)
        rngs = make_streams(config.seed + chain_idx)
        for sweep in range(config.sweeps):
            mcmc_sweep(state, config, rngs, collectors.acceptance,
                       sbm_only=(prior == "sbm"))
            if sweep >= config.burn_in and \
                    (sweep - config.burn_in + 1) % config.thin == 0:
                _collect_reconstruction(state, collectors)
        parts.append(collectors)
    merged = merge_collectors(parts)
    marginals = dict(zip(merged.uncertain, merged.edge_on_marginals))
    return marginals, merged


def _collect_reconstruction(state, collectors):
    collectors.n_samples += 1
    a = state.a
    slot_index = state.slot_index
    for t, e in enumerate(collectors.edges):
        if a[slot_index[e]] > 0:
            collectors.seminal_counts[t] += 1
    for t, p in enumerate(collectors.uncertain):
        if state.present[slot_index[p]]:
            collectors.on_counts[t] += 1
    sigma = state.sigma("sbmtc" if state.closure_enabled else "sbm")
    collectors.sigma_trace.append(sigma)
    if sigma < collectors.best_sigma:
        collectors.best_sigma = sigma
        collectors.best_sample = None


def precision_recall(marginals, spec):
    """Holdout scores from posterior edge probabilities.

    precision = sum_{P_t} p / sum_{P_t u N_t} p;  recall = sum_{P_t} p / |P_t|.
    """
    pos = [marginals[e] for e in spec.positives]
    neg = [marginals[e] for e in spec.negatives]
    denom = sum(pos) + sum(neg)
    if denom == 0:
        raise ValueError("all posterior edge probabilities vanish")
    if not spec.positives:
        raise ValueError("empty holdout")
    return sum(pos) / denom, sum(pos) / len(spec.positives)
