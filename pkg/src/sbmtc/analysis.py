"""Posterior summaries and evaluation metrics: description lengths, posterior
odds, partition overlap, effective group counts, posterior-predictive
clustering, z-scores, seminal clustering, and seminal-vs-closure AUC.

All operations are pure over immutable chain snapshots.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .graphs import Partition, SimpleGraph, global_clustering
from .generators import apply_triadic_closure
from .sbm import ConstraintError, sample_microcanonical
from .sampler import ChainCollectors
from .state import DecompositionState


def description_length(source, model="sbmtc"):
    """Description length Sigma in nats.

    For a ``DecompositionState``: -ln of the current joint.  For chain
    collectors: the minimum over retained samples (the best decomposition the
    chain found), which is what model comparison uses.
    """
    if isinstance(source, DecompositionState):
        return source.sigma(model)
    if isinstance(source, ChainCollectors):
        best = min(source.best_sigma, source.map_sigma)
        if not math.isfinite(best):
            raise ValueError("chain holds no finite-probability sample")
        return best
    raise TypeError("need a DecompositionState or ChainCollectors")


def posterior_odds(sigma_tc, sigma_sbm):
    """Lambda = exp(-(Sigma_SBM/TC - Sigma_SBM)) under equal model priors."""
    try:
        return math.exp(sigma_sbm - sigma_tc)
    except OverflowError:
        return math.inf


def log_posterior_odds(sigma_tc, sigma_sbm):
    return sigma_sbm - sigma_tc


def max_overlap(b_true, b_inferred):
    """Best label-matched agreement fraction over bijections (exact, via
    maximum-weight bipartite matching on the contingency table)."""
    la = b_true.labels if isinstance(b_true, Partition) else tuple(b_true)
    lb = b_inferred.labels if isinstance(b_inferred, Partition) else tuple(b_inferred)
    if len(la) != len(lb):
        raise ValueError("partitions cover different node counts")
    ka = max(la) + 1
    kb = max(lb) + 1
    table = np.zeros((ka, kb), dtype=np.int64)
    for x, y in zip(la, lb):
        table[x, y] += 1
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(table[rows, cols].sum()) / len(la)


def effective_groups(b):
    """B_e = exp(group-size entropy)."""
    sizes = b.sizes if isinstance(b, Partition) else Partition(b).sizes
    n = sum(sizes)
    ent = -sum((s / n) * math.log(s / n) for s in sizes if s)
    return math.exp(ent)


def auc_seminal(truth, scores):
    """Probability a random seminal edge outscores a random closure edge,
    with ties counted half (rank statistic)."""
    truth = [bool(t) for t in truth]
    if len(truth) != len(scores):
        raise ValueError("labels and scores differ in length")
    pos = sum(truth)
    neg = len(truth) - pos
    if pos == 0 or neg == 0:
        raise ValueError("both classes must be present")
    order = sorted(range(len(scores)), key=lambda i: scores[i])
    ranks = [0.0] * len(scores)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for t in range(i, j + 1):
            ranks[order[t]] = avg
        i = j + 1
    rank_sum = sum(r for r, t in zip(ranks, truth) if t)
    return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg)


# ---------------------------------------------------------------------------
# posterior predictive machinery


def draw_closure_probs(sample, n, generations, rng):
    """Per-(node, generation) closure probabilities from the Beta posterior:
    Beta(x+1, y+1) with x owned triads and y open-but-unclosed triads; cells
    the sample never saw default to the uniform prior."""
    probs = rng.random((generations, n))  # Beta(1, 1) for unseen cells
    for (u, l), (e_cnt, m_cnt) in sample.cells.items():
        if l <= generations:
            probs[l - 1, u] = rng.beta(e_cnt + 1, m_cnt - e_cnt + 1)
    return probs


def predictive_graph(sample, n, generations, rng, model="sbmtc",
                     max_retries=20):
    """One posterior-predictive network draw from a retained sample."""
    b = Partition(sample.labels)
    for attempt in range(max_retries):
        try:
            mg = sample_microcanonical(list(sample.kdeg), sample.block, b, rng)
            break
        except ConstraintError:
            if attempt == max_retries - 1:
                raise
    substrate = mg.binarize()
    if model == "sbm":
        return substrate
    probs = draw_closure_probs(sample, n, generations, rng)
    g, _ = apply_triadic_closure(substrate, probs, generations, rng)
    return g


def posterior_predictive_clustering(collectors, n, rng, draws, generations=1,
                                    model="sbmtc"):
    """Clustering coefficients of ``draws`` predictive networks, cycling
    through the retained posterior samples."""
    samples = collectors.samples
    if not samples:
        raise ValueError("no retained samples to draw from")
    out = []
    for d in range(draws):
        s = samples[d % len(samples)]
        g = predictive_graph(s, n, generations, rng, model=model)
        out.append(global_clustering(g))
    return out


def predictive_zscore(samples, observed):
    """z = (C(G) - mean) / stddev of the predictive distribution."""
    arr = np.asarray(samples, dtype=float)
    if arr.size < 2:
        raise ValueError("need at least two predictive samples")
    sd = float(arr.std(ddof=1))
    if sd == 0.0:
        raise ValueError(
            "predictive distribution has zero variance (all samples %.6g)"
            % float(arr[0])
        )
    return (observed - float(arr.mean())) / sd


def seminal_clustering(collectors):
    """Posterior mean clustering of the seminal substrate A(A')."""
    samples = collectors.samples
    if not samples:
        raise ValueError("no retained samples")
    edges = collectors.edges
    n = 1 + max((max(e) for e in edges), default=0)
    total = 0.0
    for s in samples:
        mask = s.seminal
        sub = [e for t, e in enumerate(edges) if mask[t >> 3] >> (t & 7) & 1]
        total += global_clustering(SimpleGraph(n, sub))
    return total / len(samples)


# ---------------------------------------------------------------------------
# one-stop summary record


@dataclass
class PosteriorSummary:
    """Everything the CLI emits for one inference run."""

    model: str
    edges: list
    seminal_marginals: list
    sigma_min: float
    sigma_mean: float
    sigma_trace: list
    be_trace: list
    modal_labels: list
    modal_b: int
    n_samples: int
    acceptance: dict
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_collectors(cls, collectors, model, meta=None):
        if collectors.n_samples == 0:
            raise ValueError("no retained samples")
        if collectors.map_labels is not None and \
                collectors.map_sigma <= collectors.best_sigma:
            modal = Partition(collectors.map_labels)
        else:
            modal = Partition(collectors.best_sample.labels)
        return cls(
            model=model,
            edges=[list(e) for e in collectors.edges],
            seminal_marginals=collectors.seminal_marginals,
            sigma_min=min(collectors.best_sigma, collectors.map_sigma),
            sigma_mean=float(np.mean(collectors.sigma_trace)),
            sigma_trace=list(collectors.sigma_trace),
            be_trace=list(collectors.be_trace),
            modal_labels=list(modal.labels),
            modal_b=modal.b,
            n_samples=collectors.n_samples,
            acceptance={k: list(v) for k, v in collectors.acceptance.items()},
            meta=dict(meta or {}),
        )

    def closure_edge_fraction(self):
        """Posterior mean fraction of edges attributed to triadic closure."""
        pis = self.seminal_marginals
        return sum(1.0 - p for p in pis) / len(pis) if pis else 0.0
