import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbmtc.analysis import (
    auc_seminal,
    description_length,
    effective_groups,
    max_overlap,
    posterior_odds,
    posterior_predictive_clustering,
    predictive_zscore,
    seminal_clustering,
)
from sbmtc.generators import apply_triadic_closure, sample_geometric_degree_graph
from sbmtc.graphs import Partition, SimpleGraph, global_clustering
from sbmtc.sampler import ChainCollectors, ChainConfig, PosteriorSample, run_chain

from oracles import brute_max_overlap


class TestOverlap:
    def test_identical(self):
        assert max_overlap([0, 0, 1, 1], [0, 0, 1, 1]) == 1.0

    def test_label_permuted(self):
        assert max_overlap([0, 0, 1, 1], [1, 1, 0, 0]) == 1.0

    def test_example(self):
        assert max_overlap([0, 0, 1, 1], [0, 1, 1, 1]) == pytest.approx(0.75)

    def test_different_group_counts(self):
        assert max_overlap([0, 0, 0, 0], [0, 1, 2, 3]) == pytest.approx(0.25)

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(st.integers(0, 4), min_size=2, max_size=8),
        st.data(),
    )
    def test_matches_brute_force(self, a, data):
        b = data.draw(st.lists(st.integers(0, 4), min_size=len(a), max_size=len(a)))
        na = Partition(a).labels
        nb = Partition(b).labels
        assert max_overlap(na, nb) == pytest.approx(
            brute_max_overlap(na, nb), abs=1e-12
        )

    def test_symmetric(self):
        a, b = [0, 1, 1, 2, 0], [1, 1, 0, 0, 2]
        assert max_overlap(a, b) == pytest.approx(max_overlap(b, a))


class TestEffectiveGroups:
    def test_equal_groups(self):
        for nb in (1, 2, 5):
            labels = [r for r in range(nb) for _ in range(4)]
            assert effective_groups(Partition(labels)) == pytest.approx(nb)

    def test_single_group(self):
        assert effective_groups(Partition([0, 0, 0])) == pytest.approx(1.0)

    def test_sizes_3_1(self):
        expect = math.exp(-(0.75 * math.log(0.75) + 0.25 * math.log(0.25)))
        assert effective_groups(Partition([0, 0, 0, 1])) == pytest.approx(expect)
        assert expect == pytest.approx(1.7548, abs=1e-4)

    def test_bounds(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            labels = rng.integers(0, 5, size=12)
            be = effective_groups(Partition(labels))
            assert 1.0 <= be <= Partition(labels).b + 1e-12


class TestOddsAndScores:
    def test_equal_sigmas(self):
        assert posterior_odds(100.0, 100.0) == pytest.approx(1.0)

    def test_ln10_gap(self):
        assert posterior_odds(10.0 - math.log(10), 10.0) == pytest.approx(10.0)

    def test_fig2_scale_gap(self):
        # paper-scale gap 211.1 nats is representable in log form
        from sbmtc.analysis import log_posterior_odds

        assert log_posterior_odds(590.6, 801.7) == pytest.approx(211.1)
        assert posterior_odds(590.6, 801.7) == pytest.approx(math.exp(211.1))

    def test_zscore(self):
        samples = [0.1, 0.2, 0.3, 0.2, 0.2]
        mean = np.mean(samples)
        sd = np.std(samples, ddof=1)
        assert predictive_zscore(samples, mean) == pytest.approx(0.0)
        assert predictive_zscore(samples, mean + 2 * sd) == pytest.approx(2.0)

    def test_zero_variance_error(self):
        with pytest.raises(ValueError):
            predictive_zscore([0.5, 0.5, 0.5], 0.5)


class TestAUC:
    def test_perfect_separation(self):
        assert auc_seminal([1, 1, 0, 0], [0.9, 0.8, 0.2, 0.1]) == 1.0

    def test_identical_scores(self):
        assert auc_seminal([1, 0, 1, 0], [0.5] * 4) == 0.5

    def test_single_class_error(self):
        with pytest.raises(ValueError):
            auc_seminal([1, 1], [0.5, 0.6])

    def test_hand_value(self):
        # pairs: (0.9>0.5), (0.9>0.7), (0.3<0.5), (0.3<0.7) -> 2/4
        assert auc_seminal([1, 0, 1, 0], [0.9, 0.5, 0.3, 0.7]) == 0.5


class TestPredictive:
    def test_beta_moment_identity(self):
        rng = np.random.default_rng(1)
        x, y = 2, 3
        draws = rng.beta(x + 1, y + 1, size=100000)
        expect = (x + 1) / (x + y + 2)
        assert abs(draws.mean() - expect) / expect <= 0.01

    def _chain(self, g, sweeps=800, l_max=2, seed=3):
        cfg = ChainConfig(sweeps=sweeps, burn_in=sweeps // 4, thin=4,
                          l_max=l_max, seed=seed)
        return run_chain(g, cfg)

    def test_tree_predictive_concentrates_near_zero(self):
        # a star has wedges but a tree-wide chain puts p near zero; the
        # predictive clustering hugs 0
        tree = SimpleGraph(7, [(0, i) for i in range(1, 7)])
        col = self._chain(tree)
        rng = np.random.default_rng(5)
        cs = posterior_predictive_clustering(col, 7, rng, 60, generations=2)
        assert np.mean(cs) <= 0.25

    def test_replay_with_zero_p_reproduces_substrate(self, paw):
        col = self._chain(paw, sweeps=400)
        sample = col.samples[-1]
        from sbmtc.graphs import Partition
        from sbmtc.sbm import sample_microcanonical

        rng = np.random.default_rng(7)
        mg = sample_microcanonical(
            list(sample.kdeg), sample.block, Partition(sample.labels), rng
        )
        sub = mg.binarize()
        g, _ = apply_triadic_closure(sub, 0.0, 3, rng)
        assert g == sub
        assert global_clustering(g) == global_clustering(sub)

    def test_seminal_clustering_pinned_chain(self, triangle):
        # a collector whose samples are all-seminal reproduces C(G) exactly
        col = ChainCollectors(triangle.edges)
        mask = bytes([0b111])
        col.samples = [PosteriorSample((0, 0, 0), 1.0, (2, 2, 2),
                                       [[6]], {}, mask)]
        col.n_samples = 1
        assert seminal_clustering(col) == global_clustering(triangle)

    def test_cs_bounded_by_max_sample_clustering(self):
        rng = np.random.default_rng(11)
        sub = sample_geometric_degree_graph(40, 2.0, rng)
        g, _ = apply_triadic_closure(sub, 0.8, 1, rng)
        col = self._chain(g, sweeps=600, l_max=1)
        cs = seminal_clustering(col)
        per_sample = []
        for s in col.samples:
            edges = [e for t, e in enumerate(col.edges)
                     if s.seminal[t >> 3] >> (t & 7) & 1]
            per_sample.append(global_clustering(SimpleGraph(g.n, edges)))
        assert cs <= max(per_sample) + 1e-12


class TestDescriptionLength:
    def test_state_and_chain(self, paw):
        from sbmtc.state import DecompositionState

        st = DecompositionState(paw, l_max=2)
        assert description_length(st) == pytest.approx(st.sigma("sbmtc"))
        cfg = ChainConfig(sweeps=300, burn_in=50, thin=2, seed=1, polish=50)
        col = run_chain(paw, cfg)
        assert description_length(col) == min(col.best_sigma, col.map_sigma)
        with pytest.raises(TypeError):
            description_length(42)
