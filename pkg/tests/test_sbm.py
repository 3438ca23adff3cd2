import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from sbmtc.graphs import MultiGraph, Partition, SimpleGraph
from sbmtc.sbm import (
    ConstraintError,
    PPSpec,
    dcsbm_log_marginal,
    microcanonical_decompose,
    partition_log_prior,
    pp_block_matrix,
    sample_microcanonical,
)

from oracles import dcsbm_probability, labeled_partition_prior


class TestMarginal:
    def test_two_nodes_one_edge(self):
        a = MultiGraph(2, {(0, 1): 1})
        v = dcsbm_log_marginal(a, Partition([0, 0]))
        assert v == pytest.approx(-math.log(2), abs=1e-12)

    def test_empty_graph(self):
        for n, labels in [(4, [0] * 4), (5, [0, 0, 1, 1, 1])]:
            assert dcsbm_log_marginal(MultiGraph(n), Partition(labels)) == 0.0

    @pytest.mark.parametrize("labels", [[0, 0, 0, 0], [0, 0, 1, 1]])
    def test_path_matches_symbolic_oracle(self, labels):
        # N=4 path graph, evaluated term by term with exact rationals
        mult = {(0, 1): 1, (1, 2): 1, (2, 3): 1}
        a = MultiGraph(4, mult)
        expect = dcsbm_probability(4, mult, labels)
        got = dcsbm_log_marginal(a, Partition(labels))
        assert got == pytest.approx(math.log(expect), abs=1e-10)

    def test_multigraph_oracle(self):
        mult = {(0, 1): 2, (1, 2): 1, (0, 3): 3}
        a = MultiGraph(4, mult)
        for labels in ([0, 1, 0, 1], [0, 0, 0, 0], [0, 1, 2, 3]):
            expect = dcsbm_probability(4, mult, labels)
            assert dcsbm_log_marginal(a, Partition(labels)) == pytest.approx(
                math.log(expect), abs=1e-10
            )

    def test_label_permutation_invariance(self):
        mult = {(0, 1): 1, (1, 2): 2, (2, 3): 1, (0, 2): 1}
        a = MultiGraph(4, mult)
        vals = {
            round(dcsbm_log_marginal(a, Partition(p)), 10)
            for p in ([0, 0, 1, 1], [1, 1, 0, 0])
        }
        assert len(vals) == 1


class TestDecompose:
    def test_sum_identity(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            n = int(rng.integers(2, 7))
            mult = {}
            for i in range(n):
                for j in range(i + 1, n):
                    w = int(rng.integers(0, 3))
                    if w:
                        mult[(i, j)] = w
            a = MultiGraph(n, mult)
            b = Partition([int(x) for x in rng.integers(0, 2, n)])
            t1, t2, t3 = microcanonical_decompose(a, b)
            assert t1 + t2 + t3 == pytest.approx(
                dcsbm_log_marginal(a, b), abs=1e-12
            )

    def test_two_node_terms(self):
        a = MultiGraph(2, {(0, 1): 1})
        t1, t2, t3 = microcanonical_decompose(a, Partition([0, 0]))
        assert t1 == pytest.approx(0.0, abs=1e-12)
        assert t2 == pytest.approx(-math.log(2), abs=1e-12)
        assert t3 == pytest.approx(0.0, abs=1e-12)

    def test_empty(self):
        t = microcanonical_decompose(MultiGraph(3), Partition([0, 0, 0]))
        assert t == (0.0, 0.0, 0.0)


class TestPrior:
    def test_examples(self):
        assert partition_log_prior(Partition([0])) == pytest.approx(0.0)
        assert partition_log_prior(Partition([0, 0])) == pytest.approx(-math.log(2))
        assert partition_log_prior(Partition([0, 1, 2])) == pytest.approx(
            -math.log(18)
        )

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6, 7])
    def test_sums_to_one_over_labeled_partitions(self, n):
        total = Fraction(0)
        for nb in range(1, n + 1):
            for lab in itertools.product(range(nb), repeat=n):
                if len(set(lab)) == nb:
                    sizes = [lab.count(r) for r in range(nb)]
                    total += labeled_partition_prior(n, sizes)
        assert total == 1
        # and the implementation agrees with the exact rational prior
        float_total = 0.0
        for nb in range(1, n + 1):
            for lab in itertools.product(range(nb), repeat=n):
                if len(set(lab)) == nb:
                    float_total += math.exp(partition_log_prior(Partition(lab)))
        assert float_total == pytest.approx(1.0, abs=1e-9)


class TestPlantedPartition:
    def test_assortative_limit(self):
        m = pp_block_matrix(PPSpec(b=2, n=10, c=1.0, mean_degree=2.0))
        assert m[0][0] == m[1][1] == 10 and m[0][1] == 0

    def test_disassortative_limit(self):
        m = pp_block_matrix(PPSpec(b=2, n=10, c=0.0, mean_degree=2.0))
        assert m[0][0] == m[1][1] == 0 and m[0][1] == m[1][0] == 10

    def test_rounding_preserves_total_and_symmetry(self):
        for c in (0.3, 0.47, 0.71, 0.9):
            spec = PPSpec(b=3, n=30, c=c, mean_degree=4.7)
            m = pp_block_matrix(spec)
            assert sum(sum(r) for r in m) == 2 * spec.e
            for r in range(3):
                assert m[r][r] % 2 == 0
                for s in range(3):
                    assert m[r][s] == m[s][r] >= 0

    def test_detectability_threshold(self):
        spec = PPSpec(b=10, n=100, c=0.5, mean_degree=5.0)
        lo, hi = spec.detectability_thresholds()
        assert hi == pytest.approx(0.1 + 9 / (10 * math.sqrt(5)), abs=1e-12)
        assert lo == pytest.approx(0.1 - 9 / (10 * math.sqrt(5)), abs=1e-12)

    def test_invalid_specs(self):
        with pytest.raises(ConstraintError):
            PPSpec(b=3, n=10, c=0.5, mean_degree=2.0)
        with pytest.raises(ConstraintError):
            PPSpec(b=2, n=10, c=1.5, mean_degree=2.0)


class TestMicrocanonicalSampling:
    def test_zero_degrees(self):
        b = Partition([0, 0])
        mg = sample_microcanonical([0, 0], [[0]], b, np.random.default_rng(0))
        assert mg.total_edges == 0

    def test_constraints_always_hold(self):
        rng = np.random.default_rng(3)
        b = Partition([0, 0, 0, 0, 1, 1, 1, 1])
        e = [[4, 3], [3, 6]]
        k = [2, 2, 2, 1, 3, 2, 2, 2]
        for _ in range(50):
            mg = sample_microcanonical(k, e, b, rng)
            assert mg.degrees() == k
            assert b.block_edge_counts(mg) == {(0, 0): 4, (0, 1): 3, (1, 1): 6}

    def test_infeasible_inputs(self):
        b = Partition([0, 0])
        with pytest.raises(ConstraintError):
            sample_microcanonical([1, 2], [[4]], b, np.random.default_rng(0))
        with pytest.raises(ConstraintError):
            sample_microcanonical([1, 2], [[3]], b, np.random.default_rng(0))
        with pytest.raises(ConstraintError):  # forced self-loop
            sample_microcanonical([2, 0], [[2]], b, np.random.default_rng(0))

    def test_uniform_over_matchings(self):
        # 4 nodes, one group, all degree 1: exactly three loop-free pairings
        rng = np.random.default_rng(11)
        b = Partition([0, 0, 0, 0])
        counts = {}
        draws = 30000
        for _ in range(draws):
            mg = sample_microcanonical([1, 1, 1, 1], [[4]], b, rng)
            key = tuple(sorted(mg.mult))
            counts[key] = counts.get(key, 0) + 1
        assert len(counts) == 3
        chi2 = sum((c - draws / 3) ** 2 / (draws / 3) for c in counts.values())
        assert chi2 < 13.82  # 2 dof, p = 0.001
