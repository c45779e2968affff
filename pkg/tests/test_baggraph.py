"""Graph construction and smoothness-energy tests against hand and sum-form oracles."""

import numpy as np
import pytest

from smoothmil.autodiff import Tape, Tensor, check_gradient
from smoothmil.baggraph import (
    BagGraph,
    chain_graph,
    energy_competition,
    energy_s1,
    energy_s2,
    energy_sum_form,
)


def tensorize(values):
    return Tensor(np.asarray(values, dtype=np.float64))


class TestChainGraph:
    def test_chain3_matrices(self):
        g = chain_graph(3)
        np.testing.assert_array_equal(g.adjacency, [[0, 1, 0], [1, 0, 1], [0, 1, 0]])
        np.testing.assert_array_equal(g.degree, np.diag([1.0, 2.0, 1.0]))
        np.testing.assert_array_equal(g.laplacian, [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])

    def test_single_instance(self):
        g = chain_graph(1)
        np.testing.assert_array_equal(g.laplacian, [[0.0]])

    def test_chain2(self):
        np.testing.assert_array_equal(chain_graph(2).laplacian, [[1, -1], [-1, 1]])

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            chain_graph(0)

    def test_laplacian_row_sums_zero(self):
        for n in (1, 2, 5, 17, 60):
            assert np.abs(chain_graph(n).laplacian.sum(axis=1)).max() < 1e-12

    def test_laplacian_positive_semidefinite(self):
        for n in (2, 7, 30):
            assert np.linalg.eigvalsh(chain_graph(n).laplacian).min() > -1e-12

    def test_matrices_are_write_protected(self):
        g = chain_graph(4)
        with pytest.raises(ValueError):
            g.adjacency[0, 1] = 5.0


class TestFromAdjacency:
    def test_rejects_nonsquare(self):
        with pytest.raises(ValueError, match="square"):
            BagGraph.from_adjacency(np.ones((2, 3)))

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="symmetric"):
            BagGraph.from_adjacency([[0, 1], [0, 0]])

    def test_rejects_self_loops(self):
        with pytest.raises(ValueError, match="diagonal"):
            BagGraph.from_adjacency([[1, 0], [0, 0]])

    def test_rejects_nonbinary(self):
        with pytest.raises(ValueError, match="0 or 1"):
            BagGraph.from_adjacency([[0, 2], [2, 0]])

    def test_accepts_arbitrary_symmetric_graph(self):
        a = np.array([[0, 1, 1], [1, 0, 0], [1, 0, 0]], dtype=float)
        g = BagGraph.from_adjacency(a)
        np.testing.assert_array_equal(g.degree, np.diag([2.0, 1.0, 1.0]))
        assert np.abs(g.laplacian.sum(axis=1)).max() == 0.0


class TestEnergyValues:
    def test_s1_constant_is_zero(self):
        assert energy_s1(tensorize([2.5, 2.5, 2.5]), chain_graph(3)).item() == 0.0

    def test_s1_hand_values(self):
        g = chain_graph(3)
        assert energy_s1(tensorize([0.0, 1.0, 0.0]), g).item() == pytest.approx(2.0, abs=1e-12)
        assert energy_s1(tensorize([0.0, 1.0, 2.0]), g).item() == pytest.approx(2.0, abs=1e-12)

    def test_s2_constant_is_zero(self):
        assert energy_s2(tensorize([1.0, 1.0]), chain_graph(2)).item() == 0.0

    def test_s2_hand_values(self):
        g = chain_graph(3)
        assert energy_s2(tensorize([0.0, 1.0, 0.0]), g).item() == pytest.approx(6.0, abs=1e-12)
        assert energy_s2(tensorize([0.0, 1.0, 2.0]), g).item() == pytest.approx(2.0, abs=1e-12)

    def test_competition_hand_values(self):
        g = chain_graph(2)
        assert energy_competition(tensorize([1.0, -1.0]), g).item() == pytest.approx(0.0, abs=1e-12)
        assert energy_competition(tensorize([1.0, 1.0]), g).item() == pytest.approx(4.0, abs=1e-12)
        assert energy_competition(tensorize([0.0, 0.0, 0.0]), chain_graph(3)).item() == 0.0

    def test_length_mismatch_errors(self):
        g = chain_graph(3)
        for energy in (energy_s1, energy_s2, energy_competition):
            with pytest.raises(ValueError, match="does not match"):
                energy(tensorize([1.0, 2.0]), g)
        with pytest.raises(ValueError, match="does not match"):
            energy_sum_form([1.0, 2.0], g, 1)


class TestSumFormOracle:
    def test_order1_hand_value(self):
        assert energy_sum_form([0.0, 1.0, 0.0], chain_graph(3), 1) == pytest.approx(2.0, abs=1e-12)

    def test_order2_hand_value_quarter_prefactor(self):
        # literal second-order sum keeps its 1/4 prefactor: 6/4 = 1.5
        assert energy_sum_form([0.0, 1.0, 0.0], chain_graph(3), 2) == pytest.approx(1.5, abs=1e-12)

    def test_order1_constant_zero(self):
        assert energy_sum_form([3.0, 3.0, 3.0, 3.0], chain_graph(4), 1) == 0.0

    def test_rejects_bad_order(self):
        with pytest.raises(ValueError, match="order"):
            energy_sum_form([0.0, 1.0], chain_graph(2), 3)

    def test_matrix_forms_match_sum_forms_randomized(self):
        rng = np.random.default_rng(23)
        for _ in range(200):
            n = int(rng.integers(1, 61))
            f = rng.uniform(-3.0, 3.0, size=n)
            g = chain_graph(n)
            s1 = energy_s1(tensorize(f), g).item()
            s2 = energy_s2(tensorize(f), g).item()
            ref1 = energy_sum_form(f, g, 1)
            ref2 = 4.0 * energy_sum_form(f, g, 2)
            assert abs(s1 - ref1) <= 1e-12 * max(1.0, abs(ref1))
            assert abs(s2 - ref2) <= 1e-12 * max(1.0, abs(ref2))


class TestEnergyProperties:
    def test_shift_invariance(self):
        rng = np.random.default_rng(29)
        for _ in range(50):
            n = int(rng.integers(2, 40))
            f = rng.uniform(-3, 3, size=n)
            c = rng.uniform(-10, 10)
            g = chain_graph(n)
            for energy in (energy_s1, energy_s2):
                base = energy(tensorize(f), g).item()
                shifted = energy(tensorize(f + c), g).item()
                assert abs(base - shifted) <= 1e-10 * max(1.0, abs(base))

    def test_nonnegative(self):
        rng = np.random.default_rng(31)
        for _ in range(100):
            n = int(rng.integers(1, 30))
            f = tensorize(rng.uniform(-3, 3, size=n))
            g = chain_graph(n)
            assert energy_s1(f, g).item() >= 0.0
            assert energy_s2(f, g).item() >= 0.0

    def test_zero_for_single_instance(self):
        f = tensorize([4.2])
        g = chain_graph(1)
        assert energy_s1(f, g).item() == 0.0
        assert energy_s2(f, g).item() == 0.0

    def test_s1_gradient_is_twice_laplacian_times_f(self):
        rng = np.random.default_rng(37)
        n = 9
        f = rng.normal(size=n)
        g = chain_graph(n)
        ft = tensorize(f)
        with Tape() as tape:
            e = energy_s1(ft, g)
        grad = tape.backward(e).wrt(ft)
        np.testing.assert_allclose(grad, 2.0 * g.laplacian @ f, rtol=1e-12, atol=1e-12)

    def test_energy_gradients_pass_fd_gate(self):
        rng = np.random.default_rng(41)
        f = Tensor(rng.uniform(-2, 2, size=8))
        g = chain_graph(8)
        assert check_gradient(lambda t: energy_s1(t, g), f) < 1e-6
        assert check_gradient(lambda t: energy_s2(t, g), f) < 1e-6
        assert check_gradient(lambda t: energy_competition(t, g), f) < 1e-6

    def test_not_permutation_invariant(self):
        # reordering instances against the chain changes the energy
        g = chain_graph(3)
        smooth = energy_s1(tensorize([0.0, 1.0, 2.0]), g).item()
        jumbled = energy_s1(tensorize([0.0, 2.0, 1.0]), g).item()
        assert smooth != jumbled

    def test_chain_graph_cached(self):
        assert chain_graph(12) is chain_graph(12)
