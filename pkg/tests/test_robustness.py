"""Single-edge transfer function, phase crossovers and gain margins."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_connected_rows
from oracles import transfer_by_determinants, unstable_perturbation_by_laplacian
from salvo_consensus.errors import SingularAtZeroError
from salvo_consensus.graph import build_graph, cycle_graph, incidence_decomposition, star_graph
from salvo_consensus.robustness import (
    EdgeTransferFunction,
    destabilizing_perturbation,
    edge_agreement_matrix,
    edge_transfer_function,
    frequency_response,
    gain_margin,
    is_stable,
    nyquist_trace,
    phase_crossovers,
    unit_weight_margin_closed_form,
)


def _tf(g, edge):
    return edge_transfer_function(incidence_decomposition(g), edge)


def _rational(num, den):
    return lambda s: np.polyval(num, s) / np.polyval(den, s)


class TestTransferFunction:
    def test_unit_five_cycle(self):
        tf = _tf(cycle_graph([1] * 5), (1, 2))
        ref = _rational([-1, -2], np.polymul([1, 3.618034], [1, 1.381966]))
        for s in (0.0, 1j, 2j):
            assert tf(s) == pytest.approx(ref(s), rel=1e-6)

    @pytest.mark.parametrize("n", [3, 5, 8])
    def test_unit_star_hub_to_spoke_edge(self, n):
        # information flowing from the hub to spoke 2 is carried by w_21 (row 2 of L)
        tf = _tf(star_graph([1] * (n - 1)), (2, 1))
        for s in (0.0, 0.5j, 3j, 1 + 2j):
            assert tf(s) == pytest.approx(-(s + n - 1) / ((s + 1) * (s + n)), rel=1e-10)

    @pytest.mark.parametrize("n", [3, 5, 8])
    def test_unit_star_spoke_to_hub_edge(self, n):
        tf = _tf(star_graph([1] * (n - 1)), (1, 2))
        for s in (0.0, 0.5j, 3j):
            assert tf(s) == pytest.approx(-1 / (s + n), rel=1e-10)

    def test_matches_determinant_identity(self, table_cycle, table_star):
        for g in (table_cycle, table_star):
            d = incidence_decomposition(g)
            for e in d.edges:
                tf = edge_transfer_function(d, e)
                for s in (0.0, 0.3j, 2.0j, 11.0j):
                    assert tf(s) == pytest.approx(transfer_by_determinants(tf.A, tf.B, tf.C, s), rel=1e-8, abs=1e-14)

    def test_vectorised_equals_scalar(self, table_cycle):
        tf = _tf(table_cycle, (3, 4))
        w = np.array([0.0, 0.1, 1.0, 10.0])
        vec = frequency_response(tf, 1j * w)
        assert all(vec[k] == tf(1j * w[k]) for k in range(4))

    def test_edge_by_index_or_pair(self, table_cycle):
        d = incidence_decomposition(table_cycle)
        k = d.edge_index(4, 3)
        a, b = edge_transfer_function(d, k), edge_transfer_function(d, (4, 3))
        assert a.edge == b.edge == k and a.pair == (4, 3) and a.weight == 5

    def test_index_out_of_range(self, table_cycle):
        with pytest.raises(IndexError):
            edge_transfer_function(incidence_decomposition(table_cycle), 10)

    def test_singular_system_matrix(self):
        # w_12 = -w_21 cancels the single tree edge: A = -(w_12 + w_21) = 0
        g = build_graph(2, [(1, 2, 1.0, -1.0)])
        with pytest.raises(SingularAtZeroError):
            _tf(g, (1, 2))

    def test_nominal_stability_positive_weights(self, table_cycle, table_star):
        for g in (table_cycle, table_star):
            assert is_stable(edge_agreement_matrix(incidence_decomposition(g)))


class TestCrossoversAndMargins:
    def test_unit_five_cycle_only_dc(self):
        tf = _tf(cycle_graph([1] * 5), (1, 2))
        assert phase_crossovers(tf) == [0.0]
        rep = gain_margin(tf)
        assert rep.effective_gain_margin == pytest.approx(2.5, rel=1e-12)
        assert rep.min_admissible_weight == pytest.approx(-1.5, rel=1e-12)

    def test_unit_five_star_spoke_edge_only_dc(self):
        assert phase_crossovers(_tf(star_graph([1] * 4), (2, 1))) == [0.0]

    @pytest.mark.parametrize("n", range(3, 11))
    def test_unit_cycle_closed_form(self, n):
        tf = _tf(cycle_graph([1] * n), (1, 2))
        assert gain_margin(tf).effective_gain_margin == pytest.approx(
            unit_weight_margin_closed_form("cycle", n), rel=1e-6
        )
        assert 1.0 / abs(tf(0.0)) == pytest.approx(2.0 / (1.0 - 1.0 / n), rel=1e-12)

    @pytest.mark.parametrize("n", range(3, 11))
    def test_unit_star_closed_forms(self, n):
        g = star_graph([1] * (n - 1))
        hub = gain_margin(_tf(g, (n, 1))).effective_gain_margin
        spoke = gain_margin(_tf(g, (1, n))).effective_gain_margin
        assert hub == pytest.approx(unit_weight_margin_closed_form("star-hub-edge", n), rel=1e-6)
        assert spoke == pytest.approx(unit_weight_margin_closed_form("star-spoke-edge", n), rel=1e-6)

    def test_closed_form_values(self):
        assert unit_weight_margin_closed_form("cycle", 5) == 2.5
        assert unit_weight_margin_closed_form("star-hub-edge", 5) == 1.25
        assert unit_weight_margin_closed_form("star-spoke-edge", 5) == 5
        with pytest.raises(ValueError):
            unit_weight_margin_closed_form("wheel", 5)
        with pytest.raises(ValueError):
            unit_weight_margin_closed_form("cycle", 2)

    def test_report_consistency(self, table_cycle):
        d = incidence_decomposition(table_cycle)
        for e in d.edges:
            rep = gain_margin(edge_transfer_function(d, e))
            assert 0.0 in rep.crossover_frequencies
            assert rep.effective_gain_margin == pytest.approx(min(rep.margins))
            assert rep.min_admissible_weight == pytest.approx(rep.nominal_weight - rep.effective_gain_margin)
            for w in rep.crossover_frequencies:
                m = frequency_response(edge_transfer_function(d, e), 1j * w)
                assert m.real < 0 and abs(m.imag) <= 1e-8 * abs(m)

    def test_nonzero_crossovers_are_found(self, table_cycle):
        # edge 4->3 of the heterogeneous cycle loops around the origin once more
        rep = gain_margin(_tf(table_cycle, (4, 3)))
        assert len(rep.crossover_frequencies) == 2
        assert rep.crossover_frequencies[1] > 0

    def test_table_cycle_margin_matches_laplacian_oracle(self, table_cycle):
        rows = [[e.i, e.j, e.w_ij, e.w_ji] for e in table_cycle.edges]
        for tail, head in [(1, 2), (4, 3), (3, 2)]:
            rep = gain_margin(_tf(table_cycle, (tail, head)))
            oracle = unstable_perturbation_by_laplacian(5, rows, tail, head)
            assert rep.effective_gain_margin == pytest.approx(oracle, rel=1e-6)


class TestNyquist:
    def test_unit_cycle_at_dc(self):
        row = nyquist_trace(_tf(cycle_graph([1] * 5), (1, 2)), [0.0])[0]
        np.testing.assert_allclose(row, [0.0, -0.4, 0.0], atol=1e-14)

    def test_strictly_proper(self):
        row = nyquist_trace(_tf(cycle_graph([1] * 5), (1, 2)), [1e3])[0]
        assert math.hypot(row[1], row[2]) < 1e-3

    def test_rejects_negative_frequency(self):
        with pytest.raises(ValueError):
            nyquist_trace(_tf(cycle_graph([1] * 5), (1, 2)), [-1.0, 1.0])

    def test_leftmost_real_crossing_is_effective_margin(self, table_cycle):
        tf = _tf(table_cycle, (1, 2))
        rows = nyquist_trace(tf, np.concatenate([[0.0], np.geomspace(1e-2, 1e2, 4000)]))
        near_axis = rows[np.abs(rows[:, 2]) < 1e-3 * np.hypot(rows[:, 1], rows[:, 2])]
        leftmost = near_axis[:, 1].min()
        assert leftmost == pytest.approx(-1.0 / gain_margin(tf).effective_gain_margin, rel=0.02)


# -- randomized oracle comparison -------------------------------------------------

@settings(max_examples=50)
@given(st.integers(2, 7), st.integers(0, 3), st.integers(0, 2**32 - 1), st.data())
def test_margin_matches_brute_force(n, extra, seed, data):
    rng = np.random.default_rng(seed)
    rows = random_connected_rows(rng, n, extra)
    d = incidence_decomposition(build_graph(n, rows))
    k = data.draw(st.integers(0, len(d.edges) - 1))
    tail, head = d.edges[k]
    rep = gain_margin(edge_transfer_function(d, k))
    brute = unstable_perturbation_by_laplacian(n, rows, tail, head)
    if math.isinf(brute):
        assert math.isinf(rep.effective_gain_margin) or rep.effective_gain_margin > 1e3
    else:
        assert rep.effective_gain_margin == pytest.approx(brute, rel=0.01)
    # the package's own eigenvalue bisection agrees too
    assert destabilizing_perturbation(d, k) == pytest.approx(brute, rel=1e-6)


def test_transfer_function_is_frozen():
    tf = _tf(cycle_graph([1] * 4), (1, 2))
    assert isinstance(tf, EdgeTransferFunction)
    with pytest.raises(AttributeError):
        tf.edge = 3
