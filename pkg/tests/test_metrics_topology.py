import numpy as np
import pytest
from hypothesis import given, strategies as st

from mfrecon.dynamics import pinched_states, random_system, sample_pinch_magnitudes
from mfrecon.errors import InvalidLevelSetError, ParameterError
from mfrecon.graph import Graph, generate_er
from mfrecon.measurement import MeasurementMatrix, rip_constant_exact
from mfrecon.metrics import contingency, cumulative_counts, cumulative_mcc, mcc, mcc_indicators
from mfrecon.recovery import RecoveryConfig, threshold_support
from mfrecon.topology import (
    Scenario,
    critical_measurement_search,
    evaluate_reconstruction,
    reconstruct_topology,
    recover_first_step,
    topology_from_estimates,
)


def test_contingency_examples():
    assert contingency({1, 2}, {1, 2}, 4) == (2, 2, 0, 0)
    assert contingency({1}, {2}, 2) == (0, 0, 1, 1)
    assert contingency(set(), set(), 3) == (0, 3, 0, 0)
    with pytest.raises(ParameterError):
        contingency({5}, set(), 3)


def test_mcc_examples():
    assert mcc(1, 1, 1, 1) == 0.0
    assert mcc(3, 5, 0, 0) == 1.0
    assert mcc(0, 0, 4, 4) == -1.0
    assert mcc(0, 3, 0, 0) == 0.0  # degenerate


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_mcc_bounds_and_symmetry(tp, tn, fp, fn):
    v = mcc(tp, tn, fp, fn)
    assert -1.0 - 1e-12 <= v <= 1.0 + 1e-12
    assert v == pytest.approx(mcc(tp, tn, fn, fp), abs=1e-12)


def test_cumulative_mcc():
    true = {(1, 1): {1, 2}, (1, 2): {1, 2, 3}, (2, 1): {2}, (2, 2): {1, 2}}
    assert cumulative_mcc(true, true, 2, 3) == 1.0
    pred = dict(true)
    pred[(1, 2)] = {1, 2}
    assert cumulative_counts(true, pred, 2, 3) == (7, 4, 0, 1)
    assert cumulative_mcc(true, pred, 1, 3) == 1.0
    with pytest.raises(ParameterError):
        cumulative_mcc(true, {(1, 1): {1}}, 2, 3)


def test_reconstruct_topology_examples():
    g = reconstruct_topology([{1, 2}, {2}])
    assert g.adjacency.tolist() == [[False, False], [True, False]]
    assert reconstruct_topology([{q} for q in range(1, 6)]) == Graph.empty(5)
    with pytest.raises(ParameterError):
        reconstruct_topology([{3}, set()])


def test_evaluate_reconstruction_examples():
    g = generate_er(10, 0.3, seed=0)
    assert evaluate_reconstruction(g, g) == 1.0
    flipped = Graph(~g.adjacency & ~np.eye(10, dtype=bool))
    assert evaluate_reconstruction(g, flipped) == pytest.approx(-1.0)
    a = Graph(np.array([[0, 1], [0, 0]]))
    assert evaluate_reconstruction(a, Graph(np.array([[0, 0], [1, 0]]))) == -1.0
    with pytest.raises(ParameterError):
        evaluate_reconstruction(g, Graph.empty(3))


@given(st.integers(2, 20), st.floats(0, 0.5), st.integers(0, 2**31), st.booleans())
def test_exact_states_give_exact_topology(n, p, seed, directed):
    g = generate_er(n, p, seed=seed, directed=directed)
    sys = random_system(g, symmetric=not directed, seed=seed + 1)
    x1 = pinched_states(sys, sample_pinch_magnitudes(n, seed=seed + 2), 1)[1]
    sup = [threshold_support(x1[:, q], 0.0) for q in range(n)]
    assert reconstruct_topology(sup, directed) == g


def test_tighter_threshold_never_more_accurate():
    # on identical recovered vectors, success at 1e-10 implies success at 1e-9
    for seed in range(5):
        g = generate_er(60, 0.04, seed=seed)
        sys = random_system(g, seed=seed)
        sc = Scenario(sys, sample_pinch_magnitudes(60, seed=seed), master_seed=seed)
        x_hat, _ = recover_first_step(sc.matrix(25), sc.states1, RecoveryConfig(backend="auto"))
        tight = topology_from_estimates(x_hat, 1e-10)[0] == g
        loose = topology_from_estimates(x_hat, 1e-9)[0] == g
        assert loose or not tight


def test_strc_certificate_tiny_instance():
    # first 15 rows of a 16x16 reflection whose last row is uniform: the Gram
    # matrix is I - u u^T with u = 1/4, so delta_4 = 4/16 exactly
    n = 16
    w = np.full(n, 0.25)
    v = np.eye(n)[-1] - w
    v /= np.linalg.norm(v)
    Q = np.eye(n) - 2 * np.outer(v, v)
    m = MeasurementMatrix(Q[:-1])
    delta = rip_constant_exact(m, 4)
    assert delta == pytest.approx(0.25, abs=1e-12)
    assert delta < np.sqrt(2) - 1
    cycle = Graph(np.array([[1 if (i - j) % n == 1 else 0 for j in range(n)] for i in range(n)]))  # Delta = 1
    for seed in range(3):
        sys = random_system(cycle, symmetric=False, seed=seed)
        x1 = pinched_states(sys, sample_pinch_magnitudes(n, seed=seed), 1)[1]
        for cfg in (RecoveryConfig(backend="admm"), RecoveryConfig(backend="lp")):
            x_hat, _ = recover_first_step(m, x1, cfg)
            assert topology_from_estimates(x_hat, 1e-9, directed=True)[0] == cycle


def _scenario(seed=0, n=60, p=0.04):
    g = generate_er(n, p, seed=seed)
    return Scenario(random_system(g, seed=seed), sample_pinch_magnitudes(n, seed=seed), master_seed=seed)


def test_critical_search_finds_pc_and_plateau():
    sc = _scenario()
    res = critical_measurement_search(sc, P_grid=range(5, 59, 5))
    pc = res.p_c[1e-9]
    assert pc is not None
    scores = dict((P, s[1e-9]) for P, s in res.grid)
    assert scores[pc] > 0.99
    assert all(v <= 0.99 for P, v in scores.items() if P < pc)


def test_critical_search_not_found():
    sc = _scenario(n=40, p=0.9)
    res = critical_measurement_search(sc, P_grid=[2, 4])
    assert res.p_c[1e-9] is None and not res.found(1e-9)


def test_critical_search_independent_of_workers_and_stopping():
    grid = list(range(4, 59, 6))
    a = critical_measurement_search(_scenario(1), P_grid=grid, taus=(1e-9, 1e-10), workers=1)
    b = critical_measurement_search(_scenario(1), P_grid=grid, taus=(1e-9, 1e-10), workers=4, stop_at_pc=True)
    assert a.p_c == b.p_c
    assert a.grid[:len(b.grid)] == b.grid
    assert b.grid[-1][0] == max(b.p_c.values())


def test_critical_search_validation():
    with pytest.raises(ParameterError):
        critical_measurement_search(_scenario(), P_grid=[10, 5])
    with pytest.raises(ParameterError):
        critical_measurement_search(_scenario(), P_grid=[60])


def test_nested_schedule_rows_are_prefixes():
    sc = _scenario()
    a, b = sc.matrix(10), sc.matrix(20)
    assert np.allclose(a.phi * np.sqrt(10), b.phi[:10] * np.sqrt(20))
    fresh = Scenario(sc.system, sc.eps, matrix_schedule="fresh")
    assert isinstance(fresh.matrix(10), MeasurementMatrix)
    with pytest.raises(ParameterError):
        Scenario(sc.system, sc.eps, matrix_schedule="other")


def test_self_loop_level_sets_rejected():
    from mfrecon.graph import adjacency_from_level_sets

    with pytest.raises(InvalidLevelSetError):
        adjacency_from_level_sets([{1, 2}, set()])


def test_mcc_indicators_matches_contingency():
    t = np.array([1, 0, 1, 1, 0], dtype=bool)
    p = np.array([1, 1, 0, 1, 0], dtype=bool)
    assert mcc_indicators(t, p) == pytest.approx(mcc(*contingency({1, 3, 4}, {1, 2, 4}, 5)))
