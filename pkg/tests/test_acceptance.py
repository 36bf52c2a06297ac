"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The long paper-profile run of the first experiment is skipped unless the
environment variable MFRECON_LONG=1 is set.
"""

import math
import os
import time

import numpy as np
import pytest

from mfrecon.config import make_config
from mfrecon.dynamics import pinched_states, random_system, sample_pinch_magnitudes, simulate_pinched_family
from mfrecon.errors import RankDeficiencyError
from mfrecon.experiments import run_experiment_1, run_experiment_2, run_experiment_3
from mfrecon.graph import generate_er, level_set, max_out_degree
from mfrecon.identification import build_dictionary_matrix, fit_coefficients, oracle_dictionary, stack_targets
from mfrecon.measurement import MeasurementMatrix, gaussian_matrix, is_full_spark, spark
from mfrecon.recovery import RecoveryConfig, basis_pursuit, l0_oracle
from mfrecon.topology import reconstruct_topology

LONG = os.environ.get("MFRECON_LONG") == "1"


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {number}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, detail


def sparse_vector(rng, n, s, low=0.5, high=1.0):
    x = np.zeros(n)
    idx = rng.choice(n, s, replace=False)
    x[idx] = rng.uniform(low, high, s) * rng.choice((-1.0, 1.0), s)
    return x


def bounded_degree_graph(rng, n_range, max_delta, min_delta=0):
    while True:
        n = int(rng.integers(*n_range))
        g = generate_er(n, float(rng.uniform(0.05, 0.35)), seed=rng, directed=bool(rng.integers(2)))
        if min_delta <= max_out_degree(g) <= max_delta:
            return g


# 1 ----------------------------------------------------------------------------


def test_criterion_1_support_correspondence(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    bad, checked = [], 0
    for k in range(200):
        n = int(rng.integers(2, 51))
        directed = bool(rng.integers(2))
        g = generate_er(n, float(rng.uniform(0.0, 0.5)), seed=rng, directed=directed)
        sys = random_system(g, str(rng.choice(["logistic", "linear"])), str(rng.choice(["diffusive", "sine"])),
                            sign=int(rng.choice([-1, 1])), symmetric=not directed, seed=rng)
        x1 = pinched_states(sys, sample_pinch_magnitudes(n, seed=rng), 1)[1]
        for q in range(1, n + 1):
            supp = set(np.flatnonzero(x1[:, q - 1]) + 1)
            L1 = level_set(g, q)
            checked += 1
            if supp - {q} != L1 or len(supp) > len(L1) + 1:
                bad.append((k, q))
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 10
    report(capsys, 1, ok, f"200 instances, {checked} pinches, {len(bad)} mismatches, {elapsed:.1f}s < 10s")


# 2 ----------------------------------------------------------------------------


def test_criterion_2_wtrc_oracle(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    failures, graphs, worst = [], 0, 0.0
    while graphs < 50:
        g = bounded_degree_graph(rng, (9, 15), 3, min_delta=1)
        delta = max_out_degree(g)
        m = gaussian_matrix(2 * delta + 2, g.n, seed=rng)
        if not is_full_spark(m):
            continue
        graphs += 1
        sys = random_system(g, symmetric=not g.directed, seed=rng)
        x1 = pinched_states(sys, sample_pinch_magnitudes(g.n, seed=rng), 1)[1]
        supports = []
        for q in range(g.n):
            r = l0_oracle(m, m.phi @ x1[:, q], delta + 1)
            err = float(np.max(np.abs(r.x_hat - x1[:, q])))
            worst = max(worst, err)
            if not r.unique or err > 1e-8:
                failures.append((graphs, q + 1, r.status, err))
            supports.append(r.support)
        if reconstruct_topology(supports, g.directed) != g:
            failures.append((graphs, "topology"))
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 120
    report(capsys, 2, ok, f"{graphs} graphs, {len(failures)} failures, max error {worst:.1e}, {elapsed:.1f}s < 120s")


# 3 ----------------------------------------------------------------------------


def matrix_with_spark(rng, P, N, k):
    """Gaussian P x N matrix whose first k columns form the only short dependency.

    Column k-1 is a combination of columns 0..k-2 with all weights nonzero, so
    the spark is exactly k (for k <= P + 1). Returns the matrix and the null vector.
    """
    phi = rng.standard_normal((P, N))
    w = rng.uniform(0.5, 1.5, k - 1) * rng.choice((-1.0, 1.0), k - 1)
    phi[:, k - 1] = phi[:, :k - 1] @ w
    v = np.zeros(N)
    v[:k - 1], v[k - 1] = w, -1.0
    perm = rng.permutation(N)
    return phi[:, perm], v[perm]


def test_criterion_3_spark_uniqueness(capsys):
    rng = np.random.default_rng(303)
    unique_ok = nonunique_ok = cases = 0
    problems = []
    # below half the spark: full-spark and engineered-spark matrices
    for c in range(60):
        P = int(rng.integers(3, 7))
        N = P + int(rng.integers(1, 5))
        if c % 2:
            k = P + 1
            m = MeasurementMatrix(rng.standard_normal((P, N)))
        else:
            k = int(rng.integers(3, P + 2))
            m = MeasurementMatrix(matrix_with_spark(rng, P, N, k)[0])
        if spark(m) != k:
            problems.append(("spark", c))
            continue
        s = int(rng.integers(1, (k - 1) // 2 + 1))
        x = sparse_vector(rng, N, s)
        r = l0_oracle(m, m.phi @ x, s)
        cases += 1
        if r.unique and np.array_equal(np.flatnonzero(r.x_hat), np.flatnonzero(x)) and np.allclose(r.x_hat, x, atol=1e-9):
            unique_ok += 1
        else:
            problems.append(("unique", c, r.status))
    # at half the spark: split an even-size dependency into two equal halves
    for c in range(60):
        P = int(rng.integers(3, 7))
        N = P + int(rng.integers(1, 5))
        k = int(rng.choice([j for j in (2, 4, 6) if j <= P + 1]))
        phi, v = matrix_with_spark(rng, P, N, k)
        m = MeasurementMatrix(phi)
        if spark(m) != k:
            problems.append(("spark", c))
            continue
        support = np.flatnonzero(v)
        half = rng.permutation(support)[:k // 2]
        x = np.zeros(N)
        x[half] = v[half]
        r = l0_oracle(m, m.phi @ x, k // 2)
        cases += 1
        if r.status == "non-unique" and not r.unique and len(r.minimizers) >= 2:
            nonunique_ok += 1
        else:
            problems.append(("non-unique", c, r.status))
    ok = not problems and unique_ok + nonunique_ok == cases and cases >= 100
    report(capsys, 3, ok, f"{unique_ok} unique and {nonunique_ok} non-unique of {cases} cases")


# 4 ----------------------------------------------------------------------------


def test_criterion_4_l0_l1_equivalence(capsys):
    rng = np.random.default_rng(404)
    lp, admm, auto = (RecoveryConfig(backend=b) for b in ("lp", "admm", "auto"))
    cases = unique = 0
    worst_l0 = worst_backends = 0.0
    failures = []
    # the bound P >= 2 s ln N + 4 is below N only for s = 1 when N <= 15;
    # s = 2, 3 instances satisfy it with P >= N
    plan = [1] * 100 + [2] * 30 + [3] * 30
    for s in plan:
        N = int(rng.integers(10, 16)) if s == 1 else int(rng.integers(2 * s, 16))
        bound = math.ceil(2 * s * math.log(N) + 4)
        P = int(rng.integers(bound, max(bound + 1, N)))
        m = MeasurementMatrix(rng.standard_normal((P, N)) / math.sqrt(P))
        x = sparse_vector(rng, N, s)
        y = m.phi @ x
        oracle = l0_oracle(m, y, s)
        results = [basis_pursuit(m, y, cfg) for cfg in (auto, admm, lp)]
        cases += 1
        if not all(r.converged for r in results):
            failures.append(("not converged", cases))
            continue
        d_backends = float(np.max(np.abs(results[1].x_hat - results[2].x_hat)))
        worst_backends = max(worst_backends, d_backends)
        if d_backends > 1e-6:
            failures.append(("backends", cases, d_backends))
        if oracle.unique:
            unique += 1
            d = float(np.max(np.abs(results[0].x_hat - oracle.x_hat)))
            worst_l0 = max(worst_l0, d)
            if d > 1e-6:
                failures.append(("l0 vs l1", cases, d))
    ok = not failures and unique >= 100
    report(capsys, 4, ok, f"{cases} instances, {unique} oracle-unique, max |bp - l0| {worst_l0:.1e}, "
                          f"max |admm - lp| {worst_backends:.1e}, {len(failures)} failures")


# 5 ----------------------------------------------------------------------------


def test_criterion_5_recovery_at_scale(capsys):
    t0 = time.perf_counter()
    good = 0
    for seed in range(100):
        rng = np.random.default_rng([505, seed])
        m = gaussian_matrix(100, 1000, seed=rng)
        x = sparse_vector(rng, 1000, 10)
        r = basis_pursuit(m, m.phi @ x)
        good += bool(np.linalg.norm(r.x_hat - x) <= 1e-5)
    elapsed = time.perf_counter() - t0
    ok = good >= 95 and elapsed < 300
    report(capsys, 5, ok, f"{good}/100 seeds within 1e-5, {elapsed:.1f}s < 300s")


# 6 ----------------------------------------------------------------------------


def test_criterion_6_experiment1_smoke(capsys, tmp_path):
    t0 = time.perf_counter()
    res = run_experiment_1(make_config("exp1", "smoke"), tmp_path)
    elapsed = time.perf_counter() - t0
    pc_half, pc_fifth = res.p_c[(0.5, 1e-9)], res.p_c[(0.2, 1e-9)]
    ordering = pc_half is not None and pc_fifth is not None and pc_half <= pc_fifth
    plateau = all(v is True for v in res.checks["plateau_after_pc"].values())
    ok = ordering and plateau and elapsed < 600
    report(capsys, 6, ok, f"smoke: P_c(0.5)={pc_half} <= P_c(0.2)={pc_fifth}, plateau {plateau}, "
                          f"{elapsed:.0f}s < 600s")


@pytest.mark.slow
@pytest.mark.skipif(not LONG, reason="set MFRECON_LONG=1 for the paper-profile run")
def test_criterion_6_experiment1_paper(capsys, tmp_path):
    cfg = make_config("exp1", "paper")
    res = run_experiment_1(cfg, tmp_path)
    r_half, r_fifth = (res.p_c[(e, 1e-9)] for e in (0.5, 0.2))
    in_half = r_half is not None and 0.05 <= r_half / cfg.n <= 0.09
    in_fifth = r_fifth is not None and 0.08 <= r_fifth / cfg.n <= 0.12
    report(capsys, "6 (paper)", in_half and in_fifth,
           f"P_c/N = {r_half and r_half / cfg.n} in [0.05, 0.09], {r_fifth and r_fifth / cfg.n} in [0.08, 0.12]")


# 7 ----------------------------------------------------------------------------


def test_criterion_7_experiment2(capsys, tmp_path):
    t0 = time.perf_counter()
    res = run_experiment_2(make_config("exp2", "smoke"), tmp_path)
    elapsed = time.perf_counter() - t0
    monotone, robust = res.checks["monotone_in_density"], res.checks["tighter_threshold_needs_more"]
    ok = monotone and robust and elapsed < 1200
    bad = [k for k, v in {**res.monotone, **res.robust}.items() if not v]
    report(capsys, 7, ok, f"monotone {monotone}, threshold-robust {robust}, violations {bad}, {elapsed:.0f}s < 1200s")


# 8 ----------------------------------------------------------------------------


def test_criterion_8_experiment3(capsys, tmp_path):
    t0 = time.perf_counter()
    cfg = make_config("exp3", "smoke")
    res = run_experiment_3(cfg, tmp_path)
    elapsed = time.perf_counter() - t0
    mccs = {T: res.cumulative[T][-1] for T in res.cumulative}
    mcc_ok = all(mccs[T] >= 0.99 for T in range(1, 6))
    mse_ok = res.mse[3] <= 0.05 and res.mse[5] <= 0.05
    breakdown = res.mse[7] > res.mse[5]
    ok = cfg.n == 100 and cfg.p_grid() == [60] and mcc_ok and mse_ok and breakdown and elapsed < 900
    report(capsys, 8, ok, f"min MCC(T<=5) {min(mccs[T] for T in range(1, 6)):.3f}, MSE(3)={res.mse[3]:.2e}, "
                          f"MSE(5)={res.mse[5]:.2e}, MSE(7)={res.mse[7]:.2e}, {elapsed:.0f}s < 900s")


# 9 ----------------------------------------------------------------------------


def test_criterion_9_identification(capsys):
    rng = np.random.default_rng(909)
    instances = nodes = rank_raised = rank_expected = 0
    worst = 0.0
    failures = []
    while instances < 120:
        g = bounded_degree_graph(rng, (3, 15), 3)
        sys = random_system(g, str(rng.choice(["logistic", "linear"])), str(rng.choice(["diffusive", "sine"])),
                            sign=int(rng.choice([-1, 1])), symmetric=not g.directed, seed=rng)
        terms, true = oracle_dictionary(sys)
        s_max = max(len(t) for t in terms.values())
        trajs = simulate_pinched_family(sys, sample_pinch_magnitudes(g.n, 0.02, 0.1, seed=rng), s_max)
        instances += 1
        for i in terms:
            nodes += 1
            s_i = len(terms[i])
            try:
                c = fit_coefficients(build_dictionary_matrix(terms, i, trajs, s_max), stack_targets(i, trajs, s_max))
                err = float(np.max(np.abs(c - true[i])))
                worst = max(worst, err)
                if err > 1e-8:
                    failures.append((instances, i, err))
            except RankDeficiencyError:
                failures.append((instances, i, "rank"))
            # fewer than s_i rows: one trajectory observed for T < s_i steps
            for T in range(1, s_i):
                rank_expected += 1
                try:
                    fit_coefficients(build_dictionary_matrix(terms, i, trajs[:1], T), stack_targets(i, trajs[:1], T))
                except RankDeficiencyError:
                    rank_raised += 1
    ok = not failures and rank_raised == rank_expected
    report(capsys, 9, ok, f"{instances} instances, {nodes} nodes, max error {worst:.1e}, "
                          f"rank check raised {rank_raised}/{rank_expected}")


# 10 ---------------------------------------------------------------------------


def _outputs(path):
    return {f.name: f.read_bytes() for f in sorted(path.iterdir())}


def test_criterion_10_determinism(capsys, tmp_path):
    many = max(4, os.cpu_count() or 1)
    runs = [
        ("exp1", run_experiment_1, make_config("exp1", "smoke", {"n": 100, "p_max": 50})),
        ("exp2", run_experiment_2, make_config("exp2", "smoke", {"n": 100, "eps_values": [0.3, 0.7]})),
        ("exp3", run_experiment_3, make_config("exp3", "smoke")),
    ]
    differing = []
    files = 0
    for name, runner, cfg in runs:
        outs = []
        for k, workers in enumerate((1, 1, many)):
            runner(cfg, tmp_path / f"{name}_{k}", workers=workers)
            outs.append(_outputs(tmp_path / f"{name}_{k}"))
        files += len(outs[0])
        differing += [(name, f) for f in outs[0] if not (outs[0][f] == outs[1].get(f) == outs[2].get(f))]
        differing += [(name, "file set")] if not (outs[0].keys() == outs[1].keys() == outs[2].keys()) else []
    ok = not differing and files > 0
    report(capsys, 10, ok, f"{files} files byte-identical across repeat and {many}-worker runs, differing {differing}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
