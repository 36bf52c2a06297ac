"""Adjacency reconstruction from recovered supports, and the critical-P search."""

from __future__ import annotations

import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from mfrecon import seeds
from mfrecon.dynamics import NetworkSystem, pinched_states
from mfrecon.errors import ParameterError
from mfrecon.graph import Graph, adjacency_from_level_sets
from mfrecon.measurement import MeasurementMatrix, gaussian_matrix
from mfrecon.metrics import mcc_indicators
from mfrecon.recovery import RecoveryConfig, basis_pursuit_batch, threshold_support

WORKERS_ENV = "MFRECON_WORKERS"


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def reconstruct_topology(supports: Sequence[set], directed: bool = True) -> Graph:
    """Level set of q is the recovered support of x^q(1) with q removed."""
    n = len(supports)
    for q, s in enumerate(supports, start=1):
        if any(not 1 <= i <= n for i in s):
            raise ParameterError(f"support of pinch {q} leaves 1..{n}")
    return adjacency_from_level_sets([set(s) - {q} for q, s in enumerate(supports, start=1)], directed)


def evaluate_reconstruction(a_true: Graph, a_hat: Graph) -> float:
    """MCC over the off-diagonal adjacency entries."""
    if a_true.n != a_hat.n:
        raise ParameterError(f"graph sizes differ: {a_true.n} vs {a_hat.n}")
    off = ~np.eye(a_true.n, dtype=bool)
    return mcc_indicators(a_true.adjacency[off], a_hat.adjacency[off])


@dataclass
class ReconstructionReport:
    adjacency_hat: Graph
    per_q_supports: list
    mcc_vs_truth: float | None
    P_used: int
    tau_used: float
    diagnostics: dict = field(default_factory=dict)


def summarize(results) -> dict:
    statuses = Counter(r.status for r in results)
    backends = Counter(r.backend for r in results)
    return {
        "status_counts": dict(sorted(statuses.items())),
        "backend_counts": dict(sorted(backends.items())),
        "max_residual": max((r.residual for r in results), default=0.0),
        "total_iterations": int(sum(r.iterations for r in results)),
    }


def recover_first_step(m: MeasurementMatrix, states1: np.ndarray, cfg: RecoveryConfig):
    """Measure every x^q(1) (columns of ``states1``) with ``m`` and recover them."""
    results = basis_pursuit_batch(m, m.phi @ states1, cfg)
    return np.column_stack([r.x_hat for r in results]), results


def topology_from_estimates(x_hat: np.ndarray, tau: float, directed: bool = True):
    supports = [threshold_support(x_hat[:, q], tau) for q in range(x_hat.shape[1])]
    return reconstruct_topology(supports, directed), supports


@dataclass
class Scenario:
    """One network realization plus the schedule of matrices to measure it with.

    Matrices come from the ``matrix`` stream of ``master_seed`` and never
    depend on the graph density being swept. ``matrix_schedule="fresh"`` draws
    an independent matrix per P (counters ``(repeat, P)``). ``"nested"`` draws
    one standard normal ``(N - 1) x N`` array per repeat and measures with its
    first P rows scaled by ``1/sqrt(P)``, so each larger P only adds
    constraints and exact l1 recovery of a column, once achieved, persists.
    """

    system: NetworkSystem
    eps: np.ndarray
    master_seed: int = 0
    repeat: int = 0
    directed: bool = False
    matrix_schedule: str = "nested"
    _states1: np.ndarray | None = field(default=None, repr=False)
    _rows: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.matrix_schedule not in ("fresh", "nested"):
            raise ParameterError(f"unknown matrix schedule {self.matrix_schedule!r}")

    @property
    def n(self) -> int:
        return self.system.n

    @property
    def states1(self) -> np.ndarray:
        if self._states1 is None:
            self._states1 = pinched_states(self.system, self.eps, 1)[1]
        return self._states1

    def matrix(self, P: int) -> MeasurementMatrix:
        if self.matrix_schedule == "fresh":
            return gaussian_matrix(P, self.n, seeds.stream(self.master_seed, "matrix", self.repeat, P))
        if not 1 <= P < self.n:
            raise ParameterError(f"need 1 <= P < N, got P={P}, N={self.n}")
        if self._rows is None:
            self._rows = seeds.rng(self.master_seed, "matrix", self.repeat).standard_normal((self.n - 1, self.n))
        prov = {"kind": "gaussian", "schedule": "nested", "seed": self.master_seed,
                "repeat": self.repeat, "variance": 1.0 / P}
        return MeasurementMatrix(self._rows[:P] / np.sqrt(P), prov)

    def run(self, P: int, taus: Sequence[float], cfg: RecoveryConfig) -> tuple[dict, dict]:
        """Full pipeline at one P; returns ({tau: MCC}, diagnostics)."""
        x_hat, results = recover_first_step(self.matrix(P), self.states1, cfg)
        scores = {}
        for tau in taus:
            g_hat, _ = topology_from_estimates(x_hat, tau, self.directed)
            scores[tau] = evaluate_reconstruction(self.system.graph, g_hat)
        return scores, summarize(results)


@dataclass
class SearchResult:
    p_c: dict  # tau -> smallest P with MCC > target, or None
    grid: list  # (P, {tau: mean MCC}) in grid order
    diagnostics: dict = field(default_factory=dict)

    def found(self, tau) -> bool:
        return self.p_c.get(tau) is not None


def critical_measurement_search(
    scenarios: Scenario | Sequence[Scenario],
    mcc_target: float = 0.99,
    P_grid: Sequence[int] = (),
    taus: Sequence[float] = (1e-9,),
    cfg: RecoveryConfig | None = None,
    workers: int | None = None,
    stop_at_pc: bool = False,
) -> SearchResult:
    """Smallest P in ``P_grid`` whose MCC (averaged over scenarios) exceeds ``mcc_target``.

    With ``stop_at_pc`` the grid is walked in batches of ``workers`` points and
    abandoned once every tau has its P_c; results never depend on ``workers``.
    """
    if isinstance(scenarios, Scenario):
        scenarios = [scenarios]
    cfg = cfg or RecoveryConfig(backend="auto")
    workers = workers or default_workers()
    grid = [int(P) for P in P_grid]
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ParameterError("P grid must be non-empty and strictly increasing")
    n = scenarios[0].n
    if grid[0] < 1 or grid[-1] > n - 1:
        raise ParameterError(f"P grid must lie in [1, {n - 1}]")

    # fill the lazy caches once so worker threads only read them
    for sc in scenarios:
        sc.states1
        sc.matrix(grid[0])

    def point(P):
        per = [sc.run(P, taus, cfg) for sc in scenarios]
        scores = {tau: float(np.mean([s[tau] for s, _ in per])) for tau in taus}
        return P, scores, [d for _, d in per]

    rows, diags = [], {}
    p_c = {tau: None for tau in taus}
    batch = workers if stop_at_pc else len(grid)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for start in range(0, len(grid), batch):
            for P, scores, d in pool.map(point, grid[start:start + batch]):
                rows.append((P, scores))
                diags[P] = d
                for tau in taus:
                    if p_c[tau] is None and scores[tau] > mcc_target:
                        p_c[tau] = P
            if stop_at_pc and all(v is not None for v in p_c.values()):
                break
    if stop_at_pc and all(v is not None for v in p_c.values()):
        # a batch may overshoot; drop those points so output is independent of workers
        last = max(p_c.values())
        rows = [r for r in rows if r[0] <= last]
        diags = {P: d for P, d in diags.items() if P <= last}
    return SearchResult(p_c, rows, diags)
