"""Per-node dynamics identification from (recovered) pinched trajectories.

Two routes are provided. The oracle route fits each node on a dictionary known
to contain its update rule, by plain least squares on the stacked dictionary
matrix. The library route runs sequentially thresholded least squares over
the affine library ``{1, x_1, ..., x_N}`` shared by all nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from mfrecon.dynamics import Coupling, IsolatedMap, NetworkSystem, Trajectory
from mfrecon.errors import ParameterError, RankDeficiencyError


@dataclass(frozen=True)
class Term:
    """A basis function of the full state; ``func`` maps ``(rows, n) -> (rows,)``."""

    name: str
    func: Callable[[np.ndarray], np.ndarray]

    def __call__(self, states: np.ndarray) -> np.ndarray:
        return self.func(np.atleast_2d(states))


def constant() -> Term:
    return Term("1", lambda X: np.ones(X.shape[0]))


def linear(j: int) -> Term:
    return Term(f"x{j}", lambda X: X[:, j - 1])


def square(i: int) -> Term:
    return Term(f"x{i}^2", lambda X: X[:, i - 1] ** 2)


def product(i: int, j: int) -> Term:
    return Term(f"x{i}*x{j}", lambda X: X[:, i - 1] * X[:, j - 1])


def difference(j: int, i: int) -> Term:
    return Term(f"x{j}-x{i}", lambda X: X[:, j - 1] - X[:, i - 1])


def sine_difference(j: int, i: int) -> Term:
    return Term(f"sin(x{j}-x{i})", lambda X: np.sin(X[:, j - 1] - X[:, i - 1]))


def coupling_sum(i: int, neighbors: Sequence[int]) -> Term:
    """``sum_j (x_j - x_i)`` over the given in-neighbours of ``i``."""
    cols = np.asarray(neighbors, dtype=int) - 1
    return Term(f"sum(x_j-x{i})", lambda X: X[:, cols].sum(axis=1) - len(cols) * X[:, i - 1])


Dictionary = Mapping[int, Sequence[Term]]


def oracle_dictionary(sys: NetworkSystem) -> tuple[dict, dict]:
    """Exact dictionary and true coefficients for a built-in system.

    Logistic nodes get ``x_i, x_i^2`` (coefficients ``r, -r``), linear nodes
    ``x_i``; each in-neighbour j adds ``x_j - x_i`` or ``sin(x_j - x_i)`` with
    coefficient ``sign * alpha_ij``.
    """
    if not isinstance(sys.isolated, IsolatedMap) or not isinstance(sys.coupling, Coupling):
        raise ParameterError("oracle dictionaries exist only for built-in maps")
    terms, coefs = {}, {}
    w = sys.coupling.weights
    pair_term = difference if sys.coupling.kind == "diffusive" else sine_difference
    for i in range(1, sys.n + 1):
        r = sys.isolated.rates[i - 1]
        if sys.isolated.kind == "logistic":
            t, c = [linear(i), square(i)], [r, -r]
        else:
            t, c = [linear(i)], [r]
        for j in np.flatnonzero(sys.graph.adjacency[i - 1]) + 1:
            t.append(pair_term(int(j), i))
            c.append(sys.coupling.sign * w[i - 1, j - 1])
        terms[i] = t
        coefs[i] = np.array(c)
    return terms, coefs


@dataclass
class DictionaryMatrix:
    Psi: np.ndarray
    rows: list  # (q, t) per row, q-major
    node: int
    term_names: list = field(default_factory=list)

    @property
    def n_terms(self) -> int:
        return self.Psi.shape[1]


def _traj_states(tr) -> tuple[int, np.ndarray]:
    if isinstance(tr, Trajectory):
        return tr.pinch_index, tr.states
    q, states = tr
    return int(q), np.asarray(states, dtype=float)


def build_dictionary_matrix(dictionary: Dictionary, node: int, trajs, horizon: int) -> DictionaryMatrix:
    """Rows ``(psi^1(x^q(t)), ..., psi^s(x^q(t)))`` for each trajectory and ``t < horizon``.

    ``trajs`` holds Trajectory objects or ``(q, states)`` pairs.
    """
    if node not in dictionary or len(dictionary[node]) < 1:
        raise ParameterError(f"no dictionary terms for node {node}")
    terms = dictionary[node]
    blocks, rows = [], []
    for tr in trajs:
        q, states = _traj_states(tr)
        if states.shape[0] < horizon:
            raise ParameterError(f"trajectory {q} has {states.shape[0]} states, need {horizon}")
        X = states[:horizon]
        blocks.append(np.column_stack([term(X) for term in terms]) if horizon else np.empty((0, len(terms))))
        rows.extend((q, t) for t in range(horizon))
    Psi = np.vstack(blocks) if blocks else np.empty((0, len(terms)))
    return DictionaryMatrix(Psi, rows, node, [t.name for t in terms])


def stack_targets(node: int, trajs, horizon: int) -> np.ndarray:
    """``x_node^q(t + 1)`` for the same (q, t) rows as the dictionary matrix."""
    out = []
    for tr in trajs:
        q, states = _traj_states(tr)
        if states.shape[0] < horizon + 1:
            raise ParameterError(f"trajectory {q} has {states.shape[0]} states, need {horizon + 1}")
        out.append(states[1:horizon + 1, node - 1])
    return np.concatenate(out) if out else np.empty(0)


def numerical_rank(A: np.ndarray) -> int:
    if A.size == 0:
        return 0
    sv = np.linalg.svd(A, compute_uv=False)
    return int(np.count_nonzero(sv > A.shape[1] * sv[0] * 1e-12)) if sv[0] > 0 else 0


def fit_coefficients(dm: DictionaryMatrix, targets) -> np.ndarray:
    """Least-squares coefficients; the dictionary matrix must have full column rank."""
    targets = np.asarray(targets, dtype=float)
    if targets.shape != (dm.Psi.shape[0],):
        raise ParameterError(f"need {dm.Psi.shape[0]} targets, got {targets.shape}")
    if not (np.all(np.isfinite(dm.Psi)) and np.all(np.isfinite(targets))):
        raise ParameterError(f"node {dm.node}: trajectories contain non-finite values")
    rank = numerical_rank(dm.Psi)
    if rank < dm.n_terms:
        raise RankDeficiencyError(
            f"node {dm.node}: dictionary matrix has rank {rank} < {dm.n_terms} terms; "
            "coefficients are not identifiable (dictionary columns must be independent "
            "over the supplied trajectories)"
        )
    return np.linalg.lstsq(dm.Psi, targets, rcond=None)[0]


def identify_all(dictionary: Dictionary, trajs, horizon: int) -> dict:
    """Fit every node of ``dictionary``; returns ``{node: coefficients}``."""
    return {
        i: fit_coefficients(build_dictionary_matrix(dictionary, i, trajs, horizon), stack_targets(i, trajs, horizon))
        for i in sorted(dictionary)
    }


# library regression ---------------------------------------------------------


def linear_library(states: np.ndarray) -> tuple[np.ndarray, list]:
    """Features ``[1, x_1, ..., x_N]`` for state rows of shape ``(rows, N)``."""
    states = np.atleast_2d(states)
    names = ["1"] + [f"x{j}" for j in range(1, states.shape[1] + 1)]
    return np.hstack([np.ones((states.shape[0], 1)), states]), names


def regression_pairs(family: np.ndarray, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """Stack ``(x^q(t), x^q(t + 1))`` for ``t < horizon`` from ``family[t, i, q]``.

    Returns state rows and target rows, each ``(n_q * horizon, N)``, ordered by t
    then q.
    """
    if family.shape[0] < horizon + 1:
        raise ParameterError(f"need {horizon + 1} time slices, have {family.shape[0]}")
    X = np.concatenate([family[t].T for t in range(horizon)])
    Y = np.concatenate([family[t + 1].T for t in range(horizon)])
    return X, Y


@dataclass
class SparseRegressionResult:
    coefficients: np.ndarray  # (n_targets, n_features)
    sweeps: int
    converged: bool
    residual: float
    feature_names: list = field(default_factory=list)


def sparse_regression(features: np.ndarray, targets: np.ndarray, threshold: float = 0.05,
                      max_sweeps: int = 20, feature_names=None) -> SparseRegressionResult:
    """Sequentially thresholded least squares.

    Fit all targets by least squares, zero every coefficient with magnitude
    below ``threshold``, refit each target on its surviving features, and
    repeat until the active sets stop changing.
    """
    if threshold < 0:
        raise ParameterError("threshold must be >= 0")
    Theta = np.asarray(features, dtype=float)
    Y = np.asarray(targets, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Theta.shape[0] != Y.shape[0]:
        raise ParameterError("features and targets need the same number of rows")
    Xi = np.linalg.lstsq(Theta, Y, rcond=None)[0]
    active = np.abs(Xi) >= threshold
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        Xi = np.where(active, Xi, 0.0)
        for k in range(Y.shape[1]):
            cols = np.flatnonzero(active[:, k])
            if cols.size:
                Xi[cols, k] = np.linalg.lstsq(Theta[:, cols], Y[:, k], rcond=None)[0]
        new_active = active & (np.abs(Xi) >= threshold)
        if np.array_equal(new_active, active):
            converged = True
            break
        active = new_active
    Xi = np.where(active, Xi, 0.0)
    residual = float(np.linalg.norm(Theta @ Xi - Y))
    return SparseRegressionResult(Xi.T, sweeps, converged, residual, list(feature_names or []))


def true_linear_coefficients(sys: NetworkSystem) -> np.ndarray:
    """Exact ``(N, N + 1)`` coefficients of a linear-map, diffusive system over ``[1, x_1..x_N]``."""
    if not (isinstance(sys.isolated, IsolatedMap) and sys.isolated.kind == "linear"
            and isinstance(sys.coupling, Coupling) and sys.coupling.kind == "diffusive"):
        raise ParameterError("only linear maps with diffusive coupling are linear in the state")
    w = sys.coupling.weights
    s = sys.coupling.sign
    C = s * w + np.diag(sys.isolated.rates - s * w.sum(axis=1))
    return np.hstack([np.zeros((sys.n, 1)), C])


def mse(true_vals, est_vals) -> float:
    a = np.asarray(true_vals, dtype=float).ravel()
    b = np.asarray(est_vals, dtype=float).ravel()
    if a.shape != b.shape:
        raise ParameterError(f"length mismatch {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ParameterError("mse of empty vectors")
    return float(np.mean((a - b) ** 2))
