"""Discrete-time network maps and pinched trajectories.

The update is ``x_i' = f_i(x_i) + sum_j A_ij h_ij(x_i, x_j)``. Every function
here accepts a single state of shape ``(n,)`` or a batch of states stacked as
columns, shape ``(n, k)``; batches are how a whole pinched family is evolved
at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from mfrecon.errors import ParameterError
from mfrecon.graph import Graph

PAPER_RATES = (1.2, 2.6, 3.0, 3.8)


def _column(v: np.ndarray, x: np.ndarray) -> np.ndarray:
    return v if x.ndim == 1 else v[:, None]


@dataclass(frozen=True, eq=False)
class IsolatedMap:
    """Built-in node maps: ``logistic`` r x (1 - x) or ``linear`` r x."""

    kind: str
    rates: np.ndarray

    def __post_init__(self):
        if self.kind not in ("logistic", "linear"):
            raise ParameterError(f"unknown isolated map {self.kind!r}")
        object.__setattr__(self, "rates", np.asarray(self.rates, dtype=float))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        r = _column(self.rates, x)
        if self.kind == "logistic":
            return r * x * (1.0 - x)
        return r * x

    def params(self) -> dict:
        return {"kind": self.kind, "rates": self.rates.tolist()}


@dataclass(frozen=True, eq=False)
class CustomIsolated:
    """User-supplied elementwise node map ``func(x, node_index_array)``.

    ``declares_assumptions`` must be set to state that ``func(0) == 0`` for all
    nodes; :func:`check_assumptions` spot-checks the claim.
    """

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    declares_assumptions: bool = False
    name: str = "custom"

    def __call__(self, x: np.ndarray) -> np.ndarray:
        nodes = np.arange(x.shape[0])
        return np.asarray(self.func(x, _column(nodes, x)), dtype=float)

    def params(self) -> dict:
        return {"kind": self.name}


@dataclass(frozen=True, eq=False)
class Coupling:
    """Built-in edge terms, weighted by ``weights[i, j] = A_ij * alpha_ij``.

    ``diffusive`` is ``sign * alpha (x_j - x_i)`` and ``sine`` is
    ``sign * alpha sin(x_j - x_i)``; ``sign=-1`` gives the ``alpha (x_i - x_j)``
    orientation.
    """

    kind: str
    weights: np.ndarray
    sign: int = 1

    def __post_init__(self):
        if self.kind not in ("diffusive", "sine"):
            raise ParameterError(f"unknown coupling {self.kind!r}")
        if self.sign not in (1, -1):
            raise ParameterError("coupling sign must be +1 or -1")
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))

    def pair(self, xi, xj):
        """Unweighted ``h(x_i, x_j)`` without the edge weight."""
        d = np.subtract(xj, xi)
        return self.sign * (d if self.kind == "diffusive" else np.sin(d))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        w = self.weights
        if self.kind == "diffusive":
            out = w @ x - _column(w.sum(axis=1), x) * x
        else:
            # sin(xj - xi) = sin xj cos xi - cos xj sin xi keeps this a matmul
            out = np.cos(x) * (w @ np.sin(x)) - np.sin(x) * (w @ np.cos(x))
        return self.sign * out

    def params(self) -> dict:
        return {"kind": self.kind, "sign": self.sign}


@dataclass(frozen=True, eq=False)
class CustomCoupling:
    """User-supplied elementwise pair function ``func(x_i, x_j)`` times ``weights``."""

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    weights: np.ndarray
    declares_assumptions: bool = False
    name: str = "custom"

    def pair(self, xi, xj):
        return self.func(xi, xj)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        w = np.asarray(self.weights, dtype=float)
        if x.ndim == 1:
            h = self.func(x[:, None], x[None, :])
            return (w * h).sum(axis=1)
        h = self.func(x[:, None, :], x[None, :, :])
        return np.einsum("ij,ijk->ik", w, h)

    def params(self) -> dict:
        return {"kind": self.name}


@dataclass(frozen=True, eq=False)
class NetworkSystem:
    graph: Graph
    isolated: IsolatedMap | CustomIsolated
    coupling: Coupling | CustomCoupling
    alpha: np.ndarray = field(default=None)
    symmetric_weights: bool = True

    def __post_init__(self):
        n = self.graph.n
        w = np.asarray(self.coupling.weights, dtype=float)
        if w.shape != (n, n):
            raise ParameterError(f"coupling weights must be {n}x{n}")
        a = self.graph.adjacency
        if (w[~a] != 0).any():
            raise ParameterError("coupling weights must vanish off the edge set")
        if (w[a] <= 0).any():
            raise ParameterError("every edge needs a strictly positive coupling weight")
        for part in (self.isolated, self.coupling):
            if hasattr(part, "declares_assumptions") and not part.declares_assumptions:
                raise ParameterError(
                    f"custom map {part.name!r} must declare f(0)=0 / h(0,0)=0, h(0,v)!=0 compliance"
                )
        if isinstance(self.isolated, IsolatedMap) and self.isolated.rates.shape != (n,):
            raise ParameterError(f"need {n} rates")

    @property
    def n(self) -> int:
        return self.graph.n

    def params(self) -> dict:
        w = self.coupling.weights
        rows, cols = np.nonzero(self.graph.adjacency)
        return {
            "n": self.n,
            "directed": self.graph.directed,
            "isolated": self.isolated.params(),
            "coupling": self.coupling.params(),
            "symmetric_weights": self.symmetric_weights,
            "edges": [[int(i) + 1, int(j) + 1, float(w[i, j])] for i, j in zip(rows, cols)],
        }


def system_from_params(params: dict) -> NetworkSystem:
    """Rebuild a built-in system from the dictionary produced by ``params()``."""
    n = int(params["n"])
    a = np.zeros((n, n), dtype=bool)
    w = np.zeros((n, n))
    for i, j, v in params["edges"]:
        a[i - 1, j - 1] = True
        w[i - 1, j - 1] = v
    g = Graph(a, directed=bool(params.get("directed", True)))
    iso, cpl = params["isolated"], params["coupling"]
    if iso["kind"] not in ("logistic", "linear") or cpl["kind"] not in ("diffusive", "sine"):
        raise ParameterError("only built-in maps can be rebuilt from parameters")
    return NetworkSystem(g, IsolatedMap(iso["kind"], iso["rates"]), Coupling(cpl["kind"], w, int(cpl["sign"])),
                         symmetric_weights=bool(params.get("symmetric_weights", True)))


def sample_alpha(n: int, rng: np.random.Generator, symmetric: bool = True) -> np.ndarray:
    """Uniform [0, 1) weights; exact zeros are redrawn so every edge stays active."""
    alpha = rng.random((n, n))
    while (zeros := alpha == 0.0).any():
        alpha[zeros] = rng.random(int(zeros.sum()))
    if symmetric:
        upper = np.triu(alpha, k=1)
        alpha = upper + upper.T
    np.fill_diagonal(alpha, 0.0)
    return alpha


def random_system(
    graph: Graph,
    isolated: str = "logistic",
    coupling: str = "diffusive",
    sign: int = -1,
    rates: Sequence[float] = PAPER_RATES,
    symmetric: bool = True,
    seed=None,
) -> NetworkSystem:
    """Sample per-node rates from ``rates`` and per-edge weights from U[0, 1)."""
    rng = np.random.default_rng(seed)
    r = rng.choice(np.asarray(rates, dtype=float), size=graph.n)
    alpha = sample_alpha(graph.n, rng, symmetric=symmetric)
    weights = np.where(graph.adjacency, alpha, 0.0)
    return NetworkSystem(
        graph,
        IsolatedMap(isolated, r),
        Coupling(coupling, weights, sign=sign),
        alpha=alpha,
        symmetric_weights=symmetric,
    )


def check_assumptions(sys: NetworkSystem, seed=0, n_samples: int = 8, scale: float = 1e-3) -> None:
    """Spot-check f_i(0) = 0, h_ij(0, 0) = 0 and h_ij(0, v) != 0 for small v.

    Raises ParameterError on the first violation found.
    """
    rng = np.random.default_rng(seed)
    n = sys.n
    if np.any(sys.isolated(np.zeros(n)) != 0):
        raise ParameterError("isolated map does not fix the origin")
    rows, cols = np.nonzero(sys.graph.adjacency)
    if rows.size == 0:
        return
    if np.any(np.asarray(sys.coupling.pair(np.zeros(rows.size), np.zeros(rows.size))) != 0):
        raise ParameterError("coupling does not vanish at (0, 0)")
    for _ in range(n_samples):
        v = rng.uniform(0.1, 1.0, rows.size) * scale * rng.choice((-1.0, 1.0), rows.size)
        h = np.asarray(sys.coupling.pair(np.zeros(rows.size), v))
        if np.any(h == 0):
            k = int(np.flatnonzero(h == 0)[0])
            raise ParameterError(f"h({rows[k] + 1},{cols[k] + 1})(0, v) vanishes for v={v[k]}")


@dataclass(frozen=True, eq=False)
class StateVector:
    values: np.ndarray
    pinch_index: int | None = None
    time: int = 0

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    def __len__(self):
        return self.values.shape[0]

    @property
    def support(self) -> set[int]:
        return {int(i) + 1 for i in np.flatnonzero(self.values)}


def pinch_initial(n: int, q: int, eps: float) -> StateVector:
    """State that is zero except for ``eps`` at vertex ``q``."""
    if not 1 <= q <= n:
        raise ParameterError(f"vertex {q} out of range 1..{n}")
    if eps == 0 or not np.isfinite(eps):
        raise ParameterError("pinch magnitude must be finite and nonzero")
    x = np.zeros(n)
    x[q - 1] = eps
    return StateVector(x, pinch_index=q, time=0)


def step(sys: NetworkSystem, x):
    """One application of the network map to a state, a StateVector, or a batch."""
    if isinstance(x, StateVector):
        return StateVector(step(sys, x.values), x.pinch_index, x.time + 1)
    x = np.asarray(x, dtype=float)
    if x.shape[0] != sys.n:
        raise ParameterError(f"state length {x.shape[0]} does not match system size {sys.n}")
    return sys.isolated(x) + sys.coupling(x)


def evolve(sys: NetworkSystem, x0: np.ndarray, horizon: int) -> np.ndarray:
    """Iterate ``horizon`` steps; returns shape ``(horizon + 1,) + x0.shape``."""
    out = np.empty((horizon + 1,) + np.shape(x0))
    out[0] = x0
    for t in range(horizon):
        out[t + 1] = step(sys, out[t])
    return out


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: np.ndarray  # (T + 1, n)
    pinch_index: int
    eps: float

    @property
    def horizon(self) -> int:
        return self.states.shape[0] - 1

    def state(self, t: int) -> StateVector:
        return StateVector(self.states[t], self.pinch_index, t)


def sample_pinch_magnitudes(n: int, low: float = 0.5, high: float = 1.0, seed=None) -> np.ndarray:
    """Uniform [low, high) magnitudes; zero draws are rejected."""
    rng = np.random.default_rng(seed)
    eps = rng.uniform(low, high, n)
    while (bad := eps == 0).any():
        eps[bad] = rng.uniform(low, high, int(bad.sum()))
    return eps


def pinched_states(sys: NetworkSystem, eps, horizon: int) -> np.ndarray:
    """All pinched trajectories at once, shape ``(horizon + 1, n, n)``.

    Entry ``[t, i, q-1]`` is ``x_i^q(t)``.
    """
    eps = np.asarray(eps, dtype=float)
    if eps.shape != (sys.n,):
        raise ParameterError(f"need {sys.n} pinch magnitudes")
    if horizon < 0:
        raise ParameterError("horizon must be >= 0")
    if np.any(eps == 0) or not np.all(np.isfinite(eps)):
        raise ParameterError("pinch magnitudes must be finite and nonzero")
    return evolve(sys, np.diag(eps), horizon)


def simulate_pinched_family(sys: NetworkSystem, eps, horizon: int) -> list[Trajectory]:
    """One trajectory per pinched vertex, each of length ``horizon + 1``."""
    states = pinched_states(sys, eps, horizon)
    return [
        Trajectory(np.ascontiguousarray(states[:, :, q]), q + 1, float(eps[q]))
        for q in range(sys.n)
    ]


def family_array(trajs: Sequence[Trajectory]) -> np.ndarray:
    """Stack trajectories back into ``(T + 1, n, len(trajs))``."""
    return np.stack([tr.states for tr in trajs], axis=2)
