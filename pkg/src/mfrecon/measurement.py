"""Mean-field measurement matrices and their uniqueness certificates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from mfrecon.dynamics import StateVector
from mfrecon.errors import ParameterError, UnsupportedSizeError

SPARK_ENUMERATION_LIMIT = 20
RIP_COLUMN_LIMIT = 20
RIP_SPARSITY_LIMIT = 6
RANK_RTOL = 1e-10

# subsets are pushed through batched SVDs in chunks of this many
_CHUNK = 4096


@dataclass(frozen=True, eq=False)
class MeasurementMatrix:
    """A P x N matrix phi with provenance.

    ``provenance`` is ``{"kind": "gaussian", "seed": ..., "variance": ...}`` or
    ``{"kind": "explicit"}``.
    """

    phi: np.ndarray
    provenance: dict = field(default_factory=lambda: {"kind": "explicit"})
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float)
        if phi.ndim != 2 or phi.shape[0] < 1:
            raise ParameterError(f"measurement matrix must be 2-D with P >= 1, got {phi.shape}")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    @property
    def P(self) -> int:
        return self.phi.shape[0]

    @property
    def N(self) -> int:
        return self.phi.shape[1]

    @property
    def compressed(self) -> bool:
        return self.P < self.N


def gaussian_matrix(P: int, N: int, seed=None) -> MeasurementMatrix:
    """I.i.d. N(0, 1/P) entries."""
    if not 1 <= P < N:
        raise ParameterError(f"need 1 <= P < N, got P={P}, N={N}")
    rng = np.random.default_rng(seed)
    phi = rng.standard_normal((P, N)) / math.sqrt(P)
    prov = {"kind": "gaussian", "seed": seed if isinstance(seed, (int, type(None))) else str(seed),
            "variance": 1.0 / P}
    return MeasurementMatrix(phi, prov)


def measure(m: MeasurementMatrix, x) -> np.ndarray:
    """y = phi x for one state or a batch of column states."""
    if isinstance(x, StateVector):
        x = x.values
    x = np.asarray(x, dtype=float)
    if x.shape[0] != m.N:
        raise ParameterError(f"state length {x.shape[0]} does not match N={m.N}")
    return m.phi @ x


def _rank_tol(m: MeasurementMatrix) -> float:
    key = "rank_tol"
    if key not in m._cache:
        smax = np.linalg.norm(m.phi, 2) if m.phi.size else 0.0
        m._cache[key] = RANK_RTOL * smax
    return m._cache[key]


def _subset_singular_values(phi: np.ndarray, k: int):
    """Yield singular values of every k-column submatrix, chunked, as (chunk, min(P,k))."""
    n = phi.shape[1]
    it = combinations(range(n), k)
    while True:
        idx = np.array(list(_take(it, _CHUNK)), dtype=int)
        if idx.size == 0:
            return
        sub = phi[:, idx].transpose(1, 0, 2)  # (chunk, P, k)
        yield np.linalg.svd(sub, compute_uv=False)


def _take(it, n):
    for _ in range(n):
        try:
            yield next(it)
        except StopIteration:
            return


def spark(m: MeasurementMatrix, limit: int = SPARK_ENUMERATION_LIMIT) -> int:
    """Size of the smallest linearly dependent column subset (P + 1 if none up to P).

    Subsets are enumerated by increasing size; a subset counts as dependent when
    its numerical rank, with singular values cut at 1e-10 times the largest
    singular value of phi, falls below its size.
    """
    if m.N > limit:
        raise UnsupportedSizeError(f"spark enumeration limited to N <= {limit}, got N={m.N}")
    if "spark" in m._cache:
        return m._cache["spark"]
    tol = _rank_tol(m)
    result = m.P + 1
    for k in range(1, min(m.P, m.N) + 1):
        if any((sv[:, -1] <= tol).any() for sv in _subset_singular_values(m.phi, k)):
            result = k
            break
    m._cache["spark"] = result
    return result


def is_full_spark(m: MeasurementMatrix, limit: int = SPARK_ENUMERATION_LIMIT) -> bool:
    """True iff every P x P submatrix is invertible, i.e. spark = P + 1."""
    return spark(m, limit) == m.P + 1


def rip_constant_exact(
    m: MeasurementMatrix,
    s: int,
    column_limit: int = RIP_COLUMN_LIMIT,
    sparsity_limit: int = RIP_SPARSITY_LIMIT,
) -> float:
    """Restricted isometry constant delta_s by enumerating all s-column submatrices."""
    if s < 1:
        raise ParameterError("sparsity must be >= 1")
    if m.N > column_limit or s > sparsity_limit:
        raise UnsupportedSizeError(
            f"RIP enumeration limited to N <= {column_limit}, s <= {sparsity_limit}; got N={m.N}, s={s}"
        )
    s = min(s, m.N)
    key = ("rip", s)
    if key in m._cache:
        return m._cache[key]
    delta = 0.0
    for sv in _subset_singular_values(m.phi, s):
        smax2 = sv[:, 0] ** 2
        # fewer rows than columns leaves a zero singular value unreported
        smin2 = sv[:, -1] ** 2 if s <= m.P else np.zeros_like(smax2)
        delta = max(delta, float(np.max(smax2 - 1.0)), float(np.max(1.0 - smin2)))
    m._cache[key] = delta
    return delta


def wtrc_check(P: int, delta: int) -> bool:
    """Measurement count condition P > 2 Delta + 1 for full-spark matrices."""
    if P < 1 or delta < 0:
        raise ParameterError("need P >= 1 and delta >= 0")
    return P > 2 * delta + 1


def strc_gaussian_bound(N: int, P: int, c1: float = 1.0) -> float:
    """c1 P / log(N / P); compare against Delta + 1."""
    if not 1 <= P < N:
        raise ParameterError(f"need 1 <= P < N, got P={P}, N={N}")
    if c1 <= 0:
        raise ParameterError("c1 must be positive")
    return c1 * P / math.log(N / P)


def er_degree_bound(N: int, p: float) -> float:
    """High-probability bound Np + sqrt(2 Np log N) on the ER maximum degree."""
    return N * p + math.sqrt(2.0 * N * p * math.log(N))


def er_bound_check(N: int, p: float, P: int, c1: float = 1.0) -> bool:
    """Np + sqrt(2 Np log N) + 1 < c1 P / log(N / P)."""
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"edge probability must lie in [0, 1], got {p}")
    return er_degree_bound(N, p) + 1.0 < strc_gaussian_bound(N, P, c1)


@dataclass
class MeanFieldSet:
    """Measurements y^q(t), keyed by (q, t), plus which matrix measured each q.

    ``matrix_ids`` maps q to a key of ``matrices``; q absent from it uses
    ``default_matrix``.
    """

    records: dict = field(default_factory=dict)
    matrices: dict = field(default_factory=dict)
    matrix_ids: dict = field(default_factory=dict)
    default_matrix: str = "phi"

    def matrix_for(self, q: int) -> MeasurementMatrix:
        return self.matrices[self.matrix_ids.get(q, self.default_matrix)]

    def add(self, q: int, t: int, y) -> None:
        y = np.asarray(y, dtype=float)
        P = self.matrix_for(q).P
        if y.shape != (P,):
            raise ParameterError(f"record ({q},{t}) has length {y.shape}, expected {P}")
        self.records[(q, t)] = y

    def times(self) -> list[int]:
        return sorted({t for _, t in self.records})

    def pinches(self) -> list[int]:
        return sorted({q for q, _ in self.records})


def measure_family(states: np.ndarray, matrices, matrix_ids=None, times=None) -> MeanFieldSet:
    """Measure a pinched family ``states[t, i, q-1]`` into a MeanFieldSet.

    ``matrices`` is a single MeasurementMatrix shared by all q, or a dict of
    named matrices used according to ``matrix_ids``.
    """
    if isinstance(matrices, MeasurementMatrix):
        matrices = {"phi": matrices}
    mf = MeanFieldSet(matrices=dict(matrices), matrix_ids=dict(matrix_ids or {}),
                      default_matrix=next(iter(matrices)))
    horizon, _, n_q = states.shape[0] - 1, states.shape[1], states.shape[2]
    times = range(horizon + 1) if times is None else times
    for key, m in mf.matrices.items():
        qs = [q for q in range(1, n_q + 1) if mf.matrix_ids.get(q, mf.default_matrix) == key]
        if not qs:
            continue
        cols = np.array(qs) - 1
        for t in times:
            ys = m.phi @ states[t][:, cols]
            for k, q in enumerate(qs):
                mf.records[(q, t)] = ys[:, k].copy()
    return mf
