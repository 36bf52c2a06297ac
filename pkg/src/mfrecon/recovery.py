"""Sparse recovery: exhaustive l0 search, basis pursuit and its noisy variant.

Basis pursuit is solved by ADMM on the splitting ``x = z`` with ``x`` kept on
the affine set ``{phi x = y}`` and ``z`` carrying the l1 norm. The ADMM
iterate ``z`` is exactly sparse, so every few sweeps its support is refit by
least squares and checked against a dual certificate: a vector ``lam`` with
``phi_S^T lam = sign(x_S)`` and ``|phi^T lam| <= 1``. A certified column is
optimal to within ``objective_tol`` and leaves the batch. An LP reformulation
solved by HiGHS is available as an independent backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
import scipy.linalg
from scipy.optimize import linprog

from mfrecon.errors import ParameterError, UnsupportedSizeError
from mfrecon.measurement import MeasurementMatrix

CONVERGED = "converged"
MAX_ITER = "max_iter"
INFEASIBLE = "infeasible"
NON_UNIQUE = "non-unique"

BACKENDS = ("admm", "lp", "auto")


@dataclass(frozen=True)
class RecoveryConfig:
    """Solver tolerances and options.

    ``feasibility_tol`` bounds ``||phi x - y||_2`` relative to ``max(1, ||y||_2)``.
    ``backend="auto"`` runs ADMM for at most ``auto_switch`` sweeps and hands
    uncertified columns to the LP backend.
    """

    feasibility_tol: float = 1e-10
    objective_tol: float = 1e-8
    max_iterations: int = 100_000
    support_threshold: float = 1e-9
    backend: str = "admm"
    check_every: int = 10
    certificate_tol: float = 1e-9
    auto_switch: int = 2000

    def __post_init__(self):
        for name in ("feasibility_tol", "objective_tol", "certificate_tol"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")
        if self.support_threshold < 0:
            raise ParameterError("support_threshold must be >= 0")
        if self.max_iterations < 1 or self.check_every < 1:
            raise ParameterError("iteration counts must be >= 1")
        if self.backend not in BACKENDS:
            raise ParameterError(f"backend must be one of {BACKENDS}")


@dataclass
class RecoveryResult:
    x_hat: np.ndarray
    support: set
    iterations: int
    residual: float
    status: str
    objective: float = math.nan
    gap: float = math.nan
    backend: str = ""
    minimizers: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    @property
    def unique(self) -> bool:
        return self.status == CONVERGED and len(self.minimizers) <= 1

    def diagnostics(self) -> dict:
        return {
            "iterations": self.iterations,
            "residual": self.residual,
            "status": self.status,
            "objective": self.objective,
            "gap": self.gap,
            "backend": self.backend,
        }


def threshold_support(x, tau: float) -> set[int]:
    """1-based indices with ``|x_i| > tau`` (strict)."""
    if tau < 0:
        raise ParameterError("threshold must be >= 0")
    return {int(i) + 1 for i in np.flatnonzero(np.abs(np.asarray(x)) > tau)}


def _result(phi, y, x, iterations, status, cfg, backend, gap=math.nan, minimizers=None):
    return RecoveryResult(
        x_hat=x,
        support=threshold_support(x, cfg.support_threshold),
        iterations=iterations,
        residual=float(np.linalg.norm(phi @ x - y)),
        status=status,
        objective=float(np.abs(x).sum()),
        gap=gap,
        backend=backend,
        minimizers=minimizers or [],
    )


def _feas_tol(cfg: RecoveryConfig, y: np.ndarray) -> float:
    return cfg.feasibility_tol * max(1.0, float(np.linalg.norm(y)))


# l0 ---------------------------------------------------------------------------

L0_COLUMN_LIMIT = 20


def l0_oracle(m: MeasurementMatrix, y, s_max: int, cfg: RecoveryConfig | None = None,
              column_limit: int = L0_COLUMN_LIMIT) -> RecoveryResult:
    """Sparsest solution of ``phi x = y`` by exhaustive support search.

    Supports of size 0, 1, ..., s_max are tried in order; a support is feasible
    when its least-squares fit leaves a residual within ``feasibility_tol``.
    All feasible supports of the minimal size are returned in ``minimizers``;
    more than one sets status ``"non-unique"``.
    """
    cfg = cfg or RecoveryConfig()
    phi = m.phi
    y = np.asarray(y, dtype=float)
    if y.shape != (m.P,):
        raise ParameterError(f"y must have length {m.P}")
    if m.N > column_limit:
        raise UnsupportedSizeError(f"l0 oracle limited to N <= {column_limit}, got {m.N}")
    tol = _feas_tol(cfg, y)
    if np.linalg.norm(y) <= tol:
        x = np.zeros(m.N)
        return _result(phi, y, x, 0, CONVERGED, cfg, "l0", minimizers=[x])
    tried = 0
    for k in range(1, min(s_max, m.N) + 1):
        subsets = np.array(list(combinations(range(m.N), k)), dtype=int)
        tried += len(subsets)
        sub = phi[:, subsets].transpose(1, 0, 2)  # (count, P, k)
        coef = np.linalg.pinv(sub) @ y  # (count, k)
        resid = np.linalg.norm(np.einsum("cpk,ck->cp", sub, coef) - y, axis=1)
        hits = np.flatnonzero(resid <= tol)
        if hits.size:
            minimizers = []
            for h in hits:
                x = np.zeros(m.N)
                x[subsets[h]] = coef[h]
                minimizers.append(x)
            status = CONVERGED if len(minimizers) == 1 else NON_UNIQUE
            return _result(phi, y, minimizers[0], tried, status, cfg, "l0", minimizers=minimizers)
    return _result(phi, y, np.zeros(m.N), tried, INFEASIBLE, cfg, "l0")


# basis pursuit ----------------------------------------------------------------


def _soft(v, thresh):
    return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)


def _certify(phi, y, z, lam0, tol, cfg, prune=1e-12):
    """Refit the support of ``z`` and look for an l1 optimality certificate.

    Returns ``(x, gap)`` or None.
    """
    P, N = phi.shape
    S = np.flatnonzero(z)
    if S.size == 0:
        return (np.zeros(N), 0.0) if np.linalg.norm(y) <= tol else None
    if S.size > P:
        return None
    xs = np.linalg.lstsq(phi[:, S], y, rcond=None)[0]
    keep = np.abs(xs) > prune * np.abs(xs).max()
    if not keep.all():
        S = S[keep]
        xs = np.linalg.lstsq(phi[:, S], y, rcond=None)[0]
    B = phi[:, S]
    if np.linalg.norm(B @ xs - y) > tol:
        return None
    s = np.sign(xs)
    if np.any(s != np.sign(z[S])):
        return None
    try:
        corr = np.linalg.solve(B.T @ B, s - B.T @ lam0)
    except np.linalg.LinAlgError:
        return None
    lam = lam0 + B @ corr
    g = np.abs(phi.T @ lam).max()
    if g > 1.0 + cfg.certificate_tol:
        return None
    primal = float(np.abs(xs).sum())
    gap = primal - float(y @ lam) / max(1.0, g)
    if gap > cfg.objective_tol * max(1.0, primal):
        return None
    x = np.zeros(N)
    x[S] = xs
    return x, max(gap, 0.0)


def _admm_bp(phi, Y, cfg, max_iterations):
    """Batched ADMM for basis pursuit over the columns of ``Y``.

    Returns ``(X, status, iterations, gaps)``; uncertified columns carry the
    last sparse iterate and status MAX_ITER.
    """
    P, N = phi.shape
    Q = Y.shape[1]
    pinv = scipy.linalg.pinv(phi)
    Xls = pinv @ Y
    ynorm = np.linalg.norm(Y, axis=0)
    tols = cfg.feasibility_tol * np.maximum(1.0, ynorm)
    X_out = np.zeros((N, Q))
    status = [MAX_ITER] * Q
    iters = np.zeros(Q, dtype=int)
    gaps = np.full(Q, math.nan)

    lsres = np.linalg.norm(phi @ Xls - Y, axis=0)
    active = []
    for j in range(Q):
        if ynorm[j] <= tols[j]:
            status[j], gaps[j] = CONVERGED, 0.0
        elif lsres[j] > tols[j]:
            status[j] = INFEASIBLE
            X_out[:, j] = Xls[:, j]
        else:
            active.append(j)
    if not active:
        return X_out, status, iters, gaps

    idx = np.array(active)
    xls = Xls[:, idx]
    y = Y[:, idx]
    scale = np.abs(xls).max(axis=0)
    rho = 1.0 / scale
    z = _soft(xls, 1.0 / rho)
    u = np.zeros_like(z)
    mu, tau = 10.0, 2.0
    for it in range(1, max_iterations + 1):
        v = z - u
        x = v - pinv @ (phi @ v) + xls
        z_old = z
        w = x + u
        z = _soft(w, 1.0 / rho)
        u = w - z
        if it % 10 == 0:
            r = np.linalg.norm(x - z, axis=0)
            s = rho * np.linalg.norm(z - z_old, axis=0)
            up = r > mu * s
            down = s > mu * r
            rho = np.where(up, rho * tau, np.where(down, rho / tau, rho))
            u = u * np.where(up, 1.0 / tau, np.where(down, tau, 1.0))
        if it % cfg.check_every == 0 or it == max_iterations:
            lam0 = pinv.T @ (rho * u)
            done = np.zeros(idx.size, dtype=bool)
            for k, j in enumerate(idx):
                cert = _certify(phi, y[:, k], z[:, k], lam0[:, k], tols[j], cfg)
                if cert is not None:
                    X_out[:, j], gaps[j] = cert
                    status[j], iters[j] = CONVERGED, it
                    done[k] = True
            if done.any():
                keep = ~done
                idx, xls, y, z, u, rho = idx[keep], xls[:, keep], y[:, keep], z[:, keep], u[:, keep], rho[keep]
                if idx.size == 0:
                    break
    for k, j in enumerate(idx):
        X_out[:, j] = z[:, k]
        iters[j] = max_iterations
    return X_out, status, iters, gaps


def _lp_bp(phi, y, cfg):
    """Basis pursuit as an LP in (u, v) >= 0 with x = u - v, solved by HiGHS."""
    P, N = phi.shape
    tol = _feas_tol(cfg, y)
    if np.linalg.norm(y) <= tol:
        return np.zeros(N), CONVERGED, 0, 0.0
    res = linprog(
        np.ones(2 * N),
        A_eq=np.hstack([phi, -phi]),
        b_eq=y,
        bounds=(0, None),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status == 2:
        return np.linalg.lstsq(phi, y, rcond=None)[0], INFEASIBLE, int(res.nit), math.nan
    if res.x is None:
        return np.zeros(N), MAX_ITER, int(getattr(res, "nit", 0)), math.nan
    x = res.x[:N] - res.x[N:]
    lam0 = np.asarray(res.eqlin.marginals, dtype=float)
    cert = _certify(phi, y, np.where(np.abs(x) > 1e-12 * np.abs(x).max(), x, 0.0), lam0, tol, cfg)
    if cert is not None:
        return cert[0], CONVERGED, int(res.nit), cert[1]
    status = CONVERGED if res.status == 0 and np.linalg.norm(phi @ x - y) <= tol else MAX_ITER
    return x, status, int(res.nit), math.nan


def basis_pursuit_batch(m: MeasurementMatrix, Y, cfg: RecoveryConfig | None = None) -> list[RecoveryResult]:
    """Solve ``min ||x||_1 s.t. phi x = y`` for every column ``y`` of ``Y``."""
    cfg = cfg or RecoveryConfig()
    phi = m.phi
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[0] != m.P:
        raise ParameterError(f"measurements must have {m.P} rows")
    if not np.all(np.isfinite(Y)):
        raise ParameterError("measurements must be finite")
    Q = Y.shape[1]
    if cfg.backend == "lp":
        out = []
        for j in range(Q):
            x, status, nit, gap = _lp_bp(phi, Y[:, j], cfg)
            out.append(_result(phi, Y[:, j], x, nit, status, cfg, "lp", gap))
        return out
    budget = cfg.max_iterations if cfg.backend == "admm" else min(cfg.max_iterations, cfg.auto_switch)
    X, status, iters, gaps = _admm_bp(phi, Y, cfg, budget)
    out = []
    for j in range(Q):
        if status[j] == MAX_ITER and cfg.backend == "auto":
            x, st, nit, gap = _lp_bp(phi, Y[:, j], cfg)
            out.append(_result(phi, Y[:, j], x, int(iters[j]) + nit, st, cfg, "admm+lp", gap))
        else:
            out.append(_result(phi, Y[:, j], X[:, j], int(iters[j]), status[j], cfg, "admm", gaps[j]))
    return out


def basis_pursuit(m: MeasurementMatrix, y, cfg: RecoveryConfig | None = None) -> RecoveryResult:
    """Minimum-l1 solution of ``phi x = y``."""
    y = np.asarray(y, dtype=float)
    if y.shape != (m.P,):
        raise ParameterError(f"y must have length {m.P}")
    return basis_pursuit_batch(m, y[:, None], cfg)[0]


# noisy variant ------------------------------------------------------------------


def _certify_bpdn(phi, y, z, xi, cfg):
    """Closed-form optimum of ``min ||x||_1, ||phi x - y|| <= xi`` on the signed support of ``z``."""
    N = phi.shape[1]
    S = np.flatnonzero(z)
    if S.size == 0:
        return (np.zeros(N), 0.0) if np.linalg.norm(y) <= xi else None
    if S.size > phi.shape[0]:
        return None
    B = phi[:, S]
    s = np.sign(z[S])
    G = B.T @ B
    try:
        cf = scipy.linalg.cho_factor(G)
    except np.linalg.LinAlgError:
        return None
    x_ls = scipy.linalg.cho_solve(cf, B.T @ y)
    r_ls = y - B @ x_ls
    Ginv_s = scipy.linalg.cho_solve(cf, s)
    d = B @ Ginv_s
    slack = xi**2 - r_ls @ r_ls
    if slack < 0 or d @ d == 0:
        return None
    t = math.sqrt(slack / (d @ d))
    xs = x_ls - t * Ginv_s
    if np.any(np.sign(xs) != s):
        return None
    lam = (r_ls + t * d) / t
    g = np.abs(phi.T @ lam).max()
    if g > 1.0 + cfg.certificate_tol:
        return None
    primal = float(np.abs(xs).sum())
    dual = (float(y @ lam) - xi * float(np.linalg.norm(lam))) / max(1.0, g)
    gap = primal - dual
    if gap > cfg.objective_tol * max(1.0, primal):
        return None
    x = np.zeros(N)
    x[S] = xs
    return x, max(gap, 0.0)


def basis_pursuit_denoise(m: MeasurementMatrix, y, xi: float, cfg: RecoveryConfig | None = None) -> RecoveryResult:
    """``min ||x||_1`` subject to ``||phi x - y||_2 <= xi``.

    ADMM on ``x = z``, ``phi x = w`` with ``w`` projected onto the noise ball.
    A radius at or below the feasibility tolerance falls back to basis pursuit.
    """
    cfg = cfg or RecoveryConfig()
    if xi < 0:
        raise ParameterError("noise radius must be >= 0")
    y = np.asarray(y, dtype=float)
    if y.shape != (m.P,):
        raise ParameterError(f"y must have length {m.P}")
    if xi <= _feas_tol(cfg, y):
        return basis_pursuit(m, y, cfg)
    phi = m.phi
    P, N = phi.shape
    if np.linalg.norm(y) <= xi:
        return _result(phi, y, np.zeros(N), 0, CONVERGED, cfg, "admm", 0.0)
    # (I + phi^T phi)^{-1} via Woodbury
    inner = scipy.linalg.cho_factor(np.eye(P) + phi @ phi.T)

    def solve_x(rhs):
        return rhs - phi.T @ scipy.linalg.cho_solve(inner, phi @ rhs)

    x = np.linalg.lstsq(phi, y, rcond=None)[0]
    rho = 1.0 / max(np.abs(x).max(), 1e-300)
    z = _soft(x, 1.0 / rho)
    w = phi @ x
    u = np.zeros(N)
    v = np.zeros(P)
    for it in range(1, cfg.max_iterations + 1):
        x = solve_x(z - u + phi.T @ (w - v))
        z_old, w_old = z, w
        z = _soft(x + u, 1.0 / rho)
        px = phi @ x
        d = px + v - y
        nd = np.linalg.norm(d)
        w = y + (d if nd <= xi else d * (xi / nd))
        u = u + x - z
        v = v + px - w
        if it % 10 == 0:
            r = math.hypot(np.linalg.norm(x - z), np.linalg.norm(px - w))
            s = rho * math.hypot(np.linalg.norm(z - z_old), np.linalg.norm(w - w_old))
            if r > 10 * s:
                rho, u, v = rho * 2, u / 2, v / 2
            elif s > 10 * r:
                rho, u, v = rho / 2, u * 2, v * 2
        if it % cfg.check_every == 0:
            cert = _certify_bpdn(phi, y, z, xi, cfg)
            if cert is not None:
                return _result(phi, y, cert[0], it, CONVERGED, cfg, "admm", cert[1])
    return _result(phi, y, z, cfg.max_iterations, MAX_ITER, cfg, "admm")
