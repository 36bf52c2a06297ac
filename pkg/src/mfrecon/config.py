"""Declarative experiment configuration.

A config is a JSON object with ``schema_version``; unknown keys are rejected.
Profiles supply defaults per experiment and anything in the document
overrides them.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from mfrecon.dynamics import PAPER_RATES
from mfrecon.errors import ParameterError
from mfrecon.recovery import RecoveryConfig

SCHEMA_VERSION = 1
EXPERIMENTS = ("exp1", "exp2", "exp3", "custom")
PROFILES = ("smoke", "paper")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "custom"
    profile: str = "smoke"
    schema_version: int = SCHEMA_VERSION
    n: int = 200
    regime: str = "supercritical"  # p = (ln N / N)(1 - eps); "connected" uses 1 + eps; "both" for sweeps
    eps_values: tuple = (0.5,)
    edge_probability: float | None = None  # overrides the regime formula when set
    directed: bool = False
    dynamics: str = "logistic"
    rates: tuple = PAPER_RATES
    coupling: str = "diffusive"
    coupling_sign: int = -1
    symmetric_weights: bool = True
    pinch_range: tuple = (0.5, 1.0)
    p_values: tuple | None = None
    p_fraction: float | None = None
    p_min: int | None = None
    p_max: int | None = None
    p_step: int | None = None  # default N // 100
    taus: tuple = (1e-9,)
    horizon: int = 1
    seed: int = 0
    c1: float = 1.0
    repeats: int = 1
    mcc_target: float = 0.99
    matrix_schedule: str = "nested"
    stop_at_pc: bool = False
    regression_threshold: float = 0.05
    solver: dict = field(default_factory=dict)
    workers: int | None = None

    def __post_init__(self):
        checks = [
            (self.schema_version == SCHEMA_VERSION, f"schema_version must be {SCHEMA_VERSION}"),
            (self.experiment in EXPERIMENTS, f"experiment must be one of {EXPERIMENTS}"),
            (self.profile in PROFILES, f"profile must be one of {PROFILES}"),
            (self.n >= 2, "n must be >= 2"),
            (self.regime in ("supercritical", "connected", "both"), "regime must be supercritical, connected or both"),
            (len(self.eps_values) > 0 and all(0 < e < 1 for e in self.eps_values), "eps_values must be non-empty, in (0, 1)"),
            (self.edge_probability is None or 0 <= self.edge_probability <= 1, "edge_probability must lie in [0, 1]"),
            (self.dynamics in ("logistic", "linear"), "dynamics must be logistic or linear"),
            (len(self.rates) > 0, "rates must be non-empty"),
            (self.coupling in ("diffusive", "sine"), "coupling must be diffusive or sine"),
            (self.coupling_sign in (-1, 1), "coupling_sign must be -1 or 1"),
            (len(self.pinch_range) == 2 and 0 < self.pinch_range[0] < self.pinch_range[1], "pinch_range must be [low, high] with 0 < low < high"),
            (self.p_fraction is None or 0 < self.p_fraction < 1, "p_fraction must lie in (0, 1)"),
            (len(self.taus) > 0 and all(t >= 0 for t in self.taus), "taus must be non-empty and >= 0"),
            (self.horizon >= 1, "horizon must be >= 1"),
            (self.c1 > 0, "c1 must be > 0"),
            (self.repeats >= 1, "repeats must be >= 1"),
            (0 < self.mcc_target < 1, "mcc_target must lie in (0, 1)"),
            (self.matrix_schedule in ("nested", "fresh"), "matrix_schedule must be nested or fresh"),
            (self.regression_threshold >= 0, "regression_threshold must be >= 0"),
            (self.workers is None or self.workers >= 1, "workers must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ParameterError(msg)
        if self.p_values is not None:
            ps = list(self.p_values)
            if not ps or any(not 1 <= p < self.n for p in ps):
                raise ParameterError(f"p_values must be non-empty and inside [1, {self.n - 1}]")
        self.recovery_config()  # validate solver keys early

    # derived quantities -------------------------------------------------------

    def edge_probabilities(self) -> list[tuple[str, float, float]]:
        """``(regime, eps, p)`` triples, in configured order."""
        if self.edge_probability is not None:
            return [("fixed", float("nan"), float(self.edge_probability))]
        regimes = ("supercritical", "connected") if self.regime == "both" else (self.regime,)
        out = []
        for reg in regimes:
            for e in self.eps_values:
                p = edge_probability(self.n, e, reg)
                out.append((reg, float(e), p))
        return out

    def p_grid(self) -> list[int]:
        if self.p_values is not None:
            return sorted(set(int(p) for p in self.p_values))
        if self.p_fraction is not None:
            return [max(1, min(self.n - 1, int(round(self.p_fraction * self.n))))]
        step = self.p_step or max(1, self.n // 100)
        lo = self.p_min or step
        hi = min(self.p_max or self.n - 1, self.n - 1)
        grid = list(range(lo, hi + 1, step))
        if not grid:
            raise ParameterError(f"empty P grid: min={lo}, max={hi}, step={step}")
        return grid

    def recovery_config(self) -> RecoveryConfig:
        names = {f.name for f in dataclasses.fields(RecoveryConfig)}
        unknown = set(self.solver) - names
        if unknown:
            raise ParameterError(f"unknown solver keys: {sorted(unknown)}")
        opts = {"backend": "auto", **self.solver}
        return RecoveryConfig(**opts)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **_normalize(changes))


def edge_probability(n: int, eps: float, regime: str) -> float:
    """``(ln N / N)(1 - eps)`` below the connectivity threshold, ``(1 + eps)`` above it."""
    sign = {"supercritical": -1.0, "connected": 1.0}[regime]
    return min(1.0, math.log(n) / n * (1.0 + sign * eps))


_TUPLE_KEYS = {"eps_values", "rates", "pinch_range", "p_values", "taus"}


def _normalize(d: dict) -> dict:
    return {k: (tuple(v) if k in _TUPLE_KEYS and v is not None else v) for k, v in d.items()}


def profile_defaults(experiment: str, profile: str) -> dict:
    if experiment not in EXPERIMENTS:
        raise ParameterError(f"experiment must be one of {EXPERIMENTS}")
    if profile not in PROFILES:
        raise ParameterError(f"profile must be one of {PROFILES}")
    big = profile == "paper"
    n = 1000 if big else 200
    if experiment == "exp1":
        return {"n": n, "regime": "supercritical", "eps_values": (0.5, 0.2), "taus": (1e-9,),
                "p_step": n // 100, "p_max": n // 4 if big else n // 2}
    if experiment == "exp2":
        return {"n": n, "regime": "both", "eps_values": (0.1, 0.3, 0.5, 0.7, 0.9),
                "taus": (1e-9, 1e-10), "p_step": n // 100, "stop_at_pc": True}
    if experiment == "exp3":
        return {"n": 100, "regime": "supercritical", "eps_values": (0.75,), "dynamics": "linear",
                "coupling": "diffusive", "coupling_sign": 1, "p_fraction": 0.6, "horizon": 7,
                "taus": (1e-9,), "matrix_schedule": "fresh"}
    return {}


def make_config(experiment: str = "custom", profile: str = "smoke", overrides: dict | None = None) -> ExperimentConfig:
    overrides = dict(overrides or {})
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(overrides) - known
    if unknown:
        raise ParameterError(f"unknown config keys: {sorted(unknown)}")
    experiment = overrides.pop("experiment", experiment)
    profile = overrides.pop("profile", profile)
    base = profile_defaults(experiment, profile)
    base.update(overrides)
    return ExperimentConfig(experiment=experiment, profile=profile, **_normalize(base))


def load_config(path, experiment: str | None = None, profile: str | None = None) -> ExperimentConfig:
    """Read a JSON config; command-line experiment/profile win over the document."""
    doc = json.loads(Path(path).read_text()) if path else {}
    if not isinstance(doc, dict):
        raise ParameterError("config must be a JSON object")
    if "schema_version" not in doc and path:
        raise ParameterError("config is missing schema_version")
    if experiment is not None:
        if doc.get("experiment", experiment) != experiment:
            raise ParameterError(f"config is for {doc['experiment']}, not {experiment}")
        doc["experiment"] = experiment
    if profile is not None:
        doc["profile"] = profile
    return make_config(overrides=doc)
