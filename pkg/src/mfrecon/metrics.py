"""Classification scores over supports and adjacency entries."""

from __future__ import annotations

import math
from typing import Iterable, Mapping

import numpy as np

from mfrecon.errors import ParameterError


def contingency(true_set: Iterable[int], pred_set: Iterable[int], universe_size: int) -> tuple[int, int, int, int]:
    """(TP, TN, FP, FN) for two index sets inside ``1..universe_size``."""
    t, p = set(true_set), set(pred_set)
    for s in (t, p):
        if s and (min(s) < 1 or max(s) > universe_size):
            raise ParameterError(f"indices must lie in 1..{universe_size}")
    tp = len(t & p)
    fp = len(p - t)
    fn = len(t - p)
    return tp, universe_size - tp - fp - fn, fp, fn


def mcc(tp: int, tn: int, fp: int, fn: int) -> float:
    """Matthews correlation; 0 when any marginal of the table is empty."""
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0:
        return 0.0
    return (tp * tn - fp * fn) / math.sqrt(denom)


def indicator_counts(truth: np.ndarray, pred: np.ndarray) -> tuple[int, int, int, int]:
    truth = np.asarray(truth, dtype=bool)
    pred = np.asarray(pred, dtype=bool)
    if truth.shape != pred.shape:
        raise ParameterError(f"shape mismatch {truth.shape} vs {pred.shape}")
    tp = int(np.count_nonzero(truth & pred))
    fp = int(np.count_nonzero(~truth & pred))
    fn = int(np.count_nonzero(truth & ~pred))
    return tp, truth.size - tp - fp - fn, fp, fn


def mcc_indicators(truth, pred) -> float:
    return mcc(*indicator_counts(truth, pred))


def cumulative_counts(true_supports: Mapping, pred_supports: Mapping, up_to: int, n: int) -> tuple[int, int, int, int]:
    """Summed contingency over every record (q, t) with 1 <= t <= up_to."""
    keys = [k for k in true_supports if 1 <= k[1] <= up_to]
    qs = {q for q, _ in true_supports}
    expected = {(q, t) for q in qs for t in range(1, up_to + 1)}
    missing = expected - set(keys) or {k for k in expected if k not in pred_supports}
    if missing:
        raise ParameterError(f"missing support records, e.g. {sorted(missing)[:3]}")
    total = np.zeros(4, dtype=np.int64)
    for k in sorted(expected):
        total += contingency(true_supports[k], pred_supports[k], n)
    return tuple(int(v) for v in total)


def cumulative_mcc(true_supports: Mapping, pred_supports: Mapping, up_to: int, n: int) -> float:
    """MCC of the support indicators concatenated over all q and 1 <= t <= up_to.

    Both mappings are keyed by ``(q, t)`` with 1-based index sets as values.
    """
    return mcc(*cumulative_counts(true_supports, pred_supports, up_to, n))
