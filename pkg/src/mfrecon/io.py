"""CSV and JSON file formats.

Floats are written with ``repr`` so files round-trip exactly and identical runs
produce identical bytes. CSV files may start with ``#`` comment lines that
carry the configuration echo; readers skip them.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from mfrecon.errors import ParameterError
from mfrecon.measurement import MeanFieldSet, MeasurementMatrix


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return repr(v)
    if v is None:
        return ""
    return str(v)


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set)):
        items = sorted(obj) if isinstance(obj, set) else obj
        return [_jsonable(v) for v in items]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return None if math.isnan(v) else v
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.random.SeedSequence):
        return {"entropy": _jsonable(obj.entropy), "spawn_key": list(obj.spawn_key)}
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(dumps_json(obj))


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], comment: dict | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if comment is not None:
            fh.write("# config=" + json.dumps(_jsonable(comment), sort_keys=True, separators=(",", ":")) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    if not rows:
        raise ParameterError(f"{path}: empty CSV")
    return rows[0], rows[1:]


def read_comment_config(path) -> dict | None:
    with open(path) as fh:
        first = fh.readline()
    if first.startswith("# config="):
        return json.loads(first[len("# config="):])
    return None


# matrices ------------------------------------------------------------------------


def write_matrix(path, m: MeasurementMatrix) -> None:
    """First line ``P,N``; then P rows of N values."""
    with open(path, "w", newline="") as fh:
        fh.write(f"{m.P},{m.N}\n")
        w = csv.writer(fh, lineterminator="\n")
        for row in m.phi:
            w.writerow([_fmt(v) for v in row])


def read_matrix(path) -> MeasurementMatrix:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    try:
        P, N = (int(v) for v in rows[0])
        phi = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except (ValueError, IndexError) as exc:
        raise ParameterError(f"{path}: malformed matrix file") from exc
    if phi.shape != (P, N):
        raise ParameterError(f"{path}: header says {P}x{N}, data is {phi.shape}")
    return MeasurementMatrix(phi, {"kind": "explicit", "source": str(path)})


# state families -------------------------------------------------------------------


def write_states(path, family: np.ndarray, value_name: str = "value", comment=None, pinches=None) -> None:
    """Rows ``(q, t, i, value)`` for every nonzero ``family[t, i-1, q-1]``; unlisted entries are 0."""
    T1, n, nq = family.shape
    qs = list(pinches) if pinches is not None else list(range(1, nq + 1))
    rows = []
    for k, q in enumerate(qs):
        for t in range(T1):
            col = family[t, :, k]
            for i in np.flatnonzero(col):
                rows.append((q, t, int(i) + 1, col[i]))
    write_csv(path, ("q", "t", "i", value_name), rows, comment)


def read_states(path, n: int | None = None, horizon: int | None = None) -> tuple[np.ndarray, list[int]]:
    """Inverse of :func:`write_states`; dimensions default to the largest indices seen."""
    _, rows = read_csv(path)
    recs = [(int(q), int(t), int(i), float(v)) for q, t, i, v in rows]
    if not recs and (n is None or horizon is None):
        raise ParameterError(f"{path}: no entries and no dimensions given")
    qs = sorted({r[0] for r in recs})
    n = n or max(max(r[2] for r in recs), max(qs))
    horizon = horizon if horizon is not None else max(r[1] for r in recs)
    qs = list(range(1, n + 1)) if len(qs) <= n else qs
    col = {q: k for k, q in enumerate(qs)}
    fam = np.zeros((horizon + 1, n, len(qs)))
    for q, t, i, v in recs:
        if t <= horizon:
            fam[t, i - 1, col[q]] = v
    return fam, qs


def write_meanfields(path, mf: MeanFieldSet, comment=None) -> None:
    rows = []
    for (q, t) in sorted(mf.records):
        for k, v in enumerate(mf.records[(q, t)], start=1):
            rows.append((q, t, k, v))
    write_csv(path, ("q", "t", "k", "y"), rows, comment)


def read_meanfields(path, matrices) -> MeanFieldSet:
    if isinstance(matrices, MeasurementMatrix):
        matrices = {"phi": matrices}
    mf = MeanFieldSet(matrices=dict(matrices), default_matrix=next(iter(matrices)))
    _, rows = read_csv(path)
    buf: dict = {}
    for q, t, k, y in rows:
        buf.setdefault((int(q), int(t)), {})[int(k)] = float(y)
    for (q, t), entries in sorted(buf.items()):
        P = mf.matrix_for(q).P
        vec = np.zeros(P)
        for k, v in entries.items():
            if not 1 <= k <= P:
                raise ParameterError(f"{path}: component {k} out of range for P={P}")
            vec[k - 1] = v
        mf.add(q, t, vec)
    return mf


def write_supports(path, supports: dict, comment=None) -> None:
    """Rows ``(q, t, i)`` for every index in the support recorded under ``(q, t)``."""
    rows = [(q, t, i) for (q, t) in sorted(supports) for i in sorted(supports[(q, t)])]
    write_csv(path, ("q", "t", "i"), rows, comment)


def read_supports(path) -> dict:
    _, rows = read_csv(path)
    out: dict = {}
    for q, t, i in rows:
        out.setdefault((int(q), int(t)), set()).add(int(i))
    return out
