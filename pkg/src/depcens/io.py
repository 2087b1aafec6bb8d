"""Flat-file formats: survival CSV, curve CSV and JSON reports.

All writes go through a temp file in the target directory followed by
``os.replace``, so a crash mid-write never leaves a truncated file.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile

import numpy as np

from .datagen import SurvivalData
from .errors import ParseError

# 17 significant digits round-trips an IEEE double exactly.
_FLOAT_FMT = "%.17g"


def _atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_survival_csv(path: str, data: SurvivalData) -> None:
    """Write records as ``x,delta`` rows (plus ``trt`` when present)."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    if data.trt is None:
        writer.writerow(["x", "delta"])
        for x, d in zip(data.x, data.delta):
            writer.writerow([_FLOAT_FMT % x, int(d)])
    else:
        writer.writerow(["x", "delta", "trt"])
        for x, d, a in zip(data.x, data.delta, data.trt):
            writer.writerow([_FLOAT_FMT % x, int(d), int(a)])
    _atomic_write_text(path, buf.getvalue())


def read_survival_csv(path: str) -> SurvivalData:
    """Read a survival CSV produced by :func:`write_survival_csv`.

    The header must be ``x,delta`` or ``x,delta,trt``.  Raises
    ``ParseError`` naming the offending line on any malformed content.
    """
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        header = [h.strip().lower() for h in header]
        if header == ["x", "delta"]:
            has_trt = False
        elif header == ["x", "delta", "trt"]:
            has_trt = True
        else:
            raise ParseError(
                f"{path}: line 1: expected header 'x,delta' or 'x,delta,trt', "
                f"got {','.join(header)!r}"
            )
        xs: list[float] = []
        deltas: list[int] = []
        trts: list[int] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                x = float(row[0])
            except ValueError:
                raise ParseError(
                    f"{path}: line {lineno}: bad observed time {row[0]!r}"
                ) from None
            if not np.isfinite(x) or x <= 0.0:
                raise ParseError(
                    f"{path}: line {lineno}: observed time must be finite and positive"
                )
            delta = row[1].strip()
            if delta not in ("0", "1"):
                raise ParseError(
                    f"{path}: line {lineno}: event indicator must be 0 or 1, got {row[1]!r}"
                )
            xs.append(x)
            deltas.append(int(delta))
            if has_trt:
                trt = row[2].strip()
                if trt not in ("0", "1"):
                    raise ParseError(
                        f"{path}: line {lineno}: treatment arm must be 0 or 1, got {row[2]!r}"
                    )
                trts.append(int(trt))
    if not xs:
        raise ParseError(f"{path}: no data rows")
    return SurvivalData(
        np.asarray(xs), np.asarray(deltas), np.asarray(trts) if has_trt else None
    )


def write_curve_csv(path: str, times, survival) -> None:
    """Write a step-function survival curve as ``time,survival`` rows."""
    times = np.asarray(times, dtype=float)
    survival = np.asarray(survival, dtype=float)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["time", "survival"])
    for t, s in zip(times, survival):
        writer.writerow([_FLOAT_FMT % t, _FLOAT_FMT % s])
    _atomic_write_text(path, buf.getvalue())


# Summary-table columns, one row per study cell.  mpe is blank when the
# true tau is zero and for failed cells.
_STUDY_COLUMNS = (
    "label",
    "tau_true",
    "n",
    "runs",
    "runs_failed",
    "failed",
    "mean_estimate",
    "mae",
    "empirical_se",
    "coverage_pct",
    "ci_lo_mean",
    "ci_hi_mean",
    "mpe",
)


def write_study_csv(path: str, summaries) -> None:
    """Write one row per study cell with the summary-table columns."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(_STUDY_COLUMNS)
    for s in summaries:
        row = []
        for col in _STUDY_COLUMNS:
            value = getattr(s, col)
            if value is None:
                row.append("")
            elif isinstance(value, bool):
                row.append(int(value))
            elif isinstance(value, float):
                row.append(_FLOAT_FMT % value)
            else:
                row.append(value)
        writer.writerow(row)
    _atomic_write_text(path, buf.getvalue())


def write_json_report(path: str, payload: dict) -> None:
    """Serialize a report dict as stable, human-diffable JSON."""
    text = json.dumps(_plain(payload), indent=2, sort_keys=True, allow_nan=True)
    _atomic_write_text(path, text + "\n")


def _plain(value):
    """Recursively coerce numpy scalars/arrays so json.dumps accepts them."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    return value
