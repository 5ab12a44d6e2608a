"""Machine-readable reports.

JSON output is byte-stable: key order is fixed and every float is written
with 17 significant digits, so identical documents give identical files.
Non-finite floats are written as the strings ``"inf"``, ``"-inf"`` and
``"nan"``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__

_CHECK_KEYS = ("id", "anchor", "verdict", "max_abs_residual", "params", "stats")


@dataclass
class CheckRecord:
    id: str
    anchor: str
    verdict: str
    max_abs_residual: float | None = None
    params: dict | None = None
    stats: dict | None = None

    def __post_init__(self):
        if self.verdict not in ("pass", "fail"):
            raise ValueError(f"verdict must be 'pass' or 'fail', got {self.verdict!r}")

    def to_dict(self):
        d = {"id": self.id, "anchor": self.anchor, "verdict": self.verdict}
        for key in ("max_abs_residual", "params", "stats"):
            value = getattr(self, key)
            if value is not None:
                d[key] = value
        return d


@dataclass
class ReportDocument:
    config: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    version: str = __version__

    @property
    def status(self) -> str:
        return "pass" if all(c.verdict == "pass" for c in self.checks) else "fail"

    def add(self, record: CheckRecord) -> CheckRecord:
        self.checks.append(record)
        return record

    def to_dict(self):
        return {"version": self.version, "config": self.config,
                "checks": [c.to_dict() for c in self.checks], "status": self.status}

    @classmethod
    def from_dict(cls, d):
        checks = [CheckRecord(**{k: c[k] for k in _CHECK_KEYS if k in c}) for c in d["checks"]]
        return cls(config=d.get("config", {}), checks=checks, version=d["version"])


def _number(v: float) -> str:
    if math.isnan(v):
        return '"nan"'
    if math.isinf(v):
        return '"inf"' if v > 0 else '"-inf"'
    if v == int(v) and abs(v) < 1e16:
        return format(v, ".1f")
    return format(v, ".17g")


def _encode(obj, out):
    if obj is None:
        out.append("null")
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_number(float(obj)))
    elif isinstance(obj, Fraction):
        out.append(json.dumps(str(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        keys = list(obj) if obj.__class__ is _Ordered else sorted(obj, key=str)
        out.append("{")
        for i, k in enumerate(keys):
            if i:
                out.append(", ")
            out.append(json.dumps(str(k)))
            out.append(": ")
            _encode(obj[k], out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(", ")
            _encode(item, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


class _Ordered(dict):
    """Marker: keep insertion order instead of sorting keys."""


def dumps(doc: ReportDocument) -> str:
    d = doc.to_dict()
    top = _Ordered(version=d["version"], config=d["config"],
                   checks=[_Ordered(c) for c in d["checks"]], status=d["status"])
    out = []
    _encode(top, out)
    return "".join(out) + "\n"


def loads(text: str) -> ReportDocument:
    return ReportDocument.from_dict(json.loads(text))


def write_csv(path, header, rows) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_csv_cell(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def _csv_cell(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return v


def write_report(doc: ReportDocument, fmt: str, path) -> None:
    """Write ``doc`` as ``json`` or as a ``csv`` summary of its checks."""
    path = Path(path)
    if fmt == "json":
        try:
            path.write_text(dumps(doc))
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    elif fmt == "csv":
        write_csv(path, ["id", "anchor", "verdict", "max_abs_residual"],
                  [(c.id, c.anchor, c.verdict,
                    "" if c.max_abs_residual is None else c.max_abs_residual)
                   for c in doc.checks])
    else:
        raise ValueError(f"unknown report format {fmt!r}")
