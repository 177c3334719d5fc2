"""Result records and their CSV / JSON-lines serialization."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigError


@dataclass
class ResultRecord:
    """One experiment row; ``methods`` tags how each metric was computed."""

    experiment: str
    point: dict
    metrics: dict
    methods: dict
    seed: Optional[int] = None
    stderr: Optional[float] = None
    provenance: dict = field(default_factory=dict)
    error: Optional[str] = None
    wall_ms: Optional[float] = None

    def __post_init__(self):
        missing = set(self.metrics) - set(self.methods)
        if missing:
            raise ConfigError(f"metrics without a method tag: {sorted(missing)}")

    @property
    def method(self) -> str:
        return "+".join(sorted(set(self.methods.values())))

    def to_dict(self, timing: bool = False) -> dict:
        d = {"experiment": self.experiment, "point": self.point, "metrics": self.metrics, "methods": self.methods,
             "seed": self.seed, "stderr": self.stderr, "provenance": self.provenance, "error": self.error}
        if timing:
            d["wall_ms"] = self.wall_ms
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ResultRecord":
        return cls(d["experiment"], d["point"], d["metrics"], d["methods"], d.get("seed"), d.get("stderr"),
                   d.get("provenance", {}), d.get("error"), d.get("wall_ms"))


def format_number(x) -> str:
    """17 significant digits; non-finite values use the tokens Python's json accepts."""
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def _dump(obj) -> str:
    if obj is None or isinstance(obj, (bool, str)):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_number(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_dump(v)}" for k, v in sorted(obj.items())) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_dump(v) for v in obj) + "]"
    if hasattr(obj, "item"):  # numpy scalar
        return _dump(obj.item())
    if hasattr(obj, "tolist"):
        return _dump(obj.tolist())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def to_jsonl(records, timing: bool = False) -> str:
    return "".join(_dump(r.to_dict(timing)) + "\n" for r in records)


def to_csv(records, timing: bool = False) -> str:
    params = sorted({k for r in records for k in r.point})
    metrics = sorted({k for r in records for k in r.metrics})
    header = ["experiment", *[f"param.{p}" for p in params], *[f"metric.{m}" for m in metrics],
              "seed", "stderr", "method"] + (["error"] if any(r.error for r in records) else []) \
        + (["wall_ms"] if timing else [])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)

    def cell(v):
        if v is None:
            return ""
        if isinstance(v, bool):
            return str(v)
        if isinstance(v, (int, float)) or hasattr(v, "item"):
            return format_number(v) if isinstance(v, float) or hasattr(v, "item") else str(v)
        return _dump(v) if isinstance(v, (dict, list, tuple)) else str(v)

    for r in records:
        row = [r.experiment, *[cell(r.point.get(p)) for p in params], *[cell(r.metrics.get(m)) for m in metrics],
               cell(r.seed), cell(r.stderr), r.method]
        if "error" in header:
            row.append(r.error or "")
        if timing:
            row.append(cell(r.wall_ms))
        w.writerow(row)
    return buf.getvalue()


def render(records, fmt: str = "jsonl", timing: bool = False) -> str:
    records = list(records)
    if not records:
        raise ConfigError("no records to emit")
    empty = [i for i, r in enumerate(records) if not r.metrics]
    if empty:
        raise ConfigError(f"records {empty} have an empty metric set")
    if fmt == "jsonl":
        return to_jsonl(records, timing)
    if fmt == "csv":
        return to_csv(records, timing)
    raise ConfigError(f"unknown format {fmt!r}; use csv or jsonl")


def emit(records, path, fmt: str = "jsonl", timing: bool = False) -> Path:
    """Write records atomically (temp file in the target directory, then rename)."""
    text = render(records, fmt, timing)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def load_jsonl(path) -> list:
    with open(path) as fh:
        return [ResultRecord.from_dict(json.loads(line)) for line in fh if line.strip()]
