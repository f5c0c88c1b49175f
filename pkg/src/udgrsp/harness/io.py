"""Point-set files and run reports."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..core_geom import PointSet


class BadInputError(ValueError):
    """Malformed or out-of-contract user input (exit code 4)."""


def _number(tok: str) -> float:
    v = float(tok)
    if not math.isfinite(v):
        raise BadInputError(f"non-finite coordinate {tok!r}")
    return v


def _format(v: float, integer: bool) -> str:
    # repr is the shortest string that parses back to the same double
    return str(int(v)) if integer else repr(float(v))


@dataclass(frozen=True)
class PointSetFile:
    """CSV ("x,y" per line, optional header) or JSON (list of [x, y])."""

    path: Path

    @property
    def kind(self) -> str:
        return "json" if self.path.suffix.lower() == ".json" else "csv"

    def read(self) -> PointSet:
        try:
            text = self.path.read_text()
        except OSError as exc:
            raise BadInputError(str(exc)) from exc
        return loads(text, self.kind)

    def write(self, P: PointSet) -> None:
        self.path.write_text(dumps(P, self.kind))


def loads(text: str, kind: str = "csv") -> PointSet:
    if kind == "json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise BadInputError(f"bad JSON: {exc}") from exc
        if not isinstance(data, list) or not all(isinstance(p, list) and len(p) == 2 for p in data):
            raise BadInputError("JSON input must be a list of [x, y] pairs")
        try:
            pts = [(_number(str(x)), _number(str(y))) for x, y in data]
        except (TypeError, ValueError) as exc:
            raise BadInputError(str(exc)) from exc
    else:
        pts = []
        rows = [row for row in csv.reader(io.StringIO(text)) if row and any(c.strip() for c in row)]
        for k, row in enumerate(rows):
            if len(row) != 2:
                raise BadInputError(f"line {k + 1}: expected two columns")
            try:
                pts.append((_number(row[0]), _number(row[1])))
            except BadInputError:
                raise
            except ValueError as exc:
                if k == 0:
                    continue  # header line
                raise BadInputError(f"line {k + 1}: {exc}") from exc
    if not pts:
        raise BadInputError("no points in input")
    return PointSet.from_points(np.array(pts, dtype=np.float64))


def dumps(P: PointSet, kind: str = "csv") -> str:
    integer = P.integer_mode
    if kind == "json":
        items = (f"[{_format(x, integer)}, {_format(y, integer)}]" for x, y in zip(P.xs, P.ys))
        return "[" + ", ".join(items) + "]\n"
    lines = ["x,y"] + [f"{_format(x, integer)},{_format(y, integer)}" for x, y in zip(P.xs, P.ys)]
    return "\n".join(lines) + "\n"


def _num(v):
    if v is None:
        return None
    v = float(v)
    return int(v) if v.is_integer() and abs(v) < 2**53 else v


TIMING_FIELDS = ("wall_time_ms",)


@dataclass
class RunReport:
    algorithm: str
    metric: str
    weighted: bool
    n: int
    lam: float
    r_star: float | None = None
    feasible: bool = True
    decision_call_count: int = 0
    steps: int = 0
    stages: int = 0
    wall_time_ms: float = 0.0
    seed: int | None = None
    oracle_checked: bool = False
    single_source: bool = False
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["lam"] = _num(self.lam)
        out["wall_time_ms"] = round(float(self.wall_time_ms), 3)
        extra = out.pop("extra")
        if self.feasible:
            out["r_star"] = _num(self.r_star)
        else:
            out.pop("r_star")
        out.update(extra)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))


REPORT_KEYS = {
    "algorithm": str, "metric": str, "weighted": bool, "n": int, "lam": (int, float),
    "feasible": bool, "decision_call_count": int, "steps": int, "stages": int,
    "wall_time_ms": (int, float), "oracle_checked": bool, "single_source": bool,
}


def validate_report(obj: dict) -> None:
    """Raise ValueError when a decoded report breaks the schema."""
    for key, typ in REPORT_KEYS.items():
        if key not in obj:
            raise ValueError(f"missing key {key!r}")
        if not isinstance(obj[key], typ) or (typ is int and isinstance(obj[key], bool)):
            raise ValueError(f"key {key!r} has type {type(obj[key]).__name__}")
    if obj["feasible"] != ("r_star" in obj):
        raise ValueError("r_star must be present exactly when feasible")
    if "r_star" in obj and not isinstance(obj["r_star"], (int, float)):
        raise ValueError("r_star must be a number")
