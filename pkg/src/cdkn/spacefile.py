"""Space file schema (``cdkn-space/1``) and run report emission
(``cdkn-report/1``).

Numbers serialize losslessly: integers as JSON ints, rationals as
``"p/q"`` strings, floats as JSON floats with full precision (17
significant digits through ``repr``).  Matrix-form files carry the full
symmetric distance matrix; graph-form files carry a weighted edge list
that is closed by an exact all-pairs shortest-path pass on load.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import DisconnectedGraphError, MetricError, ParseError
from .generators import _shortest_path_closure
from .space import FiniteMetricMeasureSpace, validate_metric

SPACE_FORMAT = "cdkn-space/1"
REPORT_FORMAT = "cdkn-report/1"


def encode_number(x):
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, int):
        return x
    if isinstance(x, Fraction):
        if x.denominator == 1:
            return int(x)
        return f"{x.numerator}/{x.denominator}"
    return float(x)


def decode_number(x):
    if isinstance(x, bool):
        raise ParseError("boolean found where a number was expected")
    if isinstance(x, int):
        return x
    if isinstance(x, float):
        return x
    if isinstance(x, str):
        try:
            if "/" in x:
                num, den = x.split("/", 1)
                return Fraction(int(num), int(den))
            return Fraction(x)
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError(f"bad rational literal {x!r}: {exc}") from exc
    raise ParseError(f"unsupported number encoding: {x!r}")


@dataclass
class SpaceFile:
    """Serializable description of a space plus optional metadata."""

    points: tuple
    metric_form: str            # "matrix" | "graph"
    metric_data: object         # matrix rows, or (u, v, w) edge triples
    measure: tuple
    metadata: dict = field(default_factory=dict)

    @staticmethod
    def from_space(space: FiniteMetricMeasureSpace,
                   metadata: dict = None) -> "SpaceFile":
        return SpaceFile(space.points, "matrix", space.dist, space.weights,
                         dict(metadata or {}))

    def to_space(self) -> FiniteMetricMeasureSpace:
        n = len(self.points)
        if self.metric_form == "matrix":
            dist = tuple(tuple(row) for row in self.metric_data)
        elif self.metric_form == "graph":
            idx = {p: i for i, p in enumerate(self.points)}
            edges = []
            for u, v, w in self.metric_data:
                ui = idx[u] if u in idx else int(u)
                vi = idx[v] if v in idx else int(v)
                if not w > 0:
                    raise ParseError(f"edge ({u}, {v}) has nonpositive length")
                edges.append((ui, vi, w))
            dist = _shortest_path_closure(n, edges)
        else:
            raise ParseError(f"unknown metric form {self.metric_form!r}")
        space = FiniteMetricMeasureSpace.create(self.points, dist, self.measure)
        report = validate_metric(space)
        if not report.ok:
            raise MetricError(report)
        return space

    def to_json(self) -> dict:
        if self.metric_form == "matrix":
            metric = {"type": "matrix",
                      "entries": [[encode_number(x) for x in row]
                                  for row in self.metric_data]}
        else:
            metric = {"type": "graph",
                      "edges": [[u, v, encode_number(w)]
                                for u, v, w in self.metric_data]}
        return {
            "format": SPACE_FORMAT,
            "points": list(self.points),
            "metric": metric,
            "measure": [encode_number(w) for w in self.measure],
            "metadata": self.metadata,
        }

    @staticmethod
    def from_json(doc: dict) -> "SpaceFile":
        if not isinstance(doc, dict):
            raise ParseError("space file must be a JSON object")
        if doc.get("format") != SPACE_FORMAT:
            raise ParseError(
                f"format {doc.get('format')!r} is not {SPACE_FORMAT!r}")
        for key in ("points", "metric", "measure"):
            if key not in doc:
                raise ParseError(f"space file is missing {key!r}")
        points = tuple(doc["points"])
        metric = doc["metric"]
        if metric.get("type") == "matrix":
            entries = metric.get("entries")
            if (not isinstance(entries, list) or len(entries) != len(points)
                    or any(len(r) != len(points) for r in entries)):
                raise ParseError("matrix entries must be a square list "
                                 "matching the point count")
            form, data = "matrix", tuple(
                tuple(decode_number(x) for x in row) for row in entries)
        elif metric.get("type") == "graph":
            form, data = "graph", tuple(
                (u, v, decode_number(w)) for u, v, w in metric.get("edges", ()))
        else:
            raise ParseError(f"unknown metric type {metric.get('type')!r}")
        measure = tuple(decode_number(w) for w in doc["measure"])
        if len(measure) != len(points):
            raise ParseError("measure length does not match point count")
        return SpaceFile(points, form, data, measure,
                         dict(doc.get("metadata", {})))


def save_space(path, space_or_file, metadata: dict = None):
    sf = (space_or_file if isinstance(space_or_file, SpaceFile)
          else SpaceFile.from_space(space_or_file, metadata))
    with open(path, "w") as fh:
        json.dump(sf.to_json(), fh, indent=1)
        fh.write("\n")


def load_space(path) -> FiniteMetricMeasureSpace:
    """Parse, close (for graph form) and validate a space file."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return SpaceFile.from_json(doc).to_space()


# ---------------------------------------------------------------------------
# run reports
# ---------------------------------------------------------------------------

def sanitize(obj):
    """Make report payloads JSON-serializable without losing precision."""
    from dataclasses import is_dataclass, asdict
    if isinstance(obj, Fraction):
        return encode_number(obj)
    if isinstance(obj, float):
        return obj
    if isinstance(obj, (int, str, bool)) or obj is None:
        return obj
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        return [sanitize(v) for v in obj]
    if is_dataclass(obj) and not isinstance(obj, type):
        return {k: sanitize(v) for k, v in vars(obj).items()}
    return repr(obj)


@dataclass
class RunReport:
    command: str
    config: dict
    results: object = None
    flags: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def to_json(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "command": self.command,
            "config": sanitize(self.config),
            "results": sanitize(self.results),
            "flags": sanitize(self.flags),
            "wall_time": self.wall_time,
        }


class timed_report:
    """Context manager filling in wall time on a RunReport."""

    def __init__(self, command, config):
        self.report = RunReport(command, config)

    def __enter__(self):
        self._t0 = time.perf_counter()
        return self.report

    def __exit__(self, exc_type, exc, tb):
        self.report.wall_time = time.perf_counter() - self._t0
        return False
