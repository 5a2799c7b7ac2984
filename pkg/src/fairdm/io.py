"""File formats: CSV for contexts and classifiers, JSON for games, partitions and reports.

Context CSV has header ``group,class,observable,weight``; classifier CSV has
``observable,outcome,prob``. Labels are opaque strings ordered by first
appearance. Floats are written with 17 significant digits so that a
write/read cycle reproduces them bit for bit.

JSON has no infinity, so ``inf`` is written as the string ``"inf"``.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from fairdm import __version__
from fairdm.context import ROW_SUM_TOL, Classifier, Context
from fairdm.game import DecisionGame
from fairdm.triviality import Partition

CONTEXT_HEADER = ["group", "class", "observable", "weight"]
CLASSIFIER_HEADER = ["observable", "outcome", "prob"]
MASS_TOL = 1e-6
ROW_TOL = 1e-6


class LoadError(ValueError):
    pass


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _rows(text: str, header: list[str], what: str):
    reader = csv.reader(io.StringIO(text))
    first = next(reader, None)
    if first is None:
        raise LoadError(f"{what} file is empty")
    if [h.strip() for h in first] != header:
        raise LoadError(f"{what} header must be {','.join(header)}, got {','.join(first)}")
    any_row = False
    for row in reader:
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise LoadError(f"row {reader.line_num}: expected {len(header)} fields, got {len(row)}")
        fields = [cell.strip() for cell in row]
        if any(not f for f in fields[:-1]):
            raise LoadError(f"row {reader.line_num}: empty label")
        try:
            value = float(fields[-1])
        except ValueError:
            raise LoadError(f"row {reader.line_num}: {header[-1]} {fields[-1]!r} is not a number") from None
        if not math.isfinite(value) or value < 0:
            raise LoadError(f"row {reader.line_num}: {header[-1]} must be a nonnegative number, got {fields[-1]}")
        any_row = True
        yield reader.line_num, fields[:-1], value
    if not any_row:
        raise LoadError(f"{what} file has no data rows")


def parse_context(text: str, mode: str = "count") -> Context:
    """Parse context CSV. ``mode="count"`` normalizes weights; ``"mass"`` requires them to sum to 1."""
    if mode not in ("count", "mass"):
        raise ValueError(f"mode must be 'count' or 'mass', got {mode!r}")
    cells: dict = {}
    first_seen: dict = {}
    for line, (g, c, v), w in _rows(text, CONTEXT_HEADER, "context"):
        cells[g, c, v] = cells.get((g, c, v), 0.0) + w
        for label in (("group", g), ("class", c)):
            first_seen.setdefault(label, line)
    total = sum(cells.values())
    if total <= 0:
        raise LoadError("context has zero total weight")
    if mode == "mass" and abs(total - 1.0) > MASS_TOL:
        raise LoadError(f"masses sum to {total!r}, not 1")
    label_mass: dict = {}
    for (g, c, _), w in cells.items():
        label_mass[("group", g)] = label_mass.get(("group", g), 0.0) + w
        label_mass[("class", c)] = label_mass.get(("class", c), 0.0) + w
    for (kind, label), w in label_mass.items():
        if w <= 0:
            raise LoadError(f"row {first_seen[kind, label]}: {kind} {label!r} has zero total weight")
    return Context.from_cells(cells)


def load_context(path, mode: str = "count") -> Context:
    text = Path(path).read_text(encoding="utf-8")
    try:
        return parse_context(text, mode)
    except LoadError:
        raise
    except ValueError as exc:
        raise LoadError(f"{path}: {exc}") from exc


def serialize_context(ctx: Context) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CONTEXT_HEADER)
    for g, c, v, w in ctx.cells():
        writer.writerow([g, c, v, _fmt(w)])
    return out.getvalue()


def parse_classifier(text: str) -> Classifier:
    rows: dict = {}
    outcomes: dict = {}
    for _, (v, o), p in _rows(text, CLASSIFIER_HEADER, "classifier"):
        outcomes.setdefault(o, len(outcomes))
        row = rows.setdefault(v, {})
        row[o] = row.get(o, 0.0) + p
    channel = np.zeros((len(rows), len(outcomes)))
    for i, (v, row) in enumerate(rows.items()):
        total = sum(row.values())
        if abs(total - 1.0) > ROW_TOL:
            raise LoadError(f"probabilities for observable {v!r} sum to {total!r}, not 1")
        scale = 1.0 if abs(total - 1.0) <= ROW_SUM_TOL else total
        for o, p in row.items():
            channel[i, outcomes[o]] = p / scale
    return Classifier(tuple(rows), tuple(outcomes), channel)


def load_classifier(path) -> Classifier:
    return parse_classifier(Path(path).read_text(encoding="utf-8"))


def serialize_classifier(clf: Classifier) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CLASSIFIER_HEADER)
    for i, v in enumerate(clf.observables):
        for j, o in enumerate(clf.outcomes):
            writer.writerow([v, o, _fmt(clf.channel[i, j])])
    return out.getvalue()


def load_game(path) -> DecisionGame:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return DecisionGame.from_dict(data)
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise LoadError(f"{path}: malformed game file ({exc})") from exc


def load_partition(path) -> Partition:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    blocks = data["partition"] if isinstance(data, dict) else data
    return Partition(tuple(tuple(str(c) for c in b) for b in blocks))


def to_jsonable(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        if hasattr(obj, "to_dict"):
            return to_jsonable(obj.to_dict())
        return to_jsonable(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    return obj


def from_jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {k: from_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [from_jsonable(v) for v in obj]
    if obj == "inf":
        return math.inf
    if obj == "-inf":
        return -math.inf
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def loads(text: str) -> Any:
    return from_jsonable(json.loads(text))


def digest(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return "sha256:" + hashlib.sha256(data).hexdigest()


def file_digest(path) -> str:
    return digest(Path(path).read_bytes())


def envelope(kind: str, body: dict, inputs: dict | None = None) -> dict:
    """Wrap a report body with tool name, version and input digests."""
    return {"tool": "fairdm", "version": __version__, "kind": kind, "inputs": inputs or {}, **body}
