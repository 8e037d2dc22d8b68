"""File formats: model JSON, dataset JSONL, result JSONL and CSV tables."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable

from .models import BaseModel, DataPoint, model_from_dict

SCHEMA = "certsmooth.record/1"
TRACE_SCHEMA = "certsmooth.trace/1"
REPORT_SCHEMA = "certsmooth.report/1"


class DataError(ValueError):
    """Malformed input file; message carries the file and line number."""


def load_model(path: str | Path) -> BaseModel:
    path = Path(path)
    try:
        config = json.loads(path.read_text())
    except OSError as exc:
        raise DataError(f"{path}: cannot read model file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    try:
        return model_from_dict(config)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: invalid model config: {exc}") from exc


def load_dataset(path: str | Path, dimension: int | None = None) -> list[DataPoint]:
    """Read one ``{"id", "x", "label"}`` object per line; blank lines are skipped."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise DataError(f"{path}: cannot read dataset: {exc}") from exc
    points, seen = [], set()
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            point = DataPoint(str(obj["id"]), obj["x"], obj["label"])
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}:{lineno}: bad record: {exc!r}") from exc
        if point.id in seen:
            raise DataError(f"{path}:{lineno}: duplicate id {point.id!r}")
        if dimension is not None and point.x.size != dimension:
            raise DataError(f"{path}:{lineno}: x has dimension {point.x.size}, "
                            f"model expects {dimension}")
        seen.add(point.id)
        points.append(point)
    if not points:
        raise DataError(f"{path}: dataset is empty")
    return points


def dump_dataset(points: Iterable[DataPoint], path: str | Path) -> None:
    with open(path, "w") as fh:
        for p in points:
            fh.write(json.dumps({"id": p.id, "x": p.x.tolist(), "label": p.label}) + "\n")


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if hasattr(value, "item"):
        return _clean(value.item())
    return value


def canonical_json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, separators=(",", ":"))


def write_jsonl(records: Iterable[dict], path: str | Path) -> None:
    """Write records sorted by ``id`` so output is independent of scheduling."""
    rows = sorted(records, key=lambda r: str(r.get("id", "")))
    with open(path, "w") as fh:
        for r in rows:
            fh.write(canonical_json(r) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    path = Path(path)
    out = []
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise DataError(f"{path}: cannot read records: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            out.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
    return out
