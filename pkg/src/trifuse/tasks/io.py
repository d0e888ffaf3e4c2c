"""Checkpoint and metrics files.

A checkpoint is one JSON object::

    {"format": "trifuse-checkpoint/1", "kind": ..., "task": ..., "meta": {...},
     "model": {...}}

where ``model`` holds the factor slices (``{"R", "dims", "slices"}``), joint
factor matrices and head weights, each tensor as ``{"shape", "data"}``.
Floats are written with ``repr`` precision, so a load/save round trip is exact.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Iterable

from ..errors import ConfigError
from .models import CHECKPOINT_FORMAT, model_from_dict

__all__ = ["save_checkpoint", "load_checkpoint", "write_metrics_csv", "read_metrics_csv", "dump_json",
           "METRIC_COLUMNS"]

METRIC_COLUMNS = ("epoch", "loss", "acc", "ari", "har")


def dump_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path


def save_checkpoint(path, model, kind: str, task: str, meta: dict[str, Any] | None = None) -> Path:
    return dump_json({"format": CHECKPOINT_FORMAT, "kind": kind, "task": task, "meta": meta or {},
                      "model": model.to_dict()}, path)


def load_checkpoint(path):
    """Return ``(model, header)``; ``header`` is the checkpoint minus the model weights."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict) or obj.get("format") != CHECKPOINT_FORMAT:
        raise ConfigError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    model = model_from_dict(obj["model"])
    header = {k: v for k, v in obj.items() if k != "model"}
    return model, header


def write_metrics_csv(rows: Iterable[dict], path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRIC_COLUMNS)
        for row in rows:
            writer.writerow([row.get(c, "") if c == "epoch" else repr(float(row[c])) if c in row else ""
                             for c in METRIC_COLUMNS])
    return path


def read_metrics_csv(path) -> list[dict[str, float]]:
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{k: (int(v) if k == "epoch" else float(v)) for k, v in r.items() if v != ""} for r in rows]
