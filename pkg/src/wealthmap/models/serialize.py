"""JSON persistence for any fitted model."""

from __future__ import annotations

import json
from pathlib import Path

from ..errors import MalformedRecord
from .ensemble import TreeEnsemble
from .linear import LinearModel


def model_to_dict(model, **extra) -> dict:
    return {**model.to_dict(), **extra}


def save_model(path: str | Path, model, **extra) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model, **extra), sort_keys=True))


def model_from_dict(doc: dict):
    kind = doc.get("kind")
    if kind == "tree_ensemble":
        return TreeEnsemble.from_dict(doc)
    if kind == "linear":
        return LinearModel.from_dict(doc)
    raise MalformedRecord(f"unknown model kind {kind!r}")


def load_model(path: str | Path):
    """Returns (model, document) so callers can read extra keys."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"{path}: not valid JSON ({exc})") from None
    return model_from_dict(doc), doc
