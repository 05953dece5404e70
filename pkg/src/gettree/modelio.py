"""JSON model files shared by oblique trees and the axis-aligned baselines."""

from __future__ import annotations

import json

from .baselines import AxisTree, Forest
from .dataset import NormalizationTransform
from .tree import FORMAT_VERSION, ModelError, ObliqueTree, from_dict, to_dict


def model_to_dict(model, norm=None):
    if isinstance(model, ObliqueTree):
        return to_dict(model, norm)
    if isinstance(model, AxisTree):
        kind, body = "cart", model.to_dict()
    elif isinstance(model, Forest):
        kind, body = "forest", model.to_dict()
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    doc = {"format_version": FORMAT_VERSION, "model_kind": kind, "model": body}
    if norm is not None:
        doc["norm"] = norm.to_dict()
    return doc


def model_from_dict(doc):
    """Inverse of :func:`model_to_dict`; returns ``(model, norm_or_None)``."""
    if not isinstance(doc, dict):
        raise ModelError("model document must be a JSON object")
    kind = doc.get("model_kind", "oblique_tree")
    if kind == "oblique_tree":
        return from_dict(doc)
    if doc.get("format_version") != FORMAT_VERSION:
        raise ModelError(f"unsupported format_version {doc.get('format_version')!r}")
    try:
        body = doc["model"]
        model = AxisTree.from_dict(body) if kind == "cart" else (
            Forest.from_dict(body) if kind == "forest" else None)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"malformed {kind} document: {exc}") from None
    if model is None:
        raise ModelError(f"unknown model_kind {kind!r}")
    norm = NormalizationTransform.from_dict(doc["norm"]) if doc.get("norm") else None
    return model, norm


def save_model(path, model, norm=None):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model, norm), fh, indent=1)
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelError(f"{path}: not valid JSON ({exc})") from None
    return model_from_dict(doc)
