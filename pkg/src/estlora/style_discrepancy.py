"""Style discrepancy score D between two backbone embeddings.

Embeddings are L2-normalized on load, so the squared distance between
them lives in [0, 4]; the score is d = 1 − raw/4, an affine map of that
range onto [0, 1]. Note the orientation: d is a SIMILARITY. d = 1 means
identical styles, and the gate's (1 − d) prior grows as styles diverge.
The raw distance is kept alongside for audit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import EmbeddingError

NORMALIZATION_TAG = "unit-sphere-quartic"


@dataclass(frozen=True)
class EmbeddingVector:
    dim: int
    values: np.ndarray  # float64, unit L2 norm
    model_tag: str
    source: str


@dataclass(frozen=True)
class DiscrepancyScore:
    d: float
    raw_sq_distance: float
    normalization: str = NORMALIZATION_TAG


def make_embedding(
    values: "np.ndarray | list[float]",
    model_tag: str = "",
    source: str = "external",
) -> EmbeddingVector:
    """Validate and L2-normalize a raw vector."""
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise EmbeddingError("empty embedding")
    if not np.all(np.isfinite(arr)):
        raise EmbeddingError("embedding contains a non-finite entry")
    norm = float(np.sqrt(np.sum(np.square(arr))))
    if norm == 0.0:
        raise EmbeddingError("zero vector cannot be normalized")
    return EmbeddingVector(
        dim=int(arr.size), values=arr / norm, model_tag=model_tag, source=source
    )


def load_embedding(path: str) -> EmbeddingVector:
    """Read an embedding JSON file and normalize it."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except FileNotFoundError:
        raise EmbeddingError(f"{path}: no such file") from None
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise EmbeddingError(f"{path}: malformed JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise EmbeddingError(f"{path}: expected a JSON object")
    try:
        dim = obj["dim"]
        values = obj["embedding"]
    except KeyError as exc:
        raise EmbeddingError(f"{path}: missing field {exc.args[0]!r}") from None
    if not isinstance(dim, int) or dim < 1:
        raise EmbeddingError(f"{path}: dim must be a positive integer, got {dim!r}")
    if not isinstance(values, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in values
    ):
        raise EmbeddingError(f"{path}: embedding must be a list of numbers")
    if len(values) != dim:
        raise EmbeddingError(
            f"{path}: embedding length {len(values)} does not match dim {dim}"
        )
    model = obj.get("model", "")
    source = obj.get("source", path)
    if not isinstance(model, str) or not isinstance(source, str):
        raise EmbeddingError(f"{path}: model and source must be strings")
    try:
        return make_embedding(values, model_tag=model, source=source)
    except EmbeddingError as exc:
        raise EmbeddingError(f"{path}: {exc}") from None


def discrepancy(
    style_emb: EmbeddingVector, content_emb: EmbeddingVector
) -> DiscrepancyScore:
    """d = 1 − ‖Φ_s − Φ_c‖²₂ / 4 on unit embeddings; symmetric in its args."""
    if style_emb.dim != content_emb.dim:
        raise EmbeddingError(
            f"dimension mismatch: {style_emb.dim} vs {content_emb.dim}"
        )
    diff = style_emb.values - content_emb.values
    raw = float(np.sum(np.square(diff)))
    # inputs are unit length only to ~1e-6, so clamp d into range
    d = 1.0 - raw / 4.0
    d = min(1.0, max(0.0, d))
    return DiscrepancyScore(d=d, raw_sq_distance=raw)
