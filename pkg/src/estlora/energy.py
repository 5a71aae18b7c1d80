"""Per-layer matrix energies E = ‖ΔW‖²_F and related importance scores.

The default path never materializes the m×n update: with s = alpha/rank,

    ‖s·B·A‖²_F = s² · Tr((A Aᵀ)(Bᵀ B))

which costs O(r²(m+n) + r³) through two r×r Gram matrices. Direct
materialization and a small-matrix spectral method are kept as slow
verification oracles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .adapter_io import AlignedPair, LoraLayer
from .errors import InputError
from .jsonio import dumps, sha256_hex

_METHODS = ("gram", "direct", "svd_oracle")
_SVD_ORACLE_MAX_DIM = 64


@dataclass(frozen=True)
class LayerEnergyReport:
    """Energies of the content and style updates for one shared layer."""

    key: str
    e_content: float
    e_style: float
    method: str = "gram"


def frobenius_sq(matrix: np.ndarray) -> float:
    """Σ|mᵢⱼ|², the squared Frobenius norm."""
    arr = np.asarray(matrix, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InputError("matrix contains a non-finite element")
    return kernels.frobenius_sq(arr)


def spectral_energy(matrix: np.ndarray) -> float:
    """Σσᵢ² from a full SVD; verification only, small matrices only."""
    arr = np.asarray(matrix, dtype=np.float64)
    if arr.ndim != 2:
        raise InputError(f"expected a matrix, got shape {arr.shape}")
    if max(arr.shape) > _SVD_ORACLE_MAX_DIM:
        raise InputError(
            f"spectral oracle is limited to {_SVD_ORACLE_MAX_DIM}x"
            f"{_SVD_ORACLE_MAX_DIM}, got {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise InputError("matrix contains a non-finite element")
    singular = np.linalg.svd(arr, compute_uv=False)
    return float(np.sum(np.square(singular)))


def materialize_delta(layer: LoraLayer) -> np.ndarray:
    """The dense scaled update s·B·A in float64."""
    delta = kernels.matmul(layer.up_matrix(), layer.down_matrix())
    delta *= layer.scale
    return delta


def delta_energy(layer: LoraLayer, method: str = "gram") -> float:
    """‖s·B·A‖²_F without materializing the product (method="gram")."""
    if method == "gram":
        scale = layer.scale
        value = scale * scale * kernels.gram_trace(layer.down_matrix(), layer.up_matrix())
    elif method == "direct":
        value = kernels.frobenius_sq(materialize_delta(layer))
    elif method == "svd_oracle":
        value = spectral_energy(materialize_delta(layer))
    else:
        raise InputError(f"unknown energy method {method!r}")
    if not np.isfinite(value):
        raise InputError(f"layer {layer.key!r}: non-finite energy")
    return value


def energy_report(pair: AlignedPair, method: str = "gram") -> list[LayerEnergyReport]:
    """One report per shared layer, in key order. Weights are constant over
    the denoising run, so this is computed once, not per step."""
    if method not in _METHODS:
        raise InputError(f"unknown energy method {method!r}")
    reports = []
    for key in pair.ordered_keys:
        reports.append(
            LayerEnergyReport(
                key=key,
                e_content=delta_energy(pair.content.layers[key], method),
                e_style=delta_energy(pair.style.layers[key], method),
                method=method,
            )
        )
    return reports


def topk_abs_sum(layer: LoraLayer, k: int) -> float:
    """Sum of the k largest |element| values of the scaled update.

    Partition-based selection; used by the Top-K baseline selector.
    """
    m, n = layer.delta_shape
    if not 1 <= k <= m * n:
        raise InputError(f"k={k} out of range for a {m}x{n} update")
    delta = materialize_delta(layer)
    if not np.all(np.isfinite(delta)):
        raise InputError(f"layer {layer.key!r}: non-finite update")
    return kernels.topk_abs_sum(delta, k)


def report_to_obj(reports: list[LayerEnergyReport]) -> dict:
    """JSON-ready form: {"layers": [...], "method": "gram"}."""
    if not reports:
        raise InputError("empty energy report")
    methods = {r.method for r in reports}
    if len(methods) != 1:
        raise InputError(f"mixed methods in one report: {sorted(methods)}")
    return {
        "layers": [
            {"key": r.key, "e_content": r.e_content, "e_style": r.e_style}
            for r in reports
        ],
        "method": reports[0].method,
    }


def report_to_json(reports: list[LayerEnergyReport]) -> str:
    return dumps(report_to_obj(reports))


def report_digest(reports: list[LayerEnergyReport]) -> str:
    """sha256 of the canonical report serialization."""
    return sha256_hex(report_to_json(reports))
