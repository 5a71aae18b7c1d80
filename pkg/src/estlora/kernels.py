"""Backend selection for the numeric kernels.

The compiled extension is preferred when importable; setting
``ESTLORA_PURE_PYTHON=1`` forces the NumPy fallback. Both backends
commit to identical reduction orders, so results match bit for bit
and everything downstream (digests included) is backend-independent.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

if os.environ.get("ESTLORA_PURE_PYTHON") == "1":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

__all__ = ["backend", "frobenius_sq", "gram_trace", "matmul", "topk_abs_sum"]


def backend() -> str:
    """Name of the active kernel backend: ``cython`` or ``numpy``."""
    return _impl.BACKEND


def _as_f64_1d(v: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(v).ravel(), dtype=np.float64)


def _as_f64_2d(m: np.ndarray, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(m), dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def frobenius_sq(v: np.ndarray) -> float:
    """Squared Frobenius norm (sum of squared elements, any shape)."""
    return float(_impl.sum_sq(_as_f64_1d(v)))


def gram_trace(a: np.ndarray, b: np.ndarray) -> float:
    """Tr((A Aᵀ)(Bᵀ B)) for A of shape (r, n) and B of shape (m, r).

    Equals ‖B A‖²_F without materializing the m×n product.
    """
    return float(_impl.gram_trace(_as_f64_2d(a, "a"), _as_f64_2d(b, "b")))


def matmul(b: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Deterministic B @ A in float64."""
    return np.asarray(_impl.matmul(_as_f64_2d(b, "b"), _as_f64_2d(a, "a")))


def topk_abs_sum(v: np.ndarray, k: int) -> float:
    """Sum of the k largest absolute values of v (flattened)."""
    return float(_impl.topk_abs_sum(_as_f64_1d(v), int(k)))
