"""Pure-NumPy kernel fallback.

Mirrors the compiled backend's reduction orders exactly, so both
backends return bit-identical floats and serialized artifacts never
depend on which one happened to be importable:

- sum_sq: sequential within 64-element blocks, block sums added in order;
- gram_trace: every Gram entry is a plain sequential sum over the shared
  axis, and the final trace is a row-major sequential sum;
- matmul: each output element accumulates its r products in index order;
- topk_abs_sum: selected magnitudes added in ascending order.

Sequential semantics come from np.cumsum, never np.sum or einsum, whose
internal pairwise/SIMD orders differ from a C loop.
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"

_BLOCK = 64


def _seq_sum(values: np.ndarray) -> float:
    if values.size == 0:
        return 0.0
    return float(np.cumsum(values)[-1])


def sum_sq(v: np.ndarray) -> float:
    """Sum of squared elements of a 1-D float64 array."""
    n = v.shape[0]
    if n == 0:
        return 0.0
    sq = np.square(v)
    full = n // _BLOCK
    parts = []
    if full:
        parts.append(np.cumsum(sq[: full * _BLOCK].reshape(full, _BLOCK), axis=1)[:, -1])
    if n % _BLOCK:
        parts.append(np.asarray([_seq_sum(sq[full * _BLOCK :])]))
    return _seq_sum(np.concatenate(parts) if len(parts) > 1 else parts[0])


def gram_trace(a: np.ndarray, b: np.ndarray) -> float:
    """Tr((a aᵀ)(bᵀ b)) for a (r, n) and b (m, r), via r×r intermediates."""
    r, n = a.shape
    m = b.shape[0]
    if b.shape[1] != r:
        raise ValueError(
            f"inner rank mismatch: a is {a.shape}, b is {b.shape}"
        )
    if r == 0:
        return 0.0
    if n == 0:
        aat = np.zeros((r, r))
    else:
        aat = np.cumsum(a[:, None, :] * a[None, :, :], axis=2)[:, :, -1]
    if m == 0:
        btb = np.zeros((r, r))
    else:
        btb = np.cumsum(b[:, :, None] * b[:, None, :], axis=0)[-1]
    return _seq_sum((aat * btb).ravel())


def matmul(b: np.ndarray, a: np.ndarray) -> np.ndarray:
    """b @ a for b (m, r) and a (r, n); fixed reduction order."""
    m, r = b.shape
    if a.shape[0] != r:
        raise ValueError(
            f"inner rank mismatch: b is {b.shape}, a is {a.shape}"
        )
    n = a.shape[1]
    out = np.zeros((m, n), dtype=np.float64)
    for t in range(r):
        out += b[:, t, None] * a[None, t, :]
    return out


def topk_abs_sum(v: np.ndarray, k: int) -> float:
    """Sum of the k largest |element| values, added in ascending order."""
    n = v.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"k={k} out of range for {n} elements")
    magnitudes = np.abs(v)
    if k < n:
        tail = np.partition(magnitudes, n - k)[n - k :]
    else:
        tail = magnitudes
    return _seq_sum(np.sort(tail))
