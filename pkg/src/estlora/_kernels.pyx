# cython: language_level=3
"""Compiled numeric core.

Hot kernels for per-layer energy evaluation: blocked squared-norm
reductions, the r×r Gram-trace product, and partition-based top-k
magnitude sums. Pure C loops, single-threaded, bit-deterministic; the
NumPy fallback in ``_kernels_py`` mirrors each reduction order exactly,
so the two backends agree bit for bit.
"""

from libc.stdlib cimport free, malloc

import numpy as np

BACKEND = "cython"

DEF BLOCK = 64


def sum_sq(const double[::1] v):
    """Sum of squared elements: sequential within 64-element blocks,
    block sums added in order. Keeps round-off growth at n/64 while
    staying trivially reproducible by the fallback."""
    cdef Py_ssize_t n = v.shape[0]
    if n == 0:
        return 0.0
    cdef Py_ssize_t start, i, stop
    cdef double block_acc, total
    with nogil:
        total = 0.0
        start = 0
        while start < n:
            stop = start + BLOCK
            if stop > n:
                stop = n
            block_acc = 0.0
            for i in range(start, stop):
                block_acc += v[i] * v[i]
            total += block_acc
            start = stop
    return total


def gram_trace(const double[:, ::1] a, const double[:, ::1] b):
    """Tr((a aᵀ)(bᵀ b)) for a (r, n) and b (m, r), via r×r intermediates."""
    cdef Py_ssize_t r = a.shape[0]
    cdef Py_ssize_t n = a.shape[1]
    cdef Py_ssize_t m = b.shape[0]
    if b.shape[1] != r:
        raise ValueError(
            f"inner rank mismatch: a is {(a.shape[0], a.shape[1])}, b is {(b.shape[0], b.shape[1])}"
        )
    if r == 0:
        return 0.0
    cdef double* aat = <double*> malloc(r * r * sizeof(double))
    cdef double* btb = <double*> malloc(r * r * sizeof(double))
    if aat == NULL or btb == NULL:
        free(aat)
        free(btb)
        raise MemoryError()
    cdef Py_ssize_t i, j, t
    cdef double acc, total
    try:
        with nogil:
            for i in range(r):
                for j in range(i, r):
                    acc = 0.0
                    for t in range(n):
                        acc += a[i, t] * a[j, t]
                    aat[i * r + j] = acc
                    aat[j * r + i] = acc
            for i in range(r * r):
                btb[i] = 0.0
            # row-major pass over b keeps the access pattern contiguous
            for t in range(m):
                for i in range(r):
                    for j in range(i, r):
                        btb[i * r + j] += b[t, i] * b[t, j]
            for i in range(r):
                for j in range(i):
                    btb[i * r + j] = btb[j * r + i]
            total = 0.0
            for i in range(r * r):
                total += aat[i] * btb[i]
        return total
    finally:
        free(aat)
        free(btb)


def matmul(const double[:, ::1] b, const double[:, ::1] a):
    """b @ a for b (m, r) and a (r, n); fixed reduction order."""
    cdef Py_ssize_t m = b.shape[0]
    cdef Py_ssize_t r = b.shape[1]
    cdef Py_ssize_t n = a.shape[1]
    if a.shape[0] != r:
        raise ValueError(
            f"inner rank mismatch: b is {(b.shape[0], b.shape[1])}, a is {(a.shape[0], a.shape[1])}"
        )
    out_arr = np.zeros((m, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, t
    cdef double scale
    with nogil:
        for i in range(m):
            for t in range(r):
                scale = b[i, t]
                for j in range(n):
                    out[i, j] += scale * a[t, j]
    return out_arr


cdef inline void _swap(double* v, Py_ssize_t i, Py_ssize_t j) noexcept nogil:
    cdef double tmp = v[i]
    v[i] = v[j]
    v[j] = tmp


cdef void _select_tail(double* v, Py_ssize_t n, Py_ssize_t target) noexcept nogil:
    """Partially order v so that v[target:] holds the n-target largest values.

    Three-way quickselect; the equal-to-pivot band makes runs of duplicate
    magnitudes (constant matrices) terminate in one pass.
    """
    cdef Py_ssize_t lo = 0, hi = n - 1
    cdef Py_ssize_t mid, lt, gt, i
    cdef double pivot, x
    while lo < hi:
        mid = lo + (hi - lo) // 2
        if v[mid] < v[lo]:
            _swap(v, mid, lo)
        if v[hi] < v[lo]:
            _swap(v, hi, lo)
        if v[hi] < v[mid]:
            _swap(v, hi, mid)
        pivot = v[mid]
        lt = lo
        gt = hi
        i = lo
        while i <= gt:
            x = v[i]
            if x < pivot:
                _swap(v, i, lt)
                lt += 1
                i += 1
            elif x > pivot:
                _swap(v, i, gt)
                gt -= 1
            else:
                i += 1
        # [lo, lt) < pivot, [lt, gt] == pivot, (gt, hi] > pivot
        if target < lt:
            hi = lt - 1
        elif target > gt:
            lo = gt + 1
        else:
            return


cdef void _insertion_sort(double* v, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double key
    for i in range(1, n):
        key = v[i]
        j = i - 1
        while j >= 0 and v[j] > key:
            v[j + 1] = v[j]
            j -= 1
        v[j + 1] = key


cdef void _sort_range(double* v, Py_ssize_t n) noexcept nogil:
    """Ascending quicksort; recursion bounded to O(log n) by always
    recursing into the smaller partition and looping on the larger."""
    cdef Py_ssize_t mid, lt, gt, i, left_len, right_len
    cdef double pivot, x
    while n > 32:
        mid = n // 2
        if v[mid] < v[0]:
            _swap(v, mid, 0)
        if v[n - 1] < v[0]:
            _swap(v, n - 1, 0)
        if v[n - 1] < v[mid]:
            _swap(v, n - 1, mid)
        pivot = v[mid]
        lt = 0
        gt = n - 1
        i = 0
        while i <= gt:
            x = v[i]
            if x < pivot:
                _swap(v, i, lt)
                lt += 1
                i += 1
            elif x > pivot:
                _swap(v, i, gt)
                gt -= 1
            else:
                i += 1
        left_len = lt
        right_len = n - gt - 1
        if left_len < right_len:
            _sort_range(v, left_len)
            v += gt + 1
            n = right_len
        else:
            _sort_range(v + gt + 1, right_len)
            n = left_len
    _insertion_sort(v, n)


def topk_abs_sum(const double[::1] v, Py_ssize_t k):
    """Sum of the k largest |element| values of a 1-D float64 array.

    Quickselect partition followed by an ascending sequential sum of the
    selected magnitudes; bit-identical to the NumPy fallback.
    """
    cdef Py_ssize_t n = v.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"k={k} out of range for {n} elements")
    cdef double* work = <double*> malloc(n * sizeof(double))
    if work == NULL:
        raise MemoryError()
    cdef Py_ssize_t i
    cdef double total
    try:
        with nogil:
            for i in range(n):
                work[i] = v[i] if v[i] >= 0.0 else -v[i]
            if k < n:
                _select_tail(work, n, n - k)
            _sort_range(work + (n - k), k)
            total = 0.0
            for i in range(n - k, n):
                total += work[i]
        return total
    finally:
        free(work)
