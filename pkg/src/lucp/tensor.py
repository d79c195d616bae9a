"""Dense real tensor algebra.

Tensors are plain ``numpy.ndarray`` objects stored in C order, so the flat
data is row-major over modes with mode 1 varying slowest.  Modes are
addressed 1-based in the public API (``mode=1`` is the first axis).

The mode-n unfolding follows the column ordering

    j = 1 + sum_{k != n} (i_k - 1) * beta_k,   beta_k = prod_{m < k, m != n} n_m

i.e. among the remaining modes the earliest one varies fastest.  With this
ordering ``X_(1) = A (C kr B)^T`` for a CP model ``[[A, B, C]]``.
"""

from __future__ import annotations

import itertools
from collections.abc import Sequence

import numpy as np

# A singular value counts as nonzero above RANK_RTOL * max(1, sigma_max).
RANK_RTOL = 1e-10


def _check_mode(ndim: int, mode: int) -> int:
    if not 1 <= mode <= ndim:
        raise ValueError(f"mode {mode} out of range for an order-{ndim} tensor")
    return mode - 1


def outer_product(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Outer product ``v1 o v2 o ... o vN`` of real vectors."""
    if len(vectors) == 0:
        raise ValueError("outer_product needs at least one vector")
    vecs = [np.asarray(v, dtype=float).ravel() for v in vectors]
    if any(v.size == 0 for v in vecs):
        raise ValueError("outer_product vectors must be non-empty")
    out = vecs[0]
    for v in vecs[1:]:
        out = np.multiply.outer(out, v)
    return out


def matricize(t: np.ndarray, mode: int) -> np.ndarray:
    """Mode-``mode`` unfolding of ``t`` (columns are the mode fibers)."""
    t = np.asarray(t)
    n = _check_mode(t.ndim, mode)
    # Fortran reshape over the remaining axes makes the earliest mode fastest.
    return np.moveaxis(t, n, 0).reshape(t.shape[n], -1, order="F")


def fold(m: np.ndarray, mode: int, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`matricize`."""
    m = np.asarray(m)
    shape = tuple(int(s) for s in shape)
    n = _check_mode(len(shape), mode)
    rest = shape[:n] + shape[n + 1:]
    if m.ndim != 2 or m.shape[0] != shape[n] or m.shape[1] != int(np.prod(rest, dtype=int)):
        raise ValueError(f"matrix of shape {m.shape} cannot fold into {shape} along mode {mode}")
    t = m.reshape((shape[n],) + rest, order="F")
    return np.moveaxis(t, 0, n)


def khatri_rao(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker product ``P kr Q``."""
    p = np.asarray(p)
    q = np.asarray(q)
    if p.ndim != 2 or q.ndim != 2 or p.shape[1] != q.shape[1]:
        raise ValueError(f"khatri_rao needs equal column counts, got {p.shape} and {q.shape}")
    return (p[:, None, :] * q[None, :, :]).reshape(p.shape[0] * q.shape[0], p.shape[1])


def khatri_rao_chain(matrices: Sequence[np.ndarray]) -> np.ndarray:
    """``M1 kr M2 kr ... kr Mk`` (left to right)."""
    out = matrices[0]
    for m in matrices[1:]:
        out = khatri_rao(out, m)
    return out


def kronecker(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(a, b)


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"hadamard needs equal shapes, got {a.shape} and {b.shape}")
    return a * b


def mode_product(t: np.ndarray, m: np.ndarray, mode: int) -> np.ndarray:
    """Mode-n product: ``fold(M @ matricize(t, n))``."""
    t = np.asarray(t)
    n = _check_mode(t.ndim, mode)
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[1] != t.shape[n]:
        raise ValueError(f"matrix {m.shape} does not act on mode {mode} of size {t.shape[n]}")
    new_shape = t.shape[:n] + (m.shape[0],) + t.shape[n + 1:]
    return fold(m @ matricize(t, mode), mode, new_shape)


def multilinear_apply(matrices: Sequence[np.ndarray], t: np.ndarray) -> np.ndarray:
    """``(A1 x A2 x ... x AN) t`` with ``A_k`` acting on mode k."""
    t = np.asarray(t)
    if len(matrices) != t.ndim:
        raise ValueError(f"need {t.ndim} matrices, got {len(matrices)}")
    out = t
    for k, a in enumerate(matrices, start=1):
        out = mode_product(out, a, k)
    return out


def frobenius_norm(t: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.square(np.asarray(t, dtype=float)))))


def singular_values(a: np.ndarray) -> np.ndarray:
    """Singular values in non-increasing order."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return np.zeros(0)
    return np.linalg.svd(a, compute_uv=False)


def rank_threshold(sigma_max: float) -> float:
    return RANK_RTOL * max(1.0, sigma_max)


def matrix_rank(a: np.ndarray) -> int:
    s = singular_values(a)
    if s.size == 0:
        return 0
    return int(np.sum(s >= rank_threshold(s[0])))


def k_rank(a: np.ndarray) -> int:
    """Kruskal rank by exhaustive enumeration of column subsets.

    The rank test on every subset uses the threshold derived from the
    largest singular value of the whole matrix.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError("k_rank expects a matrix")
    rows, cols = a.shape
    if cols == 0:
        return 0
    s = singular_values(a)
    thresh = rank_threshold(s[0] if s.size else 0.0)
    if np.any(np.linalg.norm(a, axis=0) < thresh):
        return 0
    k = 1
    for r in range(2, min(rows, cols) + 1):
        for subset in itertools.combinations(range(cols), r):
            sv = np.linalg.svd(a[:, subset], compute_uv=False)
            if sv[-1] < thresh:
                return k
        k = r
    return k
