"""Dense multiway-array algebra: flattening, unfoldings, n-mode products,
Kronecker/Khatri-Rao/outer products.

Everything in this package stores multiway data in row-major (C) order: the
leftmost index varies slowest, the rightmost fastest.  All matricizations
below derive their row/column orderings from that single rule, so a plain
``numpy.ndarray`` is the dense-tensor representation and ``arr.ravel()`` is
its canonical vectorization.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "multi_index",
    "unfold",
    "fold",
    "canonical_matricization",
    "n_mode_vec",
    "n_mode_mat",
    "kronecker",
    "khatri_rao",
    "outer",
    "inner",
]


def multi_index(shape, indices) -> int:
    """Flat (row-major) offset of a multi-index: leftmost slowest, rightmost
    fastest.  Indices are 0-based; raises IndexError when out of range."""
    shape = tuple(int(s) for s in shape)
    indices = tuple(int(i) for i in indices)
    if len(shape) != len(indices):
        raise IndexError(f"got {len(indices)} indices for {len(shape)} modes")
    for i, s in zip(indices, shape):
        if not 0 <= i < s:
            raise IndexError(f"index {i} out of range for dimension {s}")
    return int(np.ravel_multi_index(indices, shape))


def unfold(t: np.ndarray, mode: int) -> np.ndarray:
    """Mode-`mode` unfolding: I_mode x (product of the remaining dims), with
    columns ordered by the remaining modes in their original order."""
    t = np.asarray(t)
    if not 0 <= mode < t.ndim:
        raise ValueError(f"mode {mode} out of range for order-{t.ndim} tensor")
    return np.moveaxis(t, mode, 0).reshape(t.shape[mode], -1)


def fold(mat: np.ndarray, mode: int, shape) -> np.ndarray:
    """Inverse of :func:`unfold`: rebuild the tensor of the given shape."""
    shape = tuple(int(s) for s in shape)
    mat = np.asarray(mat)
    if not 0 <= mode < len(shape):
        raise ValueError(f"mode {mode} out of range for shape {shape}")
    rest = shape[:mode] + shape[mode + 1:]
    if mat.shape != (shape[mode], math.prod(rest)):
        raise ValueError(
            f"matrix shape {mat.shape} does not match mode-{mode} unfolding of {shape}"
        )
    return np.moveaxis(mat.reshape((shape[mode],) + rest), 0, mode)


def canonical_matricization(t: np.ndarray, n: int) -> np.ndarray:
    """Split the axes after the n-th one: rows flatten modes 1..n, columns
    flatten modes n+1..N (1-based n, i.e. ``1 <= n <= ndim``)."""
    t = np.asarray(t)
    if not 1 <= n <= t.ndim:
        raise ValueError(f"split position {n} out of range for order-{t.ndim} tensor")
    rows = math.prod(t.shape[:n])
    return t.reshape(rows, -1)


def n_mode_vec(t: np.ndarray, mode: int, x: np.ndarray) -> np.ndarray:
    """Contract mode `mode` with a vector; the result has one axis fewer."""
    t = np.asarray(t)
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != t.shape[mode]:
        raise ValueError(f"vector of length {x.shape} cannot contract mode of size {t.shape[mode]}")
    return np.tensordot(x, t, axes=(0, mode))


def n_mode_mat(t: np.ndarray, mode: int, x: np.ndarray) -> np.ndarray:
    """Multiply mode `mode` by a matrix X (J x I_mode): the mode's extent
    becomes J, all other axes stay in place."""
    t = np.asarray(t)
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[1] != t.shape[mode]:
        raise ValueError(f"matrix {x.shape} cannot act on mode of size {t.shape[mode]}")
    return np.moveaxis(np.tensordot(x, t, axes=(1, mode)), 0, mode)


def kronecker(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(np.asarray(a), np.asarray(b))


def khatri_rao(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker product of two matrices with equal column counts."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("khatri_rao expects matrices")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"column counts differ: {a.shape[1]} vs {b.shape[1]}")
    return (a[:, None, :] * b[None, :, :]).reshape(a.shape[0] * b.shape[0], a.shape[1])


def outer(*vectors: np.ndarray) -> np.ndarray:
    """Outer product of one or more vectors; order-N rank-one tensor."""
    if not vectors:
        raise ValueError("outer needs at least one vector")
    out = np.asarray(vectors[0], dtype=float)
    for v in vectors[1:]:
        out = np.multiply.outer(out, np.asarray(v, dtype=float))
    return out


def inner(t: np.ndarray, u: np.ndarray) -> float:
    """Inner product of two same-shaped tensors (sum of elementwise products)."""
    t = np.asarray(t)
    u = np.asarray(u)
    if t.shape != u.shape:
        raise ValueError(f"shape mismatch: {t.shape} vs {u.shape}")
    return float(np.dot(t.ravel(), u.ravel()))
