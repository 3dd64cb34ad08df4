"""Tensor-train weight representation.

A train of order-3 cores ``G[k]`` with shape ``(ranks[k], dims[k], ranks[k+1])``
and boundary ranks 1.  Entry ``(s_1, ..., s_N)`` of the represented tensor is
the chained matrix product ``G[0][:, s_1, :] @ ... @ G[N-1][:, s_N, :]``.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

__all__ = ["TTTensor", "InterfacePair", "clamp_ranks"]

_DENSE_GUARD = 10**7


def clamp_ranks(dims, cap: int) -> tuple[int, ...]:
    """Rank tuple (R_0, ..., R_N) for a rank cap: each internal bond is capped
    by the cap and by the matricization bounds prod(dims[:k]) / prod(dims[k:])."""
    dims = tuple(int(d) for d in dims)
    if cap < 1:
        raise ValueError("rank cap must be >= 1")
    n = len(dims)
    ranks = [1]
    for k in range(1, n):
        ranks.append(min(cap, math.prod(dims[:k]), math.prod(dims[k:])))
    ranks.append(1)
    return tuple(ranks)


class InterfacePair(NamedTuple):
    """Contractions of all cores strictly left / right of a position.

    ``left`` has shape (dims[0]*...*dims[k-1], ranks[k]); ``right`` has shape
    (dims[k+1]*...*dims[N-1], ranks[k+1]).  An empty side is the 1x1 ones.
    """

    left: np.ndarray
    right: np.ndarray


class TTTensor:
    """Weight tensor in train format.

    Parameters
    ----------
    cores : sequence of ndarray
        Order-3 cores, core k of shape (R_k, S_k, R_{k+1}) with R_0 = R_N = 1.
    """

    def __init__(self, cores, copy: bool = True):
        if copy:
            self.cores = [np.array(c, dtype=float) for c in cores]
        else:
            self.cores = [np.asarray(c, dtype=float) for c in cores]
        self._validate()

    def _validate(self):
        if not self.cores:
            raise ValueError("a TT needs at least one core")
        for k, c in enumerate(self.cores):
            if c.ndim != 3:
                raise ValueError(f"core {k} has order {c.ndim}, expected 3")
        if self.cores[0].shape[0] != 1 or self.cores[-1].shape[2] != 1:
            raise ValueError("boundary ranks must be 1")
        for k in range(len(self.cores) - 1):
            if self.cores[k].shape[2] != self.cores[k + 1].shape[0]:
                raise ValueError(
                    f"rank mismatch between cores {k} and {k + 1}: "
                    f"{self.cores[k].shape[2]} vs {self.cores[k + 1].shape[0]}"
                )
        dims = self.dims
        for k, r in enumerate(self.ranks):
            bound = min(math.prod(dims[:k]) or 1, math.prod(dims[k:]) or 1)
            if r > bound:
                raise ValueError(
                    f"rank {r} at bond {k} exceeds matricization bound {bound}"
                )

    @property
    def order(self) -> int:
        return len(self.cores)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(c.shape[1] for c in self.cores)

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(c.shape[0] for c in self.cores) + (1,)

    def param_count(self) -> int:
        return sum(c.size for c in self.cores)

    def copy(self) -> "TTTensor":
        return TTTensor(self.cores, copy=True)

    @classmethod
    def random(cls, dims, max_rank: int, rng) -> "TTTensor":
        """Random train with clamped ranks; core k entries are uniform in
        [-d, d] with d = 1/sqrt(core k coefficient count per output), i.e.
        1/sqrt(R_k * S_k * R_{k+1})."""
        rng = np.random.default_rng(rng)
        dims = tuple(int(d) for d in dims)
        ranks = clamp_ranks(dims, max_rank)
        cores = []
        for k, s in enumerate(dims):
            shape = (ranks[k], s, ranks[k + 1])
            delta = 1.0 / math.sqrt(shape[0] * shape[1] * shape[2])
            cores.append(rng.uniform(-delta, delta, size=shape))
        return cls(cores, copy=False)

    def evaluate_entry(self, indices) -> float:
        indices = tuple(int(i) for i in indices)
        if len(indices) != self.order:
            raise IndexError(f"got {len(indices)} indices for order {self.order}")
        for i, s in zip(indices, self.dims):
            if not 0 <= i < s:
                raise IndexError(f"index {i} out of range for dimension {s}")
        v = self.cores[0][:, indices[0], :]
        for k in range(1, self.order):
            v = v @ self.cores[k][:, indices[k], :]
        return float(v[0, 0])

    def to_dense(self, max_size: int = _DENSE_GUARD) -> np.ndarray:
        """Contract all cores into the full tensor (guarded by entry count)."""
        total = math.prod(self.dims)
        if total > max_size:
            raise ValueError(f"dense tensor with {total} entries exceeds guard {max_size}")
        out = self.cores[0][0]  # (S_0, R_1)
        for core in self.cores[1:]:
            r = core.shape[0]
            out = out.reshape(-1, r) @ core.reshape(r, -1)
        return out.reshape(self.dims)

    def interfaces(self, k: int) -> InterfacePair:
        """Explicit interface matrices for position k (exponential row count;
        intended for small trains and for checking; training uses the grams)."""
        if not 0 <= k < self.order:
            raise IndexError(f"position {k} out of range")
        left = np.ones((1, 1))
        if k > 0:
            left = self.cores[0][0]
            for j in range(1, k):
                # rows flatten (previous rows, S_j): leftmost slowest
                left = np.tensordot(left, self.cores[j], axes=(1, 0)).reshape(
                    -1, self.cores[j].shape[2]
                )
        right = np.ones((1, 1))
        if k < self.order - 1:
            right = self.cores[-1][:, :, 0].T
            for j in range(self.order - 2, k, -1):
                t = np.tensordot(self.cores[j], right, axes=(2, 1))
                right = t.reshape(t.shape[0], -1).T
        return InterfacePair(left, right)

    def interface_grams(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Gram matrices (left.T @ left, right.T @ right) of the position-k
        interfaces, computed by the core recursion without forming them."""
        if not 0 <= k < self.order:
            raise IndexError(f"position {k} out of range")
        gl = np.ones((1, 1))
        for j in range(k):
            c = self.cores[j]
            gl = np.einsum("rsq,rp,psu->qu", c, gl, c, optimize=True)
        gr = np.ones((1, 1))
        for j in range(self.order - 1, k, -1):
            c = self.cores[j]
            gr = np.einsum("rsq,qu,psu->rp", c, gr, c, optimize=True)
        return gl, gr

    def save(self, path):
        """Portable save: header arrays (dims, ranks) plus the concatenated
        flat core data."""
        payload = np.concatenate([c.ravel() for c in self.cores])
        with open(path, "wb") as fh:
            np.savez(
                fh,
                dims=np.asarray(self.dims, dtype=np.int64),
                ranks=np.asarray(self.ranks, dtype=np.int64),
                payload=payload,
            )

    @classmethod
    def load(cls, path) -> "TTTensor":
        with np.load(path) as data:
            dims = data["dims"]
            ranks = data["ranks"]
            payload = data["payload"]
        cores = []
        offset = 0
        for k, s in enumerate(dims):
            shape = (int(ranks[k]), int(s), int(ranks[k + 1]))
            size = shape[0] * shape[1] * shape[2]
            cores.append(payload[offset:offset + size].reshape(shape))
            offset += size
        if offset != payload.size:
            raise ValueError("payload size does not match header")
        return cls(cores, copy=False)

    def __repr__(self):
        return f"TTTensor(dims={self.dims}, ranks={self.ranks})"
