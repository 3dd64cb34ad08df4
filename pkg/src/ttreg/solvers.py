"""Factorizations and regularized least-squares solvers.

The central tool is the generalized SVD of a matrix pair (P, L) sharing a
right factor::

    P = U_P diag(sig_p) V^T,   L = U_L diag(sig_l) V^T

obtained from a QR of the stacked pair followed by an SVD of the top block.
Once factored, the ridge solution for any penalty weight costs O(n^2): a
diagonal shrinkage plus one application of V^{-T}.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky, solve_triangular

__all__ = [
    "SingularMatrixPairError",
    "SingularSystemError",
    "thin_qr",
    "GsvdFactors",
    "gsvd",
    "gsvd_from_gram",
    "gsvd_solve",
    "ridge_solve_precomputed",
    "solve_direct",
    "solve_direct_gram",
]

_JITTER_SCALE = 1e-10


class SingularMatrixPairError(np.linalg.LinAlgError):
    """The stacked pair [P; L] is column-rank deficient: no unique solution."""


class SingularSystemError(np.linalg.LinAlgError):
    """The normal-equation system is numerically singular."""


def thin_qr(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reduced QR factorization (Q with orthonormal columns, R upper)."""
    return np.linalg.qr(np.asarray(a, dtype=float), mode="reduced")


@dataclass
class GsvdFactors:
    """Joint factors of a pair (P, L); ``u_l`` is None when the factorization
    was built from the Gram matrix of L (enough for solving).

    ``v`` equals ``r_factor.T @ z``; its inverse-transpose action is one
    orthogonal multiply plus a triangular solve.
    """

    u_p: np.ndarray
    u_l: np.ndarray | None
    sig_p: np.ndarray
    sig_l: np.ndarray
    z: np.ndarray
    r_factor: np.ndarray

    @property
    def v(self) -> np.ndarray:
        return self.r_factor.T @ self.z

    def project(self, y: np.ndarray) -> np.ndarray:
        """U_P^T y; precompute once when sweeping many penalty weights."""
        return self.u_p.T @ np.asarray(y, dtype=float)

    def apply_v_inv_t(self, vec: np.ndarray) -> np.ndarray:
        return solve_triangular(self.r_factor, self.z @ vec, lower=False)


def _check_r_rank(r: np.ndarray):
    sv = np.linalg.svd(r, compute_uv=False)
    n = r.shape[0]
    if sv[0] == 0.0 or sv[-1] <= n * np.finfo(float).eps * sv[0]:
        raise SingularMatrixPairError(
            "stacked pair [P; L] is rank deficient; the regularized solution "
            "is not unique (fall back to jittered normal equations)"
        )


def _finish_from_q1(q1: np.ndarray, r: np.ndarray, q2: np.ndarray | None) -> GsvdFactors:
    u_p, c, zt = np.linalg.svd(q1, full_matrices=False)
    c = np.clip(c, 0.0, 1.0)
    z = zt.T
    if q2 is None:
        s = np.sqrt(np.clip(1.0 - c * c, 0.0, None))
        u_l = None
    else:
        w = q2 @ z
        s = np.linalg.norm(w, axis=0)
        tol = max(q2.shape) * np.finfo(float).eps
        pos = s > tol
        u_l = np.zeros_like(w)
        u_l[:, pos] = w[:, pos] / s[np.newaxis, pos]
        s = np.where(pos, s, 0.0)
        n_missing = int(np.count_nonzero(~pos))
        if n_missing and q2.shape[0] >= q2.shape[1]:
            # complete the zero-generalized-value columns orthonormally
            full, _ = np.linalg.qr(u_l[:, pos], mode="complete")
            u_l[:, ~pos] = full[:, int(np.count_nonzero(pos)):][:, :n_missing]
    return GsvdFactors(u_p=u_p, u_l=u_l, sig_p=c, sig_l=s, z=z, r_factor=r)


def gsvd(p_mat: np.ndarray, l_mat: np.ndarray) -> GsvdFactors:
    """Generalized SVD of the pair (P, L) via QR of the stacked matrix.

    Requires P to have at least as many rows as columns and the stack to have
    full column rank; raises :class:`SingularMatrixPairError` otherwise.
    """
    p_mat = np.asarray(p_mat, dtype=float)
    l_mat = np.asarray(l_mat, dtype=float)
    m, n = p_mat.shape
    if l_mat.shape[1] != n:
        raise ValueError(f"column mismatch: P has {n}, L has {l_mat.shape[1]}")
    if m < n:
        raise ValueError(
            f"pair factorization needs at least as many samples as unknowns "
            f"(got {m} rows for {n} columns); use solve_direct instead"
        )
    q, r = np.linalg.qr(np.vstack([p_mat, l_mat]))
    _check_r_rank(r)
    return _finish_from_q1(q[:m], r, q[m:])


def gsvd_from_gram(p_mat: np.ndarray, ltl: np.ndarray) -> GsvdFactors:
    """Same factors (without U_L) from P and the Gram matrix L^T L, for
    regularizers too large to form explicitly."""
    p_mat = np.asarray(p_mat, dtype=float)
    ltl = np.asarray(ltl, dtype=float)
    m, n = p_mat.shape
    if ltl.shape != (n, n):
        raise ValueError(f"gram matrix must be {n}x{n}, got {ltl.shape}")
    if m < n:
        raise ValueError(
            f"pair factorization needs at least as many samples as unknowns "
            f"(got {m} rows for {n} columns); use solve_direct instead"
        )
    a = p_mat.T @ p_mat + ltl
    try:
        r = cholesky(a, lower=False)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixPairError(
            "P^T P + L^T L is not positive definite; the pair is rank deficient"
        ) from exc
    d = np.abs(np.diag(r))
    if d.min() <= n * np.finfo(float).eps * d.max():
        raise SingularMatrixPairError("stacked pair [P; L] is numerically rank deficient")
    q1 = solve_triangular(r, p_mat.T, trans="T", lower=False).T
    return _finish_from_q1(q1, r, None)


def gsvd_solve(
    factors: GsvdFactors,
    y: np.ndarray,
    lam: float,
    n_samples: int,
    projected: np.ndarray | None = None,
) -> np.ndarray:
    """Ridge solution from precomputed pair factors.

    Pass ``projected=factors.project(y)`` to amortize the U_P^T y product when
    evaluating many penalty weights; each call then costs O(n^2).
    """
    if lam < 0:
        raise ValueError("penalty weight must be nonnegative")
    upty = factors.project(y) if projected is None else projected
    num = factors.sig_p * upty
    den = factors.sig_p**2 + lam * n_samples * factors.sig_l**2
    cutoff = np.finfo(float).eps * max(den.max(), 1.0)
    z_hat = np.where(den > cutoff, num / np.where(den > cutoff, den, 1.0), 0.0)
    return factors.apply_v_inv_t(z_hat)


def _solve_normal(a: np.ndarray, rhs: np.ndarray, lam: float, jitter: bool) -> np.ndarray:
    n = a.shape[0]
    if jitter:
        bump = _JITTER_SCALE * np.trace(a) / n
        a = a + bump * np.eye(n)
        warnings.warn(
            "rank-deficient regularized system; jittered the normal equations",
            RuntimeWarning,
            stacklevel=3,
        )
    if lam == 0.0 and not jitter:
        cond = np.linalg.cond(a)
        if not np.isfinite(cond) or cond > 1e12:
            raise SingularSystemError(
                f"unregularized normal equations are ill-conditioned (cond ~ {cond:.2e})"
            )
    try:
        return cho_solve(cho_factor(a), rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("normal equations are numerically singular") from exc


def solve_direct(
    p_mat: np.ndarray,
    l_mat: np.ndarray,
    y: np.ndarray,
    lam: float,
    n_samples: int,
    jitter: bool = False,
) -> np.ndarray:
    """theta = (P^T P + lam * n_samples * L^T L)^{-1} P^T y by an SPD solve."""
    l_mat = np.asarray(l_mat, dtype=float)
    return solve_direct_gram(p_mat, l_mat.T @ l_mat, y, lam, n_samples, jitter=jitter)


def solve_direct_gram(
    p_mat: np.ndarray,
    ltl: np.ndarray,
    y: np.ndarray,
    lam: float,
    n_samples: int,
    jitter: bool = False,
) -> np.ndarray:
    """Direct ridge solve taking the regularizer through its Gram matrix."""
    p_mat = np.asarray(p_mat, dtype=float)
    y = np.asarray(y, dtype=float)
    ltl = np.asarray(ltl, dtype=float)
    if not (np.isfinite(p_mat).all() and np.isfinite(ltl).all() and np.isfinite(y).all()):
        raise ValueError("non-finite values in the system")
    return ridge_solve_precomputed(p_mat.T @ p_mat, p_mat.T @ y, ltl, lam, n_samples, jitter)


def ridge_solve_precomputed(
    ptp: np.ndarray,
    pty: np.ndarray,
    ltl: np.ndarray,
    lam: float,
    n_samples: int,
    jitter: bool = False,
) -> np.ndarray:
    """Ridge solve from precomputed P^T P and P^T y; amortizes the Gram
    products when sweeping many penalty weights without a pair factorization."""
    if lam < 0:
        raise ValueError("penalty weight must be nonnegative")
    a = ptp + (lam * n_samples) * ltl
    return _solve_normal(a, pty, lam, jitter)
