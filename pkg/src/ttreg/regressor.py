"""Tensor-train multilinear ridge regression.

The weight tensor over the lifted feature space is kept in train format and
fitted by alternating least squares: each position solves a ridge problem
whose design matrix is a Khatri-Rao product of the encoded feature column
with cached contractions of the cores on either side, and whose regularizer
reproduces the Frobenius norm of the full weight tensor.  Cores are kept
orthogonal by QR sweeps; the penalty weight is re-selected per core from the
validation loss with a coarse power-of-two scan refined by golden-section
search, all candidate solutions coming from a single pair factorization.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ttreg.features import FeatureMap, Scaler
from ttreg.metrics import MetricReport, compute_report
from ttreg.report import FitRecord, FitReport
from ttreg.solvers import (
    SingularMatrixPairError,
    SingularSystemError,
    gsvd_from_gram,
    gsvd_solve,
    ridge_solve_precomputed,
    solve_direct_gram,
    thin_qr,
)
from ttreg.tt_tensor import TTTensor

__all__ = [
    "TrainConfig",
    "SweepCache",
    "TrainingError",
    "orthogonalize_and_shift",
    "regularizer_gram",
    "select_lambda",
    "contract_predict",
    "TTRegressor",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    """Knobs of the alternating sweep trainer."""

    dims: tuple[int, ...]
    max_rank: int
    feature_kind: str = "polynomial"
    lambda_exponents: tuple[int, int] = (-10, 10)
    include_zero_lambda: bool = True
    gss_iters: int = 20
    max_sweeps: int = 12
    tol: float = 1e-6
    patience_frac: float = 0.2
    fixed_lambda: float | None = None
    initial_right_orthogonalize: bool = True

    def __post_init__(self):
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")


class SweepCache:
    """Per-split cached contractions of the train against encoded inputs.

    ``left[j]`` holds the contraction of cores 0..j-1 (shape ranks[j] x M),
    ``right[j]`` of cores j..N-1 (shape ranks[j] x M); the boundaries are the
    all-ones row for the empty product.  Validity markers guard against using
    entries that a core update has made stale.
    """

    def __init__(self, phis: list[np.ndarray]):
        self.phis = phis
        self.n_modes = len(phis)
        self.m = phis[0].shape[1]
        ones = np.ones((1, self.m))
        self.left: list = [None] * (self.n_modes + 1)
        self.right: list = [None] * (self.n_modes + 1)
        self.left[0] = ones
        self.right[self.n_modes] = ones.copy()
        self.left_valid = 0
        self.right_valid = self.n_modes

    @staticmethod
    def _push(prev: np.ndarray, core: np.ndarray, phi: np.ndarray, forward: bool) -> np.ndarray:
        # O(S R^2) per sample either way
        weighted = np.einsum("rsq,sm->rqm", core, phi, optimize=True)
        if forward:
            return np.einsum("rm,rqm->qm", prev, weighted, optimize=True)
        return np.einsum("rqm,qm->rm", weighted, prev, optimize=True)

    def rebuild_right(self, cores: list[np.ndarray]):
        for j in range(self.n_modes - 1, 0, -1):
            self.right[j] = self._push(self.right[j + 1], cores[j], self.phis[j], forward=False)
        self.right_valid = 1
        self.left_valid = 0

    def advance_left(self, cores: list[np.ndarray], k: int):
        """Refresh left[k+1] after core k settled; rights up to k+1 go stale."""
        if self.left_valid < k:
            raise RuntimeError(f"cannot advance: left cache stale at position {k}")
        self.left[k + 1] = self._push(self.left[k], cores[k], self.phis[k], forward=True)
        self.left_valid = k + 1
        self.right_valid = max(self.right_valid, k + 2)

    def advance_right(self, cores: list[np.ndarray], k: int):
        """Refresh right[k] after core k settled; lefts from k go stale."""
        if self.right_valid > k + 1:
            raise RuntimeError(f"cannot advance: right cache stale at position {k}")
        self.right[k] = self._push(self.right[k + 1], cores[k], self.phis[k], forward=False)
        self.right_valid = k
        self.left_valid = min(self.left_valid, k - 1)

    def design_matrix(self, k: int) -> np.ndarray:
        """M x (S_k R_{k-1} R_k) design for position k; columns run over
        (s, r_left, r_right) with s slowest, matching vec of the core's
        mode-2 unfolding."""
        if self.left_valid < k or self.right_valid > k + 1:
            raise RuntimeError(f"cache is stale for position {k}")
        phi = self.phis[k]
        lft = self.left[k]
        rgt = self.right[k + 1]
        p = np.einsum("sm,rm,qm->msrq", phi, lft, rgt, optimize=True)
        return p.reshape(self.m, -1)


def regularizer_gram(tt: TTTensor, k: int) -> np.ndarray:
    """L_k^T L_k for the position-k Frobenius regularizer, assembled from the
    interface Gram matrices without forming L_k."""
    gl, gr = tt.interface_grams(k)
    return np.kron(np.eye(tt.dims[k]), np.kron(gl, gr))


def regularizer_matrix(tt: TTTensor, k: int) -> np.ndarray:
    """Explicit L_k (row count is the product of the other mode sizes); for
    small trains and tests only."""
    left, right = tt.interfaces(k)
    return np.kron(np.eye(tt.dims[k]), np.kron(left, right))


def _theta_of(core: np.ndarray) -> np.ndarray:
    return core.transpose(1, 0, 2).ravel()


def _core_of(theta: np.ndarray, shape: tuple[int, int, int]) -> np.ndarray:
    rl, s, rr = shape
    return np.ascontiguousarray(theta.reshape(s, rl, rr).transpose(1, 0, 2))


def _robust_solve(p: np.ndarray, ltl: np.ndarray, y: np.ndarray, lam: float, m: int) -> np.ndarray:
    """Solve one ridge subproblem, preferring the pair factorization and
    falling back to (jittered) normal equations when it is unavailable."""
    try:
        if m >= p.shape[1]:
            return gsvd_solve(gsvd_from_gram(p, ltl), y, lam, m)
        return solve_direct_gram(p, ltl, y, lam, m)
    except (SingularMatrixPairError, SingularSystemError):
        return solve_direct_gram(p, ltl, y, lam, m, jitter=True)


def select_lambda(
    p: np.ndarray,
    ltl: np.ndarray,
    y: np.ndarray,
    p_val: np.ndarray,
    y_val: np.ndarray,
    exponents: tuple[int, int] = (-10, 10),
    gss_iters: int = 20,
    include_zero: bool = True,
) -> tuple[float, np.ndarray, dict]:
    """Pick the penalty weight with the lowest validation MSE.

    A coarse scan over the power-of-two grid brackets the optimum; golden-
    section search refines inside the bracketing exponents.  The pair is
    factored once and every candidate reuses it.  Ties go to the smaller
    penalty; the unregularized solution joins the shortlist when finite.
    """
    if p_val.shape[0] == 0:
        raise ValueError("validation split is empty")
    m = y.shape[0]
    factors = None
    projected = None
    try:
        factors = gsvd_from_gram(p, ltl)
        projected = factors.project(y)
    except (ValueError, SingularMatrixPairError):
        factors = None
    if factors is None:
        ptp = p.T @ p
        pty = p.T @ y

    def solve(lam: float) -> np.ndarray:
        if factors is not None:
            return gsvd_solve(factors, y, lam, m, projected=projected)
        try:
            return ridge_solve_precomputed(ptp, pty, ltl, lam, m)
        except SingularSystemError:
            return ridge_solve_precomputed(ptp, pty, ltl, lam, m, jitter=True)

    cache: dict[float, tuple[float, np.ndarray | None]] = {}

    def evaluate(lam: float) -> float:
        if lam in cache:
            return cache[lam][0]
        try:
            theta = solve(lam)
        except (SingularSystemError, SingularMatrixPairError):
            cache[lam] = (math.inf, None)
            return math.inf
        if not np.isfinite(theta).all():
            cache[lam] = (math.inf, None)
            return math.inf
        with np.errstate(invalid="ignore", over="ignore"):
            loss = float(np.mean((p_val @ theta - y_val) ** 2))
        if not math.isfinite(loss):
            loss = math.inf
        cache[lam] = (loss, theta)
        return loss

    lo_e, hi_e = exponents
    grid = list(range(int(lo_e), int(hi_e) + 1))
    losses = [evaluate(2.0**e) for e in grid]
    best_i = int(np.argmin(losses))
    if not math.isfinite(losses[best_i]):
        raise TrainingError("every penalty candidate produced a non-finite validation loss")

    a = float(grid[max(best_i - 1, 0)])
    b = float(grid[min(best_i + 1, len(grid) - 1)])
    if gss_iters >= 2 and b > a:
        c = b - _GOLDEN * (b - a)
        d = a + _GOLDEN * (b - a)
        fc = evaluate(2.0**c)
        fd = evaluate(2.0**d)
        for _ in range(max(gss_iters - 2, 0)):
            if fc < fd:
                b, d, fd = d, c, fc
                c = b - _GOLDEN * (b - a)
                fc = evaluate(2.0**c)
            else:
                a, c, fc = c, d, fd
                d = a + _GOLDEN * (b - a)
                fd = evaluate(2.0**d)
    if include_zero:
        evaluate(0.0)

    lam_best = min(cache, key=lambda lam: (cache[lam][0], lam))
    loss_best, theta_best = cache[lam_best]
    if theta_best is None:
        raise TrainingError("penalty selection found no finite solution")
    return lam_best, theta_best, {"val_loss": loss_best, "n_evals": len(cache)}


def orthogonalize_and_shift(tt: TTTensor, k: int, direction: str, max_rank: int | None = None) -> int:
    """QR-orthogonalize core k and absorb the triangular factor into the
    neighbor in the sweep direction; truncates to the numerical rank of the
    unfolding (capped by max_rank).  With full-rank truncation the
    represented tensor is unchanged.  Returns the retained rank."""
    core = tt.cores[k]
    rl, s, rr = core.shape
    if direction == "lr":
        if k >= tt.order - 1:
            raise ValueError("no right neighbor to absorb into")
        g3 = np.moveaxis(core, 2, 0).reshape(rr, rl * s)
        q, r_fac = thin_qr(g3.T)
        rank = max(1, int(np.linalg.matrix_rank(g3)))
        if max_rank is not None:
            rank = min(rank, max_rank)
        q_t = q[:, :rank].T  # rank x (rl*s), columns (r_left, s)
        tt.cores[k] = np.ascontiguousarray(q_t.reshape(rank, rl, s).transpose(1, 2, 0))
        nxt = tt.cores[k + 1]
        tt.cores[k + 1] = np.tensordot(r_fac[:rank, :], nxt, axes=(1, 0))
        return rank
    if direction == "rl":
        if k <= 0:
            raise ValueError("no left neighbor to absorb into")
        g1 = core.reshape(rl, s * rr)
        q, r_fac = thin_qr(g1.T)
        rank = max(1, int(np.linalg.matrix_rank(g1)))
        if max_rank is not None:
            rank = min(rank, max_rank)
        tt.cores[k] = np.ascontiguousarray(q[:, :rank].T.reshape(rank, s, rr))
        prev = tt.cores[k - 1]
        tt.cores[k - 1] = np.moveaxis(
            np.tensordot(r_fac[:rank, :], prev, axes=(1, 2)), 0, 2
        )
        return rank
    raise ValueError(f"unknown sweep direction {direction!r}")


def contract_predict(tt: TTTensor, phis: list[np.ndarray]) -> np.ndarray:
    """Predictions for encoded inputs by sweeping the train once; the weight
    tensor is never densified."""
    out = np.ones((1, phis[0].shape[1]))
    for core, phi in zip(tt.cores, phis):
        out = SweepCache._push(out, core, phi, forward=True)
    return out[0]


def _fit_tt(
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    config: TrainConfig,
    rng: np.random.Generator,
) -> tuple[TTTensor, FitReport]:
    """Alternating ridge sweeps over the cores with per-core penalty selection
    and best-validation snapshotting; inputs are already scaled/encoded-ready."""
    n_modes = x_train.shape[1]
    if n_modes < 2:
        raise ValueError("alternating sweeps need at least two input columns")
    if len(config.dims) != n_modes:
        raise ValueError("one feature dimension per input column is required")
    fmaps = [FeatureMap(config.feature_kind, s) for s in config.dims]
    tt = TTTensor.random(config.dims, config.max_rank, rng)
    if config.initial_right_orthogonalize:
        for k in range(tt.order - 1, 0, -1):
            orthogonalize_and_shift(tt, k, "rl", config.max_rank)

    phis_tr = [fm.encode_batch(x_train[:, j]) for j, fm in enumerate(fmaps)]
    phis_val = [fm.encode_batch(x_val[:, j]) for j, fm in enumerate(fmaps)]
    cache_tr = SweepCache(phis_tr)
    cache_val = SweepCache(phis_val)
    cache_tr.rebuild_right(tt.cores)
    cache_val.rebuild_right(tt.cores)

    m = y_train.shape[0]
    report = FitReport(model="tt", n_coefficients=tt.param_count())
    best_val = math.inf
    best_cores = None
    best_sweep = 0
    patience = max(1, math.ceil(config.patience_frac * config.max_sweeps))
    stale = 0
    start = time.perf_counter()

    def update_position(sweep: int, k: int, direction: str):
        p = cache_tr.design_matrix(k)
        p_val = cache_val.design_matrix(k)
        ltl = regularizer_gram(tt, k)
        if config.fixed_lambda is not None:
            lam = float(config.fixed_lambda)
            theta = _robust_solve(p, ltl, y_train, lam, m)
        else:
            lam, theta, _ = select_lambda(
                p, ltl, y_train, p_val, y_val,
                exponents=config.lambda_exponents,
                gss_iters=config.gss_iters,
                include_zero=config.include_zero_lambda,
            )
        tt.cores[k] = _core_of(theta, tt.cores[k].shape)
        train_mse = float(np.mean((p @ theta - y_train) ** 2))
        val_mse = float(np.mean((p_val @ theta - y_val) ** 2))
        orthogonalize_and_shift(tt, k, direction, config.max_rank)
        if direction == "lr":
            cache_tr.advance_left(tt.cores, k)
            cache_val.advance_left(tt.cores, k)
        else:
            cache_tr.advance_right(tt.cores, k)
            cache_val.advance_right(tt.cores, k)
        report.history.append(FitRecord(sweep, k, lam, train_mse, val_mse))
        return train_mse, val_mse

    for sweep in range(1, config.max_sweeps + 1):
        for k in range(0, n_modes - 1):
            train_mse, val_mse = update_position(sweep, k, "lr")
        for k in range(n_modes - 1, 0, -1):
            train_mse, val_mse = update_position(sweep, k, "rl")
        report.train_curve.append(train_mse)
        report.val_curve.append(val_mse)
        report.n_iterations = sweep
        if val_mse < best_val:
            best_val = val_mse
            best_cores = [c.copy() for c in tt.cores]
            best_sweep = sweep
        if sweep > 1:
            prev = report.val_curve[-2]
            rel = (prev - val_mse) / prev if prev > 0 else 0.0
            stale = stale + 1 if rel < config.tol else 0
        if stale >= patience:
            break

    if best_cores is not None:
        tt = TTTensor(best_cores, copy=False)
    report.best_iteration = best_sweep
    report.effective_ranks = tt.ranks
    report.wall_time = time.perf_counter() - start
    return tt, report


def _safe_report(y: np.ndarray, y_hat: np.ndarray) -> MetricReport:
    try:
        return compute_report(y, y_hat)
    except ValueError:
        return MetricReport(
            mse=float(np.mean((np.asarray(y) - np.asarray(y_hat)) ** 2)),
            score=math.nan, spcc=math.nan, r_squared=math.nan,
            fit_slope=math.nan, fit_intercept=math.nan,
        )


class TTRegressor(RegressorMixin, BaseEstimator):
    """Multilinear ridge regression with train-format weights.

    Each of the N input columns is lifted through a small feature map; the
    weight tensor over the product feature space is stored as a rank-capped
    train and fitted by alternating per-core ridge solves.

    Parameters
    ----------
    n_basis : int or sequence of int
        Output length of the per-input feature map (polynomial degree + 1).
    max_rank : int
        Cap on the train ranks; actual bonds are also clamped by the mode
        sizes, so the coefficient budget follows the published counts.
    feature_map : {"polynomial", "exponential"}
    lambda_exponents : (int, int)
        Inclusive base-2 exponent range scanned for the ridge weight.
    include_zero_lambda : bool
        Also let the unregularized solution compete on validation loss.
    gss_iters : int
        Evaluations spent refining the penalty inside the winning bracket.
    max_sweeps, tol, patience_frac
        Early stopping: quit once the relative validation improvement stays
        below ``tol`` for ``patience_frac`` of the sweep budget.
    fixed_lambda : float or None
        Skip selection and use this penalty everywhere (0 allowed).
    val_fraction : float
        Fraction of the training data carved out for validation when no
        explicit validation split is passed to :meth:`fit`.
    scale_inputs, scale_target : bool
        Min-max scale columns (fitted on the training split only).
    scale_range : (float, float)
        Target range of the input scaling; shift it to positive values when
        using the exponential feature map.
    random_state : int or None
    """

    def __init__(
        self,
        n_basis=3,
        max_rank=4,
        feature_map="polynomial",
        lambda_exponents=(-10, 10),
        include_zero_lambda=True,
        gss_iters=20,
        max_sweeps=12,
        tol=1e-6,
        patience_frac=0.2,
        fixed_lambda=None,
        val_fraction=0.2,
        scale_inputs=True,
        scale_target=True,
        scale_range=(-1.0, 1.0),
        random_state=None,
    ):
        self.n_basis = n_basis
        self.max_rank = max_rank
        self.feature_map = feature_map
        self.lambda_exponents = lambda_exponents
        self.include_zero_lambda = include_zero_lambda
        self.gss_iters = gss_iters
        self.max_sweeps = max_sweeps
        self.tol = tol
        self.patience_frac = patience_frac
        self.fixed_lambda = fixed_lambda
        self.val_fraction = val_fraction
        self.scale_inputs = scale_inputs
        self.scale_target = scale_target
        self.scale_range = scale_range
        self.random_state = random_state

    def _dims(self, n_features: int) -> tuple[int, ...]:
        if np.isscalar(self.n_basis):
            return (int(self.n_basis),) * n_features
        dims = tuple(int(s) for s in self.n_basis)
        if len(dims) != n_features:
            raise ValueError(f"n_basis has {len(dims)} entries for {n_features} features")
        return dims

    def fit(self, X, y, X_val=None, y_val=None, X_test=None, y_test=None):
        """Fit on (X, y); an explicit validation split drives penalty
        selection and early stopping, otherwise one is carved out of (X, y).
        An optional test split is only evaluated for the report."""
        X, y = check_X_y(X, y, y_numeric=True)
        rng = np.random.default_rng(self.random_state)
        if X_val is None:
            if y_val is not None:
                raise ValueError("y_val given without X_val")
            n_val = max(1, int(round(self.val_fraction * X.shape[0])))
            if n_val >= X.shape[0]:
                raise ValueError("not enough samples to carve out a validation split")
            perm = rng.permutation(X.shape[0])
            X, X_val = X[perm[n_val:]], X[perm[:n_val]]
            y, y_val = y[perm[n_val:]], y[perm[:n_val]]
        else:
            X_val, y_val = check_X_y(X_val, y_val, y_numeric=True)

        self.n_features_in_ = X.shape[1]
        dims = self._dims(self.n_features_in_)
        config = TrainConfig(
            dims=dims,
            max_rank=int(self.max_rank),
            feature_kind=self.feature_map,
            lambda_exponents=tuple(self.lambda_exponents),
            include_zero_lambda=self.include_zero_lambda,
            gss_iters=int(self.gss_iters),
            max_sweeps=int(self.max_sweeps),
            tol=float(self.tol),
            patience_frac=float(self.patience_frac),
            fixed_lambda=self.fixed_lambda,
        )

        degenerate = bool(np.ptp(y) == 0.0)
        self.scaler_x_ = Scaler(self.scale_range).fit(X) if self.scale_inputs else None
        self.scaler_y_ = None
        if self.scale_target and not degenerate:
            self.scaler_y_ = Scaler().fit(y)

        if degenerate:
            # constant target: fixed mean predictor, flagged in the report
            self.tt_ = _constant_tt(dims, float(y[0]))
            self.feature_maps_ = [FeatureMap(self.feature_map, s) for s in dims]
            report = FitReport(model="tt", n_coefficients=self.tt_.param_count())
            report.extra["degenerate_target"] = True
            report.effective_ranks = self.tt_.ranks
            self.report_ = report
        else:
            xs = self._scale_x(X)
            xs_val = self._scale_x(X_val)
            ys = self._scale_y(y)
            ys_val = self._scale_y(y_val)
            self.tt_, self.report_ = _fit_tt(xs, ys, xs_val, ys_val, config, rng)
            self.feature_maps_ = [FeatureMap(self.feature_map, s) for s in dims]

        splits = {"train": (X, y), "val": (X_val, y_val)}
        if X_test is not None:
            splits["test"] = (check_array(X_test), np.asarray(y_test, dtype=float))
        for name, (xs_raw, ys_raw) in splits.items():
            self.report_.metrics[name] = _safe_report(ys_raw, self.predict(xs_raw))
        return self

    def _scale_x(self, X):
        return self.scaler_x_.transform(X) if self.scaler_x_ is not None else np.asarray(X, float)

    def _scale_y(self, y):
        return self.scaler_y_.transform(y) if self.scaler_y_ is not None else np.asarray(y, float)

    def predict(self, X):
        check_is_fitted(self, "tt_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        xs = self._scale_x(X)
        phis = [fm.encode_batch(xs[:, j]) for j, fm in enumerate(self.feature_maps_)]
        y_hat = contract_predict(self.tt_, phis)
        if self.scaler_y_ is not None:
            y_hat = self.scaler_y_.inverse_transform(y_hat)
        return y_hat


def _constant_tt(dims: tuple[int, ...], value: float) -> TTTensor:
    cores = []
    for j, s in enumerate(dims):
        core = np.zeros((1, s, 1))
        core[0, 0, 0] = value if j == 0 else 1.0
        cores.append(core)
    return TTTensor(cores, copy=False)
