"""One-hidden-layer perceptron baseline trained by full-batch gradient
descent or Adam (without the bias-corrected step), with the same
early-stopping rule and report format as the tensor-train trainer."""

from __future__ import annotations

import math
import time

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ttreg.features import Scaler
from ttreg.regressor import _GOLDEN, _safe_report
from ttreg.report import FitRecord, FitReport

__all__ = ["Mlp", "AdamState", "MLPBaseline"]


class Mlp:
    """(N - H - 1) network: y = w2 . act(W1 x + b1) + b2."""

    def __init__(self, w1, b1, w2, b2, activation="relu"):
        if activation not in ("relu", "tanh"):
            raise ValueError(f"unknown activation {activation!r}")
        self.w1 = np.asarray(w1, dtype=float)
        self.b1 = np.asarray(b1, dtype=float)
        self.w2 = np.asarray(w2, dtype=float)
        self.b2 = float(np.asarray(b2).reshape(-1)[0]) if np.ndim(b2) else float(b2)
        self.activation = activation

    @classmethod
    def init(cls, n_inputs: int, hidden: int, activation: str, rng) -> "Mlp":
        """Weights uniform in [-1/sqrt(fan-in), 1/sqrt(fan-in)], biases zero."""
        rng = np.random.default_rng(rng)
        d1 = 1.0 / math.sqrt(n_inputs)
        d2 = 1.0 / math.sqrt(hidden)
        return cls(
            w1=rng.uniform(-d1, d1, size=(hidden, n_inputs)),
            b1=np.zeros(hidden),
            w2=rng.uniform(-d2, d2, size=hidden),
            b2=0.0,
            activation=activation,
        )

    @classmethod
    def random_teacher(cls, n_inputs: int, hidden: int, activation: str, rng, sd: float = 2.0) -> "Mlp":
        """Network with all weights and biases drawn N(0, sd^2)."""
        rng = np.random.default_rng(rng)
        return cls(
            w1=rng.normal(0.0, sd, size=(hidden, n_inputs)),
            b1=rng.normal(0.0, sd, size=hidden),
            w2=rng.normal(0.0, sd, size=hidden),
            b2=rng.normal(0.0, sd),
            activation=activation,
        )

    def param_count(self) -> int:
        return self.w1.size + self.b1.size + self.w2.size + 1

    def params(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, np.atleast_1d(np.float64(self.b2))]

    def set_params(self, params):
        self.w1, self.b1, self.w2 = params[0], params[1], params[2]
        self.b2 = float(params[3][0])

    def hidden_pre_activation(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.w1.T + self.b1

    def forward(self, x: np.ndarray) -> np.ndarray:
        z = self.hidden_pre_activation(x)
        h = np.maximum(z, 0.0) if self.activation == "relu" else np.tanh(z)
        return h @ self.w2 + self.b2

    def backward(self, x: np.ndarray, y: np.ndarray):
        """Squared-error loss and its gradients w.r.t. all parameters."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        m = x.shape[0]
        z = self.hidden_pre_activation(x)
        if self.activation == "relu":
            h = np.maximum(z, 0.0)
            dact = (z > 0.0).astype(float)
        else:
            h = np.tanh(z)
            dact = 1.0 - h * h
        y_hat = h @ self.w2 + self.b2
        err = y_hat - y
        loss = float(np.mean(err**2))
        e = (2.0 / m) * err
        g_b2 = float(e.sum())
        g_w2 = h.T @ e
        dz = (e[:, None] * self.w2[None, :]) * dact
        g_b1 = dz.sum(axis=0)
        g_w1 = dz.T @ x
        return loss, [g_w1, g_b1, g_w2, np.atleast_1d(g_b2)]


class AdamState:
    """Moment accumulators for Adam; the bias-corrected step is off by
    default, matching the variant used for the stochastic baselines."""

    def __init__(self, shapes, alpha=0.001, beta1=0.9, beta2=0.99, eps=1e-8, debias=False):
        self.alpha = alpha
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.debias = debias
        self.t = 0
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]):
        self.t += 1
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            if self.debias:
                m_hat = m / (1.0 - self.beta1**self.t)
                v_hat = v / (1.0 - self.beta2**self.t)
            else:
                m_hat, v_hat = m, v
            p -= self.alpha * m_hat / (np.sqrt(v_hat) + self.eps)


def _sgd_step(params, grads, lr):
    for p, g in zip(params, grads):
        p -= lr * g


class MLPBaseline(RegressorMixin, BaseEstimator):
    """Full-batch single-hidden-layer MLP regressor.

    With ``optimizer="sgd"`` and ``learning_rate=None`` the step size is
    tuned on the validation loss by a coarse power-of-two scan plus
    golden-section refinement, each candidate probed with a short training
    run from the same initial weights.  ``optimizer="adam"`` uses the fixed
    default step with no bias-correction (``adam_debias`` restores it).
    """

    def __init__(
        self,
        hidden_units=15,
        activation="relu",
        optimizer="sgd",
        learning_rate=None,
        max_epochs=2000,
        tol=1e-6,
        patience_frac=0.2,
        lr_exponents=(-10, 10),
        gss_iters=12,
        probe_epochs=None,
        adam_alpha=0.001,
        adam_beta1=0.9,
        adam_beta2=0.99,
        adam_eps=1e-8,
        adam_debias=False,
        val_fraction=0.2,
        scale_inputs=True,
        scale_target=True,
        random_state=None,
    ):
        self.hidden_units = hidden_units
        self.activation = activation
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.max_epochs = max_epochs
        self.tol = tol
        self.patience_frac = patience_frac
        self.lr_exponents = lr_exponents
        self.gss_iters = gss_iters
        self.probe_epochs = probe_epochs
        self.adam_alpha = adam_alpha
        self.adam_beta1 = adam_beta1
        self.adam_beta2 = adam_beta2
        self.adam_eps = adam_eps
        self.adam_debias = adam_debias
        self.val_fraction = val_fraction
        self.scale_inputs = scale_inputs
        self.scale_target = scale_target
        self.random_state = random_state

    def _train(self, net, xs, ys, xs_val, ys_val, lr, n_epochs, record=None):
        """Gradient epochs with best-validation snapshotting; returns the best
        (val_mse, params) pair and whether training diverged."""
        params = [p.copy() for p in net.params()]
        work = Mlp(*params, activation=net.activation)
        adam = None
        if self.optimizer == "adam":
            adam = AdamState(
                [p.shape for p in params],
                alpha=lr,
                beta1=self.adam_beta1,
                beta2=self.adam_beta2,
                eps=self.adam_eps,
                debias=self.adam_debias,
            )
        patience = max(1, math.ceil(self.patience_frac * n_epochs))
        best_val = math.inf
        best_params = [p.copy() for p in params]
        best_epoch = 0
        val_prev = None
        stale = 0
        epochs_run = 0
        diverged = False
        for epoch in range(1, n_epochs + 1):
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads = work.backward(xs, ys)
                if not math.isfinite(loss):
                    diverged = True
                    break
                if adam is not None:
                    adam.step(params, grads)
                else:
                    _sgd_step(params, grads, lr)
                work.set_params(params)
                train_mse = float(np.mean((work.forward(xs) - ys) ** 2))
                val_mse = float(np.mean((work.forward(xs_val) - ys_val) ** 2))
            epochs_run = epoch
            if not math.isfinite(train_mse) or not math.isfinite(val_mse):
                diverged = True
                break
            if record is not None:
                record(epoch, lr, train_mse, val_mse)
            if val_mse < best_val:
                best_val = val_mse
                best_params = [p.copy() for p in params]
                best_epoch = epoch
            if val_prev is not None:
                rel = (val_prev - val_mse) / val_prev if val_prev > 0 else 0.0
                stale = stale + 1 if rel < self.tol else 0
                if stale >= patience:
                    break
            val_prev = val_mse
        return best_val, best_params, best_epoch, epochs_run, diverged

    def _select_learning_rate(self, net, xs, ys, xs_val, ys_val) -> float:
        n_probe = self.probe_epochs
        if n_probe is None:
            n_probe = min(100, int(self.max_epochs))
        cache: dict[float, float] = {}

        def probe(exponent: float) -> float:
            if exponent in cache:
                return cache[exponent]
            best_val, _, _, _, diverged = self._train(
                net, xs, ys, xs_val, ys_val, 2.0**exponent, n_probe
            )
            loss = math.inf if diverged else best_val
            cache[exponent] = loss
            return loss

        lo, hi = self.lr_exponents
        grid = list(range(int(lo), int(hi) + 1))
        losses = [probe(float(e)) for e in grid]
        best_i = int(np.argmin(losses))
        if not math.isfinite(losses[best_i]):
            raise RuntimeError("every learning-rate candidate diverged")
        a = float(grid[max(best_i - 1, 0)])
        b = float(grid[min(best_i + 1, len(grid) - 1)])
        if self.gss_iters >= 2 and b > a:
            c = b - _GOLDEN * (b - a)
            d = a + _GOLDEN * (b - a)
            fc, fd = probe(c), probe(d)
            for _ in range(max(self.gss_iters - 2, 0)):
                if fc < fd:
                    b, d, fd = d, c, fc
                    c = b - _GOLDEN * (b - a)
                    fc = probe(c)
                else:
                    a, c, fc = c, d, fd
                    d = a + _GOLDEN * (b - a)
                    fd = probe(d)
        winner = min(cache, key=lambda e: (cache[e], e))
        return 2.0**winner

    def fit(self, X, y, X_val=None, y_val=None, X_test=None, y_test=None):
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
        degenerate = bool(np.ptp(y) == 0.0)
        self.scaler_x_ = Scaler().fit(X) if self.scale_inputs else None
        self.scaler_y_ = None
        if self.scale_target and not degenerate:
            self.scaler_y_ = Scaler().fit(y)

        xs = self._scale_x(X)
        xs_val = self._scale_x(X_val)
        ys = self._scale_y(y)
        ys_val = self._scale_y(y_val)

        net = Mlp.init(self.n_features_in_, int(self.hidden_units), self.activation, rng)
        report = FitReport(model="mlp", n_coefficients=net.param_count())
        start = time.perf_counter()

        if degenerate:
            net.w1 = np.zeros_like(net.w1)
            net.w2 = np.zeros_like(net.w2)
            net.b2 = float(y[0])
            report.extra["degenerate_target"] = True
        else:
            if self.optimizer == "sgd":
                lr = self.learning_rate
                if lr is None:
                    lr = self._select_learning_rate(net, xs, ys, xs_val, ys_val)
                report.extra["learning_rate"] = lr
            elif self.optimizer == "adam":
                lr = self.adam_alpha if self.learning_rate is None else self.learning_rate
                report.extra["learning_rate"] = lr
            else:
                raise ValueError(f"unknown optimizer {self.optimizer!r}")

            def record(epoch, lr_, train_mse, val_mse):
                report.history.append(FitRecord(epoch, None, lr_, train_mse, val_mse))
                report.train_curve.append(train_mse)
                report.val_curve.append(val_mse)

            best_val, best_params, best_epoch, epochs_run, diverged = self._train(
                net, xs, ys, xs_val, ys_val, lr, int(self.max_epochs), record=record
            )
            net.set_params(best_params)
            report.best_iteration = best_epoch
            report.n_iterations = epochs_run
            if diverged:
                report.extra["diverged"] = True

        report.wall_time = time.perf_counter() - start
        self.net_ = net
        self.report_ = report
        splits = {"train": (X, y), "val": (X_val, y_val)}
        if X_test is not None:
            splits["test"] = (check_array(X_test), np.asarray(y_test, dtype=float))
        for name, (xr, yr) in splits.items():
            report.metrics[name] = _safe_report(yr, self.predict(xr))
        return self

    def _scale_x(self, X):
        return self.scaler_x_.transform(X) if self.scaler_x_ is not None else np.asarray(X, float)

    def _scale_y(self, y):
        return self.scaler_y_.transform(y) if self.scaler_y_ is not None else np.asarray(y, float)

    def predict(self, X):
        check_is_fitted(self, "net_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        y_hat = self.net_.forward(self._scale_x(X))
        if self.scaler_y_ is not None:
            y_hat = self.scaler_y_.inverse_transform(y_hat)
        return y_hat
