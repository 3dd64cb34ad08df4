"""Regression evaluation metrics and the prediction-vs-target line fit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "mse",
    "explained_variance",
    "spcc",
    "r_squared",
    "fit_line",
    "MetricReport",
    "compute_report",
]


def _pair(y, y_hat):
    y = np.asarray(y, dtype=float).ravel()
    y_hat = np.asarray(y_hat, dtype=float).ravel()
    if y.shape != y_hat.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {y_hat.shape}")
    if y.size == 0:
        raise ValueError("empty input")
    return y, y_hat


def mse(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    return float(np.mean((y - y_hat) ** 2))


def explained_variance(y, y_hat) -> float:
    """1 - var(residual)/var(target), with unbiased sample variances.
    Insensitive to a constant bias in the predictions."""
    y, y_hat = _pair(y, y_hat)
    if y.size < 2:
        raise ValueError("need at least two samples")
    vy = np.var(y, ddof=1)
    if vy == 0.0:
        raise ValueError("target has zero variance")
    return float(1.0 - np.var(y - y_hat, ddof=1) / vy)


def spcc(y, y_hat) -> float:
    """Sample Pearson correlation coefficient between targets and predictions."""
    y, y_hat = _pair(y, y_hat)
    yc = y - y.mean()
    hc = y_hat - y_hat.mean()
    ny = np.linalg.norm(yc)
    nh = np.linalg.norm(hc)
    if ny == 0.0 or nh == 0.0:
        raise ValueError("zero variance in targets or predictions")
    return float(np.dot(yc, hc) / (ny * nh))


def r_squared(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("target has zero variance")
    ss_res = float(np.sum((y - y_hat) ** 2))
    return 1.0 - ss_res / ss_tot


def fit_line(y, y_hat) -> tuple[float, float]:
    """Least-squares line y_hat ~ m*y + b; (1, 0) for perfect predictions."""
    y, y_hat = _pair(y, y_hat)
    yc = y - y.mean()
    denom = float(np.dot(yc, yc))
    if denom == 0.0:
        raise ValueError("target has zero variance")
    m = float(np.dot(yc, y_hat - y_hat.mean()) / denom)
    b = float(y_hat.mean() - m * y.mean())
    return m, b


@dataclass
class MetricReport:
    mse: float
    score: float
    spcc: float
    r_squared: float
    fit_slope: float
    fit_intercept: float

    def as_dict(self) -> dict[str, float]:
        return {
            "mse": self.mse,
            "score": self.score,
            "spcc": self.spcc,
            "r_squared": self.r_squared,
            "fit_slope": self.fit_slope,
            "fit_intercept": self.fit_intercept,
        }


def compute_report(y, y_hat) -> MetricReport:
    m, b = fit_line(y, y_hat)
    return MetricReport(
        mse=mse(y, y_hat),
        score=explained_variance(y, y_hat),
        spcc=spcc(y, y_hat),
        r_squared=r_squared(y, y_hat),
        fit_slope=m,
        fit_intercept=b,
    )
