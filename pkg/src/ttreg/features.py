"""Scalar-to-vector feature encodings and min-max input scaling.

Each input coordinate is lifted independently: ``polynomial`` produces the
Vandermonde row (1, x, x^2, ..., x^(S-1)); ``exponential`` produces
(1, x, log x) and therefore needs strictly positive inputs.
"""

from __future__ import annotations

import numpy as np

__all__ = ["FeatureMap", "Scaler"]


class FeatureMap:
    """Encoding of one scalar input into a length-``size`` feature vector."""

    KINDS = ("polynomial", "exponential")

    def __init__(self, kind: str = "polynomial", size: int = 3):
        if kind not in self.KINDS:
            raise ValueError(f"unknown feature map kind {kind!r}")
        if size < 1:
            raise ValueError("feature size must be >= 1")
        if kind == "exponential" and size != 3:
            raise ValueError("exponential map is defined for size 3 only")
        self.kind = kind
        self.size = size

    def encode(self, x: float) -> np.ndarray:
        return self.encode_batch(np.asarray([x], dtype=float))[:, 0]

    def encode_batch(self, column: np.ndarray) -> np.ndarray:
        """Encode a length-M column into the size x M feature matrix whose
        m-th column is the encoding of entry m."""
        column = np.asarray(column, dtype=float).ravel()
        m = column.shape[0]
        if self.kind == "polynomial":
            out = np.empty((self.size, m))
            out[0] = 1.0
            for j in range(1, self.size):
                out[j] = out[j - 1] * column
            return out
        bad = np.flatnonzero(column <= 0.0)
        if bad.size:
            raise ValueError(
                f"exponential map needs positive inputs; first offending row: {bad[0]}"
            )
        return np.vstack([np.ones(m), column, np.log(column)])

    def __repr__(self):
        return f"FeatureMap(kind={self.kind!r}, size={self.size})"


class Scaler:
    """Per-column affine map sending the training min/max onto a fixed range.

    Fit on the training split only; validation/test values outside the
    training range map outside the target range (no clipping).
    """

    def __init__(self, feature_range: tuple[float, float] = (-1.0, 1.0)):
        lo, hi = feature_range
        if not hi > lo:
            raise ValueError("feature_range must be increasing")
        self.feature_range = (float(lo), float(hi))
        self.data_min_ = None
        self.data_max_ = None

    def fit(self, x: np.ndarray) -> "Scaler":
        x = np.asarray(x, dtype=float)
        self.data_min_ = x.min(axis=0)
        self.data_max_ = x.max(axis=0)
        degenerate = np.flatnonzero(np.atleast_1d(self.data_max_ == self.data_min_))
        if degenerate.size:
            raise ValueError(f"constant column(s) {degenerate.tolist()} cannot be scaled")
        return self

    def _check_fitted(self):
        if self.data_min_ is None:
            raise RuntimeError("scaler has not been fitted")

    def transform(self, x: np.ndarray) -> np.ndarray:
        self._check_fitted()
        x = np.asarray(x, dtype=float)
        lo, hi = self.feature_range
        scale = (hi - lo) / (self.data_max_ - self.data_min_)
        return lo + (x - self.data_min_) * scale

    def inverse_transform(self, x: np.ndarray) -> np.ndarray:
        self._check_fitted()
        x = np.asarray(x, dtype=float)
        lo, hi = self.feature_range
        scale = (self.data_max_ - self.data_min_) / (hi - lo)
        return self.data_min_ + (x - lo) * scale

    def fit_transform(self, x: np.ndarray) -> np.ndarray:
        return self.fit(x).transform(x)
