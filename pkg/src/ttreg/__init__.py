"""Tensor-train multilinear regression toolkit: compressed weight tensors
fitted by alternating ridge sweeps, an MLP baseline, and an experiment
harness for chaotic-series and network-recovery studies."""

__version__ = "0.1.0"

from ttreg.features import FeatureMap, Scaler
from ttreg.metrics import MetricReport, compute_report
from ttreg.mlp import AdamState, Mlp, MLPBaseline
from ttreg.regressor import TTRegressor
from ttreg.report import FitRecord, FitReport
from ttreg.tt_tensor import TTTensor, clamp_ranks

__all__ = [
    "AdamState",
    "FeatureMap",
    "FitRecord",
    "FitReport",
    "MetricReport",
    "Mlp",
    "MLPBaseline",
    "Scaler",
    "TTRegressor",
    "TTTensor",
    "clamp_ranks",
    "compute_report",
    "__version__",
]
