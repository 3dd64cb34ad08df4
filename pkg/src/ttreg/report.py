"""Training-run record shared by the tensor-train trainer and the MLP baseline."""

from __future__ import annotations

from dataclasses import dataclass, field

from ttreg.metrics import MetricReport

__all__ = ["FitRecord", "FitReport"]


@dataclass
class FitRecord:
    """One solved subproblem: a core update (TT) or an epoch (MLP)."""

    sweep: int
    position: int | None
    penalty: float
    train_mse: float
    val_mse: float


@dataclass
class FitReport:
    model: str
    n_coefficients: int
    history: list[FitRecord] = field(default_factory=list)
    train_curve: list[float] = field(default_factory=list)
    val_curve: list[float] = field(default_factory=list)
    best_iteration: int = 0
    n_iterations: int = 0
    effective_ranks: tuple[int, ...] | None = None
    metrics: dict[str, MetricReport] = field(default_factory=dict)
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_text(self) -> str:
        """One row per solved subproblem: sweep, core, penalty, train/val MSE."""
        lines = ["sweep,core,penalty,train_mse,val_mse"]
        for rec in self.history:
            core = "" if rec.position is None else str(rec.position)
            lines.append(
                f"{rec.sweep},{core},{rec.penalty:.10g},"
                f"{rec.train_mse:.10e},{rec.val_mse:.10e}"
            )
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_text())
