"""Configuration-driven experiment runner.

Reads an INI config with one ``[experiment]`` section and one section per
model (``[tt...]`` / ``[mlp...]``), dispatches seeded Monte-Carlo trials to a
worker pool, and writes aggregate tables, per-trial records, convergence
traces, and a JSON run manifest.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ttreg import __version__
from ttreg.data import build_windows, ingest_csv, mackey_glass, split_indices, teacher_mlp_data
from ttreg.mlp import MLPBaseline
from ttreg.regressor import TTRegressor, contract_predict
from ttreg.features import FeatureMap
from ttreg.metrics import fit_line
from ttreg.tt_tensor import TTTensor

__all__ = [
    "ExperimentError",
    "ModelSpec",
    "ExperimentConfig",
    "parse_config",
    "run_experiment",
    "write_experiment_outputs",
    "write_comparison",
    "EXPERIMENT_KINDS",
    "FULL_TRIALS",
]

EXPERIMENT_KINDS = ("recover-mlp", "mackey-glass", "csv-forecast", "planted-tt")
FULL_TRIALS = {"recover-mlp": 100, "mackey-glass": 400, "csv-forecast": 200, "planted-tt": 20}
SPLITS = ("train", "val", "test")
METRIC_KEYS = ("mse", "score", "spcc", "r_squared", "fit_slope", "fit_intercept")


class ExperimentError(RuntimeError):
    pass


@dataclass
class ModelSpec:
    name: str
    family: str  # "tt" | "mlp"
    params: dict

    def build(self, random_state):
        if self.family == "tt":
            return TTRegressor(**self.params, random_state=random_state)
        if self.family == "mlp":
            return MLPBaseline(**self.params, random_state=random_state)
        raise ExperimentError(f"unknown model family {self.family!r}")


@dataclass
class ExperimentConfig:
    kind: str
    trials: int = 20
    seed: int = 0
    data: dict = field(default_factory=dict)
    models: list[ModelSpec] = field(default_factory=list)
    raw_text: str = ""

    def content_hash(self) -> str:
        return hashlib.sha256(self.raw_text.encode()).hexdigest()


def _coerce(value: str):
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    low = value.strip().lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    return value


def parse_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    with open(path) as fh:
        text = fh.read()
    parser.read_string(text)
    if "experiment" not in parser:
        raise ExperimentError("config needs an [experiment] section")
    exp = {k: _coerce(v) for k, v in parser["experiment"].items()}
    kind = exp.pop("kind", None)
    if kind not in EXPERIMENT_KINDS:
        raise ExperimentError(f"experiment kind must be one of {EXPERIMENT_KINDS}, got {kind!r}")
    trials = int(exp.pop("trials", 20))
    seed = int(exp.pop("seed", 0))
    if trials < 1:
        raise ExperimentError("trials must be >= 1")
    models = []
    for section in parser.sections():
        if section == "experiment":
            continue
        family = section.split(".", 1)[0].split(":", 1)[0].strip().lower()
        if family not in ("tt", "mlp"):
            raise ExperimentError(f"model section [{section}] must start with tt or mlp")
        params = {k: _coerce(v) for k, v in parser[section].items()}
        models.append(ModelSpec(name=section, family=family, params=params))
    if not models:
        raise ExperimentError("config defines no model sections")
    if kind == "csv-forecast":
        csv_path = exp.get("csv")
        if not csv_path:
            raise ExperimentError("csv-forecast needs a csv= path in [experiment]")
        if not os.path.exists(csv_path):
            raise ExperimentError(f"csv file not found: {csv_path}")
    return ExperimentConfig(kind=kind, trials=trials, seed=seed, data=exp,
                            models=models, raw_text=text)


def _scale_to_unit(series: np.ndarray) -> tuple[np.ndarray, float, float]:
    lo, hi = float(series.min()), float(series.max())
    if hi == lo:
        raise ExperimentError("series is constant; nothing to scale")
    return 2.0 * (series - lo) / (hi - lo) - 1.0, lo, hi


def _prepare(kind: str, data: dict) -> dict:
    """One-time data work shared by all trials (deterministic)."""
    prep = dict(data)
    if kind == "mackey-glass":
        series = mackey_glass(
            n_samples=int(data.get("n_samples", 1000)),
            tau=float(data.get("tau", 17.0)),
            dt=float(data.get("dt", 1.0)),
            discard=int(data.get("discard", 100)),
        )
        scaled, lo, hi = _scale_to_unit(series)
        prep.update(series=scaled, series_lo=lo, series_hi=hi,
                    spacing=int(data.get("spacing", 6)),
                    horizon=int(data.get("horizon", 6)),
                    n_lags=int(data.get("n_lags", 4)),
                    noise_sd=float(data.get("noise_sd", 0.0)))
    elif kind == "csv-forecast":
        loaded = ingest_csv(
            data["csv"],
            date_column=str(data.get("date_column", "date")),
            close_column=str(data.get("close_column", "close")),
        )
        scaled, lo, hi = _scale_to_unit(loaded.values)
        prep.update(series=scaled, series_lo=lo, series_hi=hi,
                    n_dropped=loaded.n_dropped,
                    spacing=int(data.get("spacing", 1)),
                    horizon=int(data.get("horizon", 1)),
                    n_lags=int(data.get("n_lags", 4)),
                    noise_sd=0.0)
    elif kind == "recover-mlp":
        prep.update(n_samples=int(data.get("n_samples", 10000)),
                    n_inputs=int(data.get("n_inputs", 10)),
                    hidden=int(data.get("hidden", 200)),
                    activation=str(data.get("activation", "tanh")),
                    weight_sd=float(data.get("weight_sd", 2.0)))
    elif kind == "planted-tt":
        prep.update(n_samples=int(data.get("n_samples", 2000)),
                    n_inputs=int(data.get("n_inputs", 4)),
                    teacher_basis=int(data.get("teacher_basis", 3)),
                    teacher_rank=int(data.get("teacher_rank", 2)))
    else:
        raise ExperimentError(f"unknown experiment kind {kind!r}")
    return prep


def _trial_xy(kind: str, prep: dict, base_seed: int, trial: int):
    if kind in ("mackey-glass", "csv-forecast"):
        series = prep["series"]
        if prep["noise_sd"] > 0.0:
            noise = np.random.default_rng([base_seed, trial, 3]).normal(
                0.0, prep["noise_sd"], size=series.size
            )
            series = series + noise
        return build_windows(series, n_lags=prep["n_lags"],
                             spacing=prep["spacing"], horizon=prep["horizon"])
    if kind == "recover-mlp":
        x, y, _ = teacher_mlp_data(
            n_samples=prep["n_samples"], n_inputs=prep["n_inputs"],
            hidden=prep["hidden"], activation=prep["activation"],
            weight_sd=prep["weight_sd"], seed=[base_seed, trial, 0],
        )
        return x, y
    if kind == "planted-tt":
        rng = np.random.default_rng([base_seed, trial, 0])
        dims = (prep["teacher_basis"],) * prep["n_inputs"]
        teacher = TTTensor.random(dims, prep["teacher_rank"], rng)
        teacher.cores[0] = teacher.cores[0] * 10.0
        x = rng.uniform(-1.0, 1.0, size=(prep["n_samples"], prep["n_inputs"]))
        phis = [FeatureMap("polynomial", s).encode_batch(x[:, j]) for j, s in enumerate(dims)]
        return x, contract_predict(teacher, phis)
    raise ExperimentError(f"unknown experiment kind {kind!r}")


def _unscale(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    return lo + (np.asarray(values) + 1.0) * (hi - lo) / 2.0


def run_trial(kind: str, prep: dict, spec: ModelSpec, base_seed: int, trial: int) -> dict:
    """One seeded fit; returns a flat picklable record."""
    out: dict = {"trial": trial, "status": "ok", "message": ""}
    try:
        x, y = _trial_xy(kind, prep, base_seed, trial)
        idx_tr, idx_va, idx_te = split_indices(x.shape[0], seed=[base_seed, trial, 1])
        model = spec.build(random_state=[base_seed, trial, 2])
        model.fit(
            x[idx_tr], y[idx_tr],
            X_val=x[idx_va], y_val=y[idx_va],
            X_test=x[idx_te], y_test=y[idx_te],
        )
        rep = model.report_
        record: dict[str, float] = {}
        for split in SPLITS:
            for key, value in rep.metrics[split].as_dict().items():
                record[f"{split}_{key}"] = value
        if kind == "csv-forecast":
            # line-fit diagnostics in the original price units
            lo, hi = prep["series_lo"], prep["series_hi"]
            for split, idx in (("train", idx_tr), ("val", idx_va), ("test", idx_te)):
                m, b = fit_line(_unscale(y[idx], lo, hi), _unscale(model.predict(x[idx]), lo, hi))
                record[f"{split}_raw_fit_slope"] = m
                record[f"{split}_raw_fit_intercept"] = b
        record["n_iterations"] = float(rep.n_iterations)
        record["best_iteration"] = float(rep.best_iteration)
        out["record"] = record
        out["wall_time"] = float(rep.wall_time)
        out["report_text"] = rep.to_text()
        out["n_coefficients"] = rep.n_coefficients
        out["train_curve"] = list(rep.train_curve)
        out["val_curve"] = list(rep.val_curve)
    except Exception as exc:  # recorded and excluded from aggregates
        out["status"] = "error"
        out["message"] = f"{type(exc).__name__}: {exc}"
        out["record"] = {}
        out["n_coefficients"] = 0
        out["train_curve"] = []
        out["val_curve"] = []
        out["wall_time"] = 0.0
        out["report_text"] = ""
    return out


@dataclass
class ModelResult:
    spec: ModelSpec
    n_coefficients: int
    trials: list[dict]
    aggregates: dict[str, tuple[float, float]]
    curves: dict[str, list[float]]

    @property
    def n_aborted(self) -> int:
        return sum(1 for t in self.trials if t["status"] != "ok")


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    trials_run: int
    models: list[ModelResult]
    wall_time: float


def _aggregate(trials: list[dict]) -> dict[str, tuple[float, float]]:
    good = [t["record"] for t in trials if t["status"] == "ok"]
    if not good:
        return {}
    keys = sorted(good[0])
    out = {}
    for key in keys:
        vals = np.array([rec[key] for rec in good if key in rec], dtype=float)
        finite = vals[np.isfinite(vals)]
        if finite.size == 0:
            out[key] = (math.nan, math.nan)
        else:
            std = float(finite.std(ddof=1)) if finite.size > 1 else 0.0
            out[key] = (float(finite.mean()), std)
    return out


def _curve_stats(trials: list[dict]) -> dict[str, list[float]]:
    good = [t for t in trials if t["status"] == "ok" and t["val_curve"]]
    if not good:
        return {}
    length = max(len(t["val_curve"]) for t in good)

    def padded(key):
        rows = []
        for t in good:
            c = t[key]
            rows.append(c + [c[-1]] * (length - len(c)))
        return np.asarray(rows)

    tr = padded("train_curve")
    va = padded("val_curve")
    active = [int(sum(1 for t in good if len(t["val_curve"]) > i)) for i in range(length)]
    return {
        "mean_train_mse": tr.mean(axis=0).tolist(),
        "mean_val_mse": va.mean(axis=0).tolist(),
        "std_train_mse": tr.std(axis=0, ddof=0).tolist(),
        "std_val_mse": va.std(axis=0, ddof=0).tolist(),
        "n_active": active,
    }


def run_experiment(config: ExperimentConfig, threads: int | None = None,
                   trials: int | None = None) -> ExperimentResult:
    """Run every model spec for the configured number of seeded trials."""
    n_trials = config.trials if trials is None else int(trials)
    threads = threads or 1
    started = time.perf_counter()
    prep = _prepare(config.kind, config.data)
    jobs = [(spec, trial) for spec in config.models for trial in range(n_trials)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(run_trial, config.kind, prep, spec, config.seed, trial)
                for spec, trial in jobs
            ]
            outcomes = [f.result() for f in futures]
    else:
        outcomes = [run_trial(config.kind, prep, spec, config.seed, trial)
                    for spec, trial in jobs]

    models = []
    for i, spec in enumerate(config.models):
        chunk = outcomes[i * n_trials:(i + 1) * n_trials]
        n_coeffs = next((t["n_coefficients"] for t in chunk if t["status"] == "ok"), 0)
        result = ModelResult(
            spec=spec,
            n_coefficients=n_coeffs,
            trials=chunk,
            aggregates=_aggregate(chunk),
            curves=_curve_stats(chunk),
        )
        if result.n_aborted > 0.1 * n_trials:
            failures = [t["message"] for t in chunk if t["status"] != "ok"]
            raise ExperimentError(
                f"model {spec.name}: {result.n_aborted}/{n_trials} trials aborted; "
                f"first failure: {failures[0]}"
            )
        models.append(result)
    return ExperimentResult(
        config=config,
        trials_run=n_trials,
        models=models,
        wall_time=time.perf_counter() - started,
    )


def _fmt(value: float) -> str:
    return f"{value:.10e}"


def _safe_name(name: str) -> str:
    return "".join(c if (c.isalnum() or c in "-_") else "_" for c in name)


def _summary_rows(model: ModelResult) -> list[str]:
    cols = [f"{split}_{key}" for split in SPLITS for key in METRIC_KEYS]
    header = "stat,n_coeffs," + ",".join(cols)
    rows = [header]
    for stat, pick in (("mean", 0), ("std", 1)):
        cells = [stat, str(model.n_coefficients)]
        for col in cols:
            pair = model.aggregates.get(col)
            cells.append(_fmt(pair[pick]) if pair else "nan")
        rows.append(",".join(cells))
    return rows


def write_experiment_outputs(result: ExperimentResult, out_dir) -> dict[str, str]:
    """Emit summary/trials/convergence CSVs per model plus manifest.json."""
    os.makedirs(out_dir, exist_ok=True)
    paths: dict[str, str] = {}
    for model in result.models:
        tag = _safe_name(model.spec.name)
        summary_path = os.path.join(out_dir, f"summary_{tag}.csv")
        with open(summary_path, "w") as fh:
            fh.write("\n".join(_summary_rows(model)) + "\n")
        paths[f"summary_{tag}"] = summary_path

        trials_path = os.path.join(out_dir, f"trials_{tag}.csv")
        keys = sorted({k for t in model.trials for k in t["record"]})
        with open(trials_path, "w") as fh:
            fh.write("trial,status,message," + ",".join(keys) + "\n")
            for t in model.trials:
                cells = [str(t["trial"]), t["status"], t["message"].replace(",", ";")]
                cells += [_fmt(t["record"][k]) if k in t["record"] else "" for k in keys]
                fh.write(",".join(cells) + "\n")
        paths[f"trials_{tag}"] = trials_path

        reports_path = os.path.join(out_dir, f"reports_{tag}.txt")
        with open(reports_path, "w") as fh:
            for t in model.trials:
                fh.write(f"# trial {t['trial']} status={t['status']}\n")
                fh.write(t["report_text"] or "\n")
        paths[f"reports_{tag}"] = reports_path

        if model.curves:
            curve_path = os.path.join(out_dir, f"convergence_{tag}.csv")
            with open(curve_path, "w") as fh:
                fh.write("iteration,mean_train_mse,std_train_mse,mean_val_mse,std_val_mse,n_active\n")
                n = len(model.curves["mean_val_mse"])
                for i in range(n):
                    fh.write(
                        f"{i + 1},{_fmt(model.curves['mean_train_mse'][i])},"
                        f"{_fmt(model.curves['std_train_mse'][i])},"
                        f"{_fmt(model.curves['mean_val_mse'][i])},"
                        f"{_fmt(model.curves['std_val_mse'][i])},"
                        f"{model.curves['n_active'][i]}\n"
                    )
            paths[f"convergence_{tag}"] = curve_path

    manifest = {
        "version": __version__,
        "kind": result.config.kind,
        "seed": result.config.seed,
        "trials": result.trials_run,
        "config_hash": result.config.content_hash(),
        "config": result.config.raw_text,
        "wall_time": result.wall_time,
        "models": {
            m.spec.name: {
                "family": m.spec.family,
                "params": m.spec.params,
                "n_coefficients": m.n_coefficients,
                "aborted": m.n_aborted,
                "mean_trial_wall_time": float(
                    np.mean([t["wall_time"] for t in m.trials if t["status"] == "ok"] or [0.0])
                ),
            }
            for m in result.models
        },
    }
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths["manifest"] = manifest_path
    return paths


def write_comparison(result: ExperimentResult, out_dir) -> tuple[str, list[str]]:
    """Side-by-side table with a winner flag per split/metric; returns the
    path and any coefficient-budget warnings."""
    os.makedirs(out_dir, exist_ok=True)
    warnings: list[str] = []
    budgets = [m.n_coefficients for m in result.models if m.n_coefficients]
    if len(budgets) > 1 and max(budgets) > 1.05 * min(budgets):
        warnings.append(
            f"coefficient budgets differ by more than 5%: {budgets} "
            f"(comparison may be uneven)"
        )
    cols = [f"{split}_{key}" for split in SPLITS for key in ("mse", "score", "spcc", "r_squared")]
    winners = {}
    for col in cols:
        vals = {
            m.spec.name: m.aggregates[col][0]
            for m in result.models
            if col in m.aggregates and math.isfinite(m.aggregates[col][0])
        }
        if not vals:
            continue
        pick = min if col.endswith("mse") else max
        winners[col] = pick(vals, key=vals.get)
    path = os.path.join(out_dir, "comparison.csv")
    with open(path, "w") as fh:
        fh.write("model,family,n_coeffs," + ",".join(cols) + ",wins\n")
        for m in result.models:
            cells = [m.spec.name, m.spec.family, str(m.n_coefficients)]
            for col in cols:
                pair = m.aggregates.get(col)
                mark = "*" if winners.get(col) == m.spec.name else ""
                cells.append((_fmt(pair[0]) + mark) if pair else "nan")
            n_wins = sum(1 for w in winners.values() if w == m.spec.name)
            cells.append(str(n_wins))
            fh.write(",".join(cells) + "\n")
    return path, warnings
