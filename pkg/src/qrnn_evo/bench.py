"""Experiment orchestration: runs x methods, aggregation, CSV emission."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import data
from .errors import ConfigurationError, RunAborted
from .objective import MULTI_STEP, ForecastObjective, LossSpec
from .optim.strategy import CMAES, GRADIENT, HYBRID, METHODS, RunRecord, StrategySchedule, run_strategy

log = logging.getLogger(__name__)

MACKEY_GLASS = "mackey-glass"
CSV_SOURCE = "csv"


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = MACKEY_GLASS
    csv: str | None = None
    column: str | None = None
    horizon: int = 4
    methods: tuple[str, ...] = METHODS
    gradient_epochs: int = 100
    cmaes_generations: int = 11
    hybrid_gradient_epochs: int = 20
    hybrid_generations: int = 9
    runs: int = 5
    seed: int = 0
    loss: str = MULTI_STEP
    length: int = data.PROTOCOL_LENGTH
    lr: float = 0.03
    sigma0: float = 0.5
    popsize: int = 10
    jobs: int = 1
    out: str = "results"

    def __post_init__(self):
        if self.dataset not in (MACKEY_GLASS, CSV_SOURCE):
            raise ConfigurationError(f"unknown dataset source {self.dataset!r}")
        if self.dataset == CSV_SOURCE and not (self.csv and self.column):
            raise ConfigurationError("csv dataset needs both a file path and a column")
        if self.horizon < 1:
            raise ConfigurationError("horizon must be >= 1")
        if not self.methods:
            raise ConfigurationError("no methods selected")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigurationError(f"unknown method {m!r} (choose from {', '.join(METHODS)})")
        if self.runs < 1:
            raise ConfigurationError("runs must be >= 1")
        if self.jobs < 1:
            raise ConfigurationError("jobs must be >= 1")
        for m in self.methods:
            for name, value in self._budget_fields(m):
                if value < 1:
                    raise ConfigurationError(f"{name} must be positive when {m} is enabled")

    def _budget_fields(self, method):
        return {
            GRADIENT: [("gradient_epochs", self.gradient_epochs)],
            CMAES: [("cmaes_generations", self.cmaes_generations)],
            HYBRID: [
                ("hybrid_gradient_epochs", self.hybrid_gradient_epochs),
                ("hybrid_generations", self.hybrid_generations),
            ],
        }[method]

    def schedule(self, method: str, seed: int) -> StrategySchedule:
        grad, evo = {
            GRADIENT: (self.gradient_epochs, 0),
            CMAES: (0, self.cmaes_generations),
            HYBRID: (self.hybrid_gradient_epochs, self.hybrid_generations),
        }[method]
        return StrategySchedule(method, grad, evo, seed, self.lr, self.sigma0, self.popsize)

    def seeds(self) -> list[int]:
        return [self.seed + r for r in range(self.runs)]

    def echo(self) -> str:
        """Resolved configuration in the key = value format ``parse_config_text`` reads."""
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, tuple):
                value = ",".join(value)
            lines.append(f"{f.name.replace('_', '-')} = {value}")
        return "\n".join(lines) + "\n"


_INT_KEYS = {
    "horizon", "gradient_epochs", "cmaes_generations", "hybrid_gradient_epochs",
    "hybrid_generations", "runs", "seed", "length", "popsize", "jobs",
}
_FLOAT_KEYS = {"lr", "sigma0"}


def parse_config_text(text: str) -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    known = {f.name for f in fields(ExperimentConfig)}
    out = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"config line {line_no}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise ConfigurationError(f"config line {line_no}: unknown key {key!r}")
        out[key] = coerce_option(key, value)
    return out


def coerce_option(key: str, value):
    if value is None:
        return None
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
    except ValueError:
        raise ConfigurationError(f"option {key}: cannot parse {value!r}") from None
    if key == "methods":
        if isinstance(value, str):
            value = [m.strip() for m in value.split(",") if m.strip()]
        return tuple(value)
    return value


def load_dataset(config: ExperimentConfig) -> data.TimeSeriesDataset:
    if config.dataset == MACKEY_GLASS:
        series = data.mackey_glass(data.MackeyGlassParams(), config.length)
        name = MACKEY_GLASS
    else:
        series = data.load_csv(config.csv, config.column)
        name = f"{Path(config.csv).name}:{config.column}"
    return data.split_80_20(series, name, config.length)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list[RunRecord]
    failures: list[tuple[str, int, str]] = field(default_factory=list)
    failed_records: list[RunRecord] = field(default_factory=list)


def _run_job(config: ExperimentConfig, dataset, method: str, seed: int):
    objective = ForecastObjective(dataset, LossSpec(config.loss, config.horizon), config.horizon)
    try:
        records = run_strategy(config.schedule(method, seed), objective)
    except RunAborted as exc:
        return method, seed, exc.records, str(exc)
    return method, seed, records, None


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run every enabled method for every seed; failed runs are isolated and reported."""
    dataset = load_dataset(config)
    # fail fast on horizons the split cannot support
    ForecastObjective(dataset, LossSpec(config.loss, config.horizon), config.horizon)
    jobs = [(m, s) for m in config.methods for s in config.seeds()]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            futures = [pool.submit(_run_job, config, dataset, m, s) for m, s in jobs]
            outcomes = [f.result() for f in futures]
    else:
        outcomes = []
        for m, s in jobs:
            log.info("running %s seed %d", m, s)
            outcomes.append(_run_job(config, dataset, m, s))

    order = {m: i for i, m in enumerate(METHODS)}
    outcomes.sort(key=lambda o: (order[o[0]], o[1]))
    result = ExperimentResult(config, [])
    for method, seed, records, error in outcomes:
        if error is None:
            result.records.extend(records)
        else:
            log.error("%s", error)
            result.failures.append((method, seed, error))
            result.failed_records.extend(records)
    return result


@dataclass(frozen=True)
class CurvePoint:
    method: str
    epoch: int
    effort_x: int
    mean_rel_rmse: float
    std_rel_rmse: float
    mean_circuit_evals: float
    n_runs: int


def aggregate(records: list[RunRecord], methods=None) -> list[CurvePoint]:
    """Per-method, per-epoch mean and sample standard deviation of test rel-RMSE."""
    methods = methods or sorted({r.method for r in records}, key=lambda m: METHODS.index(m))
    points = []
    for method in methods:
        rows = [r for r in records if r.method == method]
        if not rows:
            raise ConfigurationError(f"no successful runs for {method}")
        for epoch in sorted({r.epoch for r in rows}):
            at = [r for r in rows if r.epoch == epoch]
            vals = np.array([r.test_rel_rmse for r in at])
            std = float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0
            points.append(
                CurvePoint(
                    method,
                    epoch,
                    at[0].effort_x,
                    float(np.mean(vals)),
                    std,
                    float(np.mean([r.circuit_evals for r in at])),
                    vals.size,
                )
            )
    return points


@dataclass(frozen=True)
class SummaryRow:
    method: str
    lowest_mean_rel_rmse: float
    epoch: int
    effort_x: int
    std_at_lowest: float
    runs_ok: int
    runs_failed: int


def summarize(curves: list[CurvePoint], failures=()) -> list[SummaryRow]:
    rows = []
    for method in dict.fromkeys(p.method for p in curves):
        pts = [p for p in curves if p.method == method]
        best = min(pts, key=lambda p: (p.mean_rel_rmse, p.epoch))
        n_failed = sum(1 for f in failures if f[0] == method)
        rows.append(
            SummaryRow(method, best.mean_rel_rmse, best.epoch, best.effort_x, best.std_rel_rmse,
                       max(p.n_runs for p in pts), n_failed)
        )
    return rows


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else str(value)
    return str(value)


def _write_rows(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def emit_results(result: ExperimentResult, out_dir=None) -> dict[str, Path]:
    """Write curves.csv, summary.csv, records.csv and config.echo."""
    out = Path(out_dir or result.config.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigurationError(f"cannot create output directory {out}: {exc}") from exc
    curves = aggregate(result.records)
    summary = summarize(curves, result.failures)
    paths = {name: out / name for name in ("curves.csv", "summary.csv", "records.csv", "config.echo")}

    _write_rows(
        paths["curves.csv"],
        ["method", "epoch", "effort_x", "mean_rel_rmse", "std_rel_rmse", "mean_circuit_evals", "n_runs"],
        (astuple_curve(p) for p in curves),
    )
    _write_rows(
        paths["summary.csv"],
        ["method", "lowest_mean_rel_rmse", "epoch", "effort_x", "std_at_lowest", "runs_ok", "runs_failed"],
        (tuple(asdict(s).values()) for s in summary),
    )
    record_header = [f.name for f in fields(RunRecord)] + ["status"]
    _write_rows(
        paths["records.csv"],
        record_header,
        [tuple(asdict(r).values()) + ("ok",) for r in result.records]
        + [tuple(asdict(r).values()) + ("failed",) for r in result.failed_records],
    )
    paths["config.echo"].write_text(result.config.echo(), encoding="utf-8")
    return paths


def astuple_curve(p: CurvePoint) -> tuple:
    return (p.method, p.epoch, p.effort_x, p.mean_rel_rmse, p.std_rel_rmse, p.mean_circuit_evals, p.n_runs)


@dataclass(frozen=True)
class ProtocolCheck:
    name: str
    passed: bool
    detail: str


def protocol_checks(curves: list[CurvePoint], plateau_window: int = 50, plateau_tol: float = 0.05) -> list[ProtocolCheck]:
    """Qualitative ordering checks on aggregated curves (gradient plateau, CMA-ES and hybrid gains)."""
    by = {m: [p for p in curves if p.method == m] for m in METHODS}
    grad, cma, hyb = by[GRADIENT], by[CMAES], by[HYBRID]
    if not (grad and cma and hyb):
        raise ConfigurationError("protocol checks need all three methods")
    g = np.array([p.mean_rel_rmse for p in grad])
    start = g[len(g) - plateau_window - 1]
    improvement = (start - g[-1]) / start
    plateau = float(np.min(g[len(g) - plateau_window :]))
    cma_best = min(cma, key=lambda p: p.mean_rel_rmse)
    hyb_best = min(hyb, key=lambda p: p.mean_rel_rmse)
    pooled = math.sqrt((cma_best.std_rel_rmse**2 + hyb_best.std_rel_rmse**2) / 2)
    return [
        ProtocolCheck(
            "gradient plateau",
            improvement < plateau_tol,
            f"relative improvement over last {plateau_window} epochs = {improvement:.4f} (< {plateau_tol})",
        ),
        ProtocolCheck(
            "cmaes below gradient plateau",
            cma_best.mean_rel_rmse < plateau,
            f"cmaes lowest mean {cma_best.mean_rel_rmse:.4f} vs gradient plateau {plateau:.4f}",
        ),
        ProtocolCheck(
            "hybrid within one pooled std of cmaes",
            hyb_best.mean_rel_rmse <= cma_best.mean_rel_rmse + pooled,
            f"hybrid lowest mean {hyb_best.mean_rel_rmse:.4f} vs cmaes {cma_best.mean_rel_rmse:.4f} + {pooled:.4f}",
        ),
    ]
