"""Rate sweeps over a grid of sample sizes with per-trial risk diagnostics."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .. import ridge
from ..lmm import generate_dataset, parse_target
from ..risk import RiskError, decomposition_exact, holdout_errors
from ..seeding import stream
from .scenarios import Scenario

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "scenario",
    "n",
    "p",
    "gamma",
    "sigma_x",
    "trial",
    "train_mse",
    "test_mse",
    "test_se",
    "B",
    "V",
    "S1",
    "S2",
    "S3",
    "delta_opnorm",
    "mu_n_K",
    "mu_n_A",
    "event_C",
    "event_D",
)

NAN = float("nan")
DECOMP_FIELDS = CSV_COLUMNS[9:]


@dataclass(frozen=True)
class SweepRecord:
    scenario: str
    n: int
    p: int
    gamma: float
    sigma_x: float
    trial: int
    train_mse: float = NAN
    test_mse: float = NAN
    test_se: float = NAN
    B: float = NAN
    V: float = NAN
    S1: float = NAN
    S2: float = NAN
    S3: float = NAN
    delta_opnorm: float = NAN
    mu_n_K: float = NAN
    mu_n_A: float = NAN
    event_C: bool | None = None
    event_D: bool | None = None
    mean_y2: float = NAN
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def csv_row(self) -> list[str]:
        return [_fmt(getattr(self, c)) for c in CSV_COLUMNS]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


@dataclass(frozen=True)
class SweepResult:
    scenario: Scenario
    records: list[SweepRecord]
    medians: list[float]
    slope: float
    slope_se: float
    mean_test_mse: list[float] = field(default_factory=list)

    def at_n(self, n: int) -> list[SweepRecord]:
        return [r for r in self.records if r.n == n]

    def median_at(self, n: int) -> float:
        return self.medians[self.scenario.n_grid.index(n)]

    def summary(self) -> dict:
        return {
            "scenario": self.scenario.name,
            "slope": self.slope,
            "slope_se": self.slope_se,
            "n_grid": list(self.scenario.n_grid),
            "medians": self.medians,
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for rec in self.records:
                writer.writerow(rec.csv_row())

    def write_summary(self, path) -> None:
        Path(path).write_text(json.dumps(_json_safe(self.summary()), indent=2) + "\n", encoding="utf-8")


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_json_safe(v) for v in obj]
    return obj


class SlopeError(ValueError):
    pass


def fit_loglog_slope(ns, vals) -> tuple[float, float]:
    """Least-squares slope of log(vals) against log(ns), with its standard error."""
    ns = np.asarray(ns, dtype=np.float64)
    vals = np.asarray(vals, dtype=np.float64)
    if ns.shape != vals.shape or ns.ndim != 1:
        raise SlopeError("ns and vals must be vectors of equal length")
    if ns.size < 3:
        raise SlopeError("need at least 3 points for a slope fit")
    if np.any(~(vals > 0)) or np.any(~(ns > 0)):
        raise SlopeError("slope fit needs strictly positive values")
    fit = stats.linregress(np.log(ns), np.log(vals))
    return float(fit.slope), float(fit.stderr)


def trial_label(sc: Scenario, n: int, trial: int) -> str:
    return f"sweep/{sc.stream_label}/n={n}/trial={trial}"


def run_trial(sc: Scenario, n: int, trial: int) -> SweepRecord:
    """One (n, trial) cell; solver failures become a NaN record with ``error`` set."""
    spec = sc.spectrum_obj()
    target = parse_target(sc.theta, spec)
    p, gamma, sigma_x = sc.p(n), sc.gamma(n), sc.sigma_x_at(n)
    base = dict(scenario=sc.name, n=n, p=p, gamma=gamma, sigma_x=sigma_x, trial=trial)
    rng = stream(sc.seed, trial_label(sc, n, trial))
    ds = generate_dataset(spec, target, n, p, sigma_x, sc.sigma_y, rng, sc.noise_family, seed=sc.seed)
    try:
        sol = ridge.fit_dual(ds.X, ds.y, gamma, pinv=sc.pinv)
    except ridge.SingularGramError as exc:
        log.warning("%s n=%d trial=%d: %s", sc.name, n, trial, exc)
        return SweepRecord(**base, error=str(exc))

    _, V, evals_G = sol.eig
    fitted = V @ (evals_G * (V.T @ sol.dual_coef))
    train_mse = float(np.mean((fitted - ds.y) ** 2))
    test_mse, test_se = holdout_errors(ds, sol, sc.n_test, rng).realized_summary()

    extra = {}
    if sc.decompose:
        try:
            dec = decomposition_exact(ds, gamma, sol=sol)
        except RiskError as exc:
            log.warning("%s n=%d trial=%d: decomposition failed: %s", sc.name, n, trial, exc)
        else:
            extra = {f: getattr(dec, f) for f in DECOMP_FIELDS}
    if "mu_n_A" not in extra:
        extra["mu_n_A"] = sol.min_eig_A
    log.debug("%s n=%d p=%d trial=%d test_mse=%.4g", sc.name, n, p, trial, test_mse)
    return SweepRecord(
        **base,
        train_mse=train_mse,
        test_mse=test_mse,
        test_se=test_se,
        mean_y2=float(np.mean(ds.y**2)),
        **extra,
    )


def _run_task(args) -> SweepRecord:
    sc, n, trial = args
    return run_trial(sc, n, trial)


def run_rate_sweep(sc: Scenario, workers: int = 1) -> SweepResult:
    """All (n, trial) cells of ``sc``; the output order is (n, trial) whatever the worker count."""
    if len(sc.n_grid) < 3:
        raise SlopeError("a rate sweep needs at least 3 grid points")
    sc.check_resources()
    tasks = [(sc, n, t) for n in sc.n_grid for t in range(sc.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (8 * workers))))
    else:
        records = [_run_task(t) for t in tasks]
    return summarise(sc, records)


def summarise(sc: Scenario, records: list[SweepRecord]) -> SweepResult:
    medians, means = [], []
    for n in sc.n_grid:
        vals = np.array([r.test_mse for r in records if r.n == n], dtype=np.float64)
        ok = vals[np.isfinite(vals)]
        medians.append(float(np.median(ok)) if ok.size else NAN)
        means.append(float(np.mean(ok)) if ok.size else NAN)
    good = [(n, m) for n, m in zip(sc.n_grid, medians) if np.isfinite(m) and m > 0]
    if len(good) >= 3:
        slope, se = fit_loglog_slope(*zip(*good))
    else:
        slope = se = NAN
    return SweepResult(sc, records, medians, slope, se, means)


def read_records_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


__all__ = [
    "CSV_COLUMNS",
    "SweepRecord",
    "SweepResult",
    "SlopeError",
    "fit_loglog_slope",
    "run_rate_sweep",
    "run_trial",
    "summarise",
    "read_records_csv",
]
