"""Command-line entry point: ``lmmbench <subcommand> [--config PATH] [overrides]``.

Settings resolve in the order built-in defaults, then the JSON config file,
then command-line flags. Unknown config keys are fatal. The resolved config
is written to ``config.echo.json`` in the output directory; passing that file
back through ``--config`` reproduces the run.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .experiments import cosine, diagnostics, temperature
from .experiments.scenarios import PRESETS, Scenario, ScenarioError, get_preset
from .experiments.sweep import run_rate_sweep
from .spectrum import SpectrumError, parse_spectrum

log = logging.getLogger("lmmbench")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- run configs


@dataclass
class CosineConfig:
    regime: str = "finite"
    reg: str = "implicit"
    p: int = 4096
    n: int = 60
    sigma_y: float = 0.4
    gamma: float = 1e-4
    n_test: int = 1000
    trunc: int | None = None
    seed: int = 0
    out: str = "out/cosine"
    workers: int = 1


@dataclass
class SweepConfig:
    preset: str | None = None
    scenario: dict = field(default_factory=dict)
    out: str = "out/sweep"
    workers: int = 1


@dataclass
class TemperatureConfig:
    input: str | None = None
    synthetic_cities: int = 500
    synthetic_days: int = 1450
    train_frac: float = 0.2
    trials: int = 50
    p_grid: list = field(default_factory=lambda: [10, 50, 200, 800, 1450])
    gamma: float = 0.0
    pinv: bool = True
    center_latitude: bool = False
    min_cities: int = temperature.MIN_CITIES
    gram_p: int | None = 1450
    seed: int = 0
    out: str = "out/temperature"
    workers: int = 1


@dataclass
class DiagnosticsConfig:
    check: str = "w-orthonormality"
    spectrum: str = "finite:k_max=20"
    p: int = 4096
    n: int = 6
    reps: int = 200
    sigma_x: float = 0.5
    p_grid: list = field(default_factory=lambda: [256, 1024, 4096, 16384])
    seed: int = 0
    out: str | None = None
    workers: int = 1


@dataclass
class SynthConfig:
    n_cities: int = 500
    p_len: int = 1450
    seed: int = 0
    out: str = "out/cities.csv"
    workers: int = 1


CONFIGS = {
    "cosine-demo": CosineConfig,
    "rate-sweep": SweepConfig,
    "temperature": TemperatureConfig,
    "diagnostics": DiagnosticsConfig,
    "synth-cities": SynthConfig,
}

CHECKS = ("w-orthonormality", "gram-expectation", "delta-decay")


def load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def resolve(cls, file_values: dict, flag_values: dict):
    """defaults < config file < flags, rejecting unknown keys."""
    known = {f.name for f in fields(cls)}
    for source, values in (("config", file_values), ("flags", flag_values)):
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"unknown {source} keys: {', '.join(unknown)}")
    merged = {**file_values, **{k: v for k, v in flag_values.items() if v is not None}}
    try:
        return cls(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in {"1", "true", "yes"}:
        return True
    if lowered in {"0", "false", "no"}:
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lmmbench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--out", help="output directory (file path for synth-cities)")
        sp.add_argument("--seed", type=int, help="master seed")
        sp.add_argument("--workers", type=int, help="worker processes")

    sp = sub.add_parser("cosine-demo", help="fit cos(3z) from n = 60 LMM samples")
    common(sp)
    sp.add_argument("--regime", choices=sorted(cosine.COSINE_REGIMES))
    sp.add_argument("--reg", choices=[m.value for m in cosine.RegMode])
    sp.add_argument("--p", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--sigma-y", dest="sigma_y", type=float)
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--n-test", dest="n_test", type=int)
    sp.add_argument("--trunc", type=int)

    sp = sub.add_parser("rate-sweep", help="rate sweep over an n grid")
    common(sp)
    sp.add_argument("--preset", choices=sorted(PRESETS))
    sp.add_argument("--spectrum")
    sp.add_argument("--trials", type=int)
    sp.add_argument("--n-test", dest="n_test", type=int)
    sp.add_argument("--n-grid", dest="n_grid", type=_int_list)
    sp.add_argument("--sigma-x", dest="sigma_x", type=float)
    sp.add_argument("--sigma-y", dest="sigma_y", type=float)
    sp.add_argument("--gamma-coef", dest="gamma_coef", type=float)
    sp.add_argument("--gamma-exp", dest="gamma_exp", type=float)
    sp.add_argument("--p-coef", dest="p_coef", type=float)
    sp.add_argument("--p-exp", dest="p_exp", type=float)
    sp.add_argument("--p-fixed", dest="p_fixed", type=int)
    sp.add_argument("--pinv", type=_bool)
    sp.add_argument("--noise-family", dest="noise_family")
    sp.add_argument("--decompose", type=_bool)

    sp = sub.add_parser("temperature", help="latitude regression on city temperature series")
    common(sp)
    sp.add_argument("--input", help="city CSV; omitted means synthetic cities")
    sp.add_argument("--synthetic-cities", dest="synthetic_cities", type=int)
    sp.add_argument("--synthetic-days", dest="synthetic_days", type=int)
    sp.add_argument("--train-frac", dest="train_frac", type=float)
    sp.add_argument("--trials", type=int)
    sp.add_argument("--p-grid", dest="p_grid", type=_int_list)
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--pinv", type=_bool)
    sp.add_argument("--center-latitude", dest="center_latitude", type=_bool)
    sp.add_argument("--min-cities", dest="min_cities", type=int)
    sp.add_argument("--gram-p", dest="gram_p", type=int)

    sp = sub.add_parser("diagnostics", help="Monte Carlo identity checks")
    common(sp)
    sp.add_argument("--check", choices=CHECKS)
    sp.add_argument("--spectrum")
    sp.add_argument("--p", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--reps", type=int)
    sp.add_argument("--sigma-x", dest="sigma_x", type=float)
    sp.add_argument("--p-grid", dest="p_grid", type=_int_list)

    sp = sub.add_parser("synth-cities", help="write a synthetic city temperature CSV")
    common(sp)
    sp.add_argument("--n-cities", dest="n_cities", type=int)
    sp.add_argument("--p-len", dest="p_len", type=int)
    return parser


SWEEP_FLAGS = (
    "spectrum",
    "trials",
    "n_test",
    "n_grid",
    "sigma_x",
    "sigma_y",
    "gamma_coef",
    "gamma_exp",
    "p_coef",
    "p_exp",
    "p_fixed",
    "pinv",
    "noise_family",
    "decompose",
)


# ---------------------------------------------------------------- commands


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def cmd_cosine(cfg: CosineConfig) -> int:
    try:
        mode = cosine.RegMode(cfg.reg)
        cosine.cosine_spectrum(cfg.regime, cfg.trunc)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.p < 1 or cfg.n < 1 or cfg.n_test < 1:
        raise ConfigError("p, n and n_test must be positive")
    out = _out_dir(cfg.out)
    _write_json(out / "config.echo.json", asdict(cfg))
    res = cosine.run_cosine_demo(cfg.regime, mode, cfg.p, cfg.seed, cfg.n, cfg.sigma_y, cfg.gamma, cfg.n_test, cfg.trunc)
    res.write_csv(out / "predictions.csv")
    summary = {"test_mse": res.test_mse, "oracle_mse": res.oracle_mse, "p": res.p, "n": res.n,
               "gamma": res.gamma, "sigma_x": res.sigma_x}
    _write_json(out / "summary.json", summary)
    print(f"cosine-demo {cfg.regime}/{cfg.reg} p={cfg.p}: test MSE {res.test_mse:.4g}, kernel oracle {res.oracle_mse:.4g}")
    return EXIT_OK


def resolve_scenario(cfg: SweepConfig, overrides: dict, seed: int | None) -> Scenario:
    data = dict(cfg.scenario)
    data.update({k: v for k, v in overrides.items() if v is not None})
    if seed is not None:
        data["seed"] = seed
    if cfg.preset is not None:
        return get_preset(cfg.preset, **data) if data else get_preset(cfg.preset)
    if "name" not in data:
        raise ConfigError("rate-sweep needs --preset or a scenario with a name")
    return Scenario.from_dict(data)


def cmd_sweep(cfg: SweepConfig, overrides: dict, seed: int | None) -> int:
    try:
        sc = resolve_scenario(cfg, overrides, seed)
        parse_spectrum(sc.spectrum, trunc=sc.trunc)
        sc.check_resources()
    except (ScenarioError, SpectrumError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    out = _out_dir(cfg.out)
    echo = {"preset": None, "scenario": sc.to_dict(), "out": cfg.out, "workers": cfg.workers}
    _write_json(out / "config.echo.json", echo)
    result = run_rate_sweep(sc, workers=cfg.workers)
    result.write_csv(out / "results.csv")
    result.write_summary(out / "summary.json")
    failed = sum(r.failed for r in result.records)
    print(f"rate-sweep {sc.name}: slope {result.slope:.3f} +/- {result.slope_se:.3f}; medians {['%.4g' % m for m in result.medians]}"
          + (f"; {failed} failed trials" if failed else ""))
    return EXIT_OK


def cmd_temperature(cfg: TemperatureConfig) -> int:
    if not 0 < cfg.train_frac < 1:
        raise ConfigError("train_frac must lie in (0, 1)")
    out = _out_dir(cfg.out)
    _write_json(out / "config.echo.json", asdict(cfg))
    if cfg.input is not None:
        try:
            report = temperature.read_city_csv(cfg.input)
        except FileNotFoundError:
            raise ConfigError(f"input file not found: {cfg.input}") from None
        records = report.records
        if report.skipped:
            log.warning("skipped %d rows with missing readings", len(report.skipped))
    else:
        records = temperature.generate_synthetic_cities(cfg.synthetic_cities, cfg.synthetic_days, cfg.seed)
    res = temperature.run_temperature(
        records,
        train_frac=cfg.train_frac,
        trials=cfg.trials,
        p_grid=cfg.p_grid,
        gamma=cfg.gamma,
        seed=cfg.seed,
        pinv=cfg.pinv,
        center_latitude=cfg.center_latitude,
        min_cities=cfg.min_cities,
        workers=cfg.workers,
    )
    res.write_csv(out / "rmse.csv")
    summary = {
        "counts": res.counts,
        "skipped_continents": res.skipped,
        "lat_sd": res.lat_sd,
        "median_rmse": {c: {str(p): v for p, v in res.median_rmse(c).items()} for c in res.continents()},
    }
    _write_json(out / "summary.json", summary)
    if cfg.gram_p:
        temperature.export_gram(records, min(cfg.gram_p, records[0].temps.size), out / "gram.csv", out / "gram.json")
    for c in res.continents():
        medians = ", ".join(f"p={p}: {v:.3g}" for p, v in res.median_rmse(c).items())
        print(f"{c}: {medians}")
    return EXIT_OK


def cmd_diagnostics(cfg: DiagnosticsConfig) -> int:
    try:
        spec = parse_spectrum(cfg.spectrum)
    except SpectrumError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.check not in CHECKS:
        raise ConfigError(f"unknown check {cfg.check!r}; choose from {CHECKS}")
    if cfg.reps < 2:
        raise ConfigError("reps must be >= 2")
    if cfg.check == "w-orthonormality":
        res = diagnostics.w_orthonormality(spec, cfg.p, cfg.reps, cfg.seed)
        report = res.to_dict()
        print(
            f"w-orthonormality p={cfg.p} reps={cfg.reps}: max off-diagonal |mean| "
            f"{res.max_offdiag_abs_mean:.3e} (SE {res.se_at_offdiag:.3e}); max |diag - 1| "
            f"{res.max_diag_dev:.3e}; {100 * res.frac_within_3se:.1f}% of entries within 3 SE"
        )
    elif cfg.check == "gram-expectation":
        res, worst = diagnostics.gram_expectation(spec, cfg.n, cfg.p, cfg.sigma_x, cfg.reps, cfg.seed)
        report = {**res.to_dict(), "identity_max_error": worst}
        print(
            f"gram-expectation n={cfg.n} p={cfg.p} reps={cfg.reps}: max deviation {res.max_abs_dev:.3e} "
            f"(SE {res.se_at_max:.3e}), max z {res.max_z:.2f}; X identity error {worst:.2e}"
        )
    else:
        res = diagnostics.delta_decay(spec, max(cfg.n, 2), cfg.p_grid, cfg.reps, cfg.seed, cfg.sigma_x)
        report = asdict(res)
        print(f"delta-decay: medians {['%.4g' % m for m in res.medians]}, slope {res.slope:.3f} +/- {res.slope_se:.3f}")
    if cfg.out:
        out = _out_dir(cfg.out)
        _write_json(out / "config.echo.json", asdict(cfg))
        _write_json(out / "report.json", report)
    return EXIT_OK


def cmd_synth(cfg: SynthConfig) -> int:
    if cfg.n_cities < 10 or cfg.p_len < 1:
        raise ConfigError("need n_cities >= 10 and p_len >= 1")
    path = Path(cfg.out)
    if path.suffix.lower() != ".csv":
        path = _out_dir(cfg.out) / "cities.csv"
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
    records = temperature.generate_synthetic_cities(cfg.n_cities, cfg.p_len, cfg.seed)
    temperature.write_city_csv(records, path)
    _write_json(path.with_name("config.echo.json"), asdict(cfg))
    print(f"wrote {len(records)} cities to {path}")
    return EXIT_OK


# ---------------------------------------------------------------- main


def _setup_logging() -> None:
    level = LOG_LEVELS.get(os.environ.get("LMMBENCH_LOG", "warn").lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    flags = {k: v for k, v in vars(args).items() if k not in {"command", "config"}}
    try:
        file_values = load_config_file(args.config)
        if args.command == "rate-sweep":
            overrides = {k: flags.pop(k) for k in SWEEP_FLAGS}
            seed = flags.pop("seed")
            cfg = resolve(SweepConfig, file_values, flags)
            if cfg.workers < 1:
                raise ConfigError("workers must be >= 1")
            return cmd_sweep(cfg, overrides, seed)
        cfg = resolve(CONFIGS[args.command], file_values, flags)
        if cfg.workers < 1:
            raise ConfigError("workers must be >= 1")
        handler = {
            "cosine-demo": cmd_cosine,
            "temperature": cmd_temperature,
            "diagnostics": cmd_diagnostics,
            "synth-cities": cmd_synth,
        }[args.command]
        return handler(cfg)
    except ConfigError as exc:
        print(f"lmmbench: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"lmmbench: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
