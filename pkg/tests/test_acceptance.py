"""Acceptance criteria, one test each; every test prints a PASS/FAIL line before asserting.

Run with ``pytest tests/test_acceptance.py -s`` for the lines inline, or read the
"acceptance criteria" section of the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from lmmbench.experiments import get_preset, run_cosine_demo, run_rate_sweep
from lmmbench.experiments.diagnostics import delta_decay, gram_expectation
from lmmbench.experiments.sweep import run_trial
from lmmbench.experiments.temperature import POOLED_GROUP, generate_synthetic_cities, run_temperature
from lmmbench.lmm import TargetSpec, generate_dataset, moment_constants, parse_target
from lmmbench.ridge import fit_dual, fit_primal, predict
from lmmbench.risk import bound_S, decomposition_exact, excess_risk_mc
from lmmbench.seeding import stream
from lmmbench.spectrum import EigenSpectrum

from oracles import mc_decomposition

pytestmark = pytest.mark.slow

SEED = 20240601
TERMS = ("B", "V", "S1", "S2", "S3")


@pytest.fixture(scope="module")
def cache():
    return {}


def benign_sweep(cache, workers):
    key = ("benign", workers)
    if key not in cache:
        start = time.perf_counter()
        res = run_rate_sweep(get_preset("finite-implicit", seed=SEED), workers=workers)
        cache[key] = (res, time.perf_counter() - start)
    return cache[key]


def temperature_run(cache, workers):
    key = ("temperature", workers)
    if key not in cache:
        start = time.perf_counter()
        cities = generate_synthetic_cities(500, 1450, seed=SEED)
        res = run_temperature(cities, train_frac=0.2, trials=50, gamma=0.0, seed=SEED, workers=workers)
        cache[key] = (res, time.perf_counter() - start)
    return cache[key]


def test_c01_primal_dual(acceptance_report):
    rng = stream(SEED, "acceptance/1")
    start = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        n, p = int(rng.integers(1, 51)), int(rng.integers(1, 101))
        gamma = float(rng.choice([1e-3, 1e-1]))
        X, y = rng.standard_normal((n, p)), rng.standard_normal(n)
        x_test = rng.standard_normal((20, p))
        a, b = predict(fit_dual(X, y, gamma), x_test), predict(fit_primal(X, y, gamma), x_test)
        worst = max(worst, float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and elapsed < 10
    acceptance_report("1 primal/dual equivalence", ok, f"max relative gap {worst:.2e}, {elapsed:.2f} s")
    assert ok


def test_c02_decomposition_exactness(acceptance_report):
    start = time.perf_counter()
    specs = [EigenSpectrum.finite(4), EigenSpectrum.exponential(1.0, trunc=4), EigenSpectrum.polynomial(2.0, trunc=4)]
    worst, misses = 0.0, []
    for i in range(50):
        spec = specs[i % 3]
        ds = generate_dataset(spec, TargetSpec.cos3(spec), 8, 16, 0.4, 0.5, stream(SEED, f"acceptance/2/{i}"))
        exact = decomposition_exact(ds, 0.05)
        mc = mc_decomposition(ds, 0.05, 10**6, stream(SEED, f"acceptance/2/mc/{i}"))
        for key in TERMS:
            mean, se = mc[key]
            z = abs(getattr(exact, key) - mean) / se if se > 0 else (0.0 if getattr(exact, key) == mean else math.inf)
            worst = max(worst, z)
            if z > 3:
                misses.append(f"{i}:{key} z={z:.2f}")
    elapsed = time.perf_counter() - start
    ok = not misses and elapsed < 300
    detail = f"250 comparisons, max |z| {worst:.2f}, {elapsed:.0f} s" + (f"; outside 3 SE: {misses}" if misses else "")
    acceptance_report("2 decomposition exactness", ok, detail)
    assert ok


def test_c03_excess_risk_bound(acceptance_report):
    rng = stream(SEED, "acceptance/3")
    regimes = [
        lambda: EigenSpectrum.finite(int(rng.integers(2, 15))),
        lambda: EigenSpectrum.exponential(float(rng.uniform(0.3, 2.0)), trunc=200),
        lambda: EigenSpectrum.polynomial(float(rng.uniform(0.5, 3.0)), trunc=200),
    ]
    held = 0
    for i in range(200):
        spec = regimes[i % 3]()
        n = int(rng.integers(4, 40))
        p = int(rng.integers(2, 200))
        sigma_x = float(rng.choice([0.0, rng.uniform(0.05, 1.0)]))
        gamma = float(10 ** rng.uniform(-4, 0))
        ds = generate_dataset(spec, parse_target("cos3" if spec.rank >= 3 else [1.0], spec),
                              n, p, sigma_x, float(rng.uniform(0, 1)), stream(SEED, f"acceptance/3/{i}"))
        sol = fit_dual(ds.X, ds.y, gamma)
        mean, se = excess_risk_mc(ds, sol, None, 250, stream(SEED, f"acceptance/3/test/{i}"))
        held += mean <= 4 * decomposition_exact(ds, gamma, sol=sol).total + 3 * se
    ok = held == 200
    acceptance_report("3 excess risk <= 4 x decomposition", ok, f"held on {held}/200 configurations")
    assert ok


def test_c04_lmm_identities(acceptance_report):
    chk, worst = gram_expectation(EigenSpectrum.finite(20), 6, 512, 0.5, 2000, seed=SEED)
    ok = worst <= 1e-10 and chk.within_3se
    acceptance_report(
        "4 LMM identities",
        ok,
        f"X identity error {worst:.1e}; {100 * chk.frac_within_3se:.0f}% of Gram entries within 3 SE (max z {chk.max_z:.2f})",
    )
    assert ok


def test_c05_delta_concentration(acceptance_report):
    chk = delta_decay(EigenSpectrum.finite(20), 32, [2**8, 2**10, 2**12, 2**14], 40, seed=SEED, sigma_x=0.5)
    ok = -0.65 <= chk.slope <= -0.35
    acceptance_report("5 Delta concentration", ok, f"slope {chk.slope:.3f} +/- {chk.slope_se:.3f}")
    assert ok


def test_c06_kernel_oracle(acceptance_report):
    medians = []
    for p in (2**8, 2**11, 2**14):
        gaps = []
        for s in range(20):
            res = run_cosine_demo("finite", "explicit", p, seed=SEED + s, gamma=1e-4, n_test=250)
            gaps.append(float(np.max(np.abs(res.prediction - res.kernel_prediction))))
        medians.append(float(np.median(gaps)))
    ok = medians[0] > medians[1] > medians[2]
    acceptance_report("6 kernel-oracle convergence", ok, "median sup gaps " + ", ".join(f"{m:.3g}" for m in medians))
    assert ok


def test_c07_benign_overfitting(acceptance_report, cache):
    res, elapsed = benign_sweep(cache, workers=1)
    good = [r for r in res.records if not r.failed and r.event_D is False]
    worst = max(r.train_mse / r.mean_y2 for r in good)
    ok_a = len(good) > 0 and worst <= 1e-8
    ok_b = -1.3 <= res.slope <= -0.6
    acceptance_report("7a interpolation", ok_a, f"max train_mse/mean(y^2) {worst:.1e} over {len(good)} trials")
    acceptance_report(
        "7b benign-overfitting rate",
        ok_b and elapsed < 900,
        f"slope {res.slope:.3f} +/- {res.slope_se:.3f}, medians "
        + ", ".join(f"{m:.4g}" for m in res.medians)
        + f", {elapsed:.0f} s",
    )
    assert ok_a and ok_b and elapsed < 900


def _median_at_128(name, seed):
    sc = get_preset(name, seed=seed)
    return float(np.nanmedian([run_trial(sc, 128, t).test_mse for t in range(sc.trials)]))


@pytest.mark.parametrize(
    "family, names",
    [
        ("explicit", ["explicit-eps0.25", "explicit-eps0.5", "explicit-eps1"]),
        ("implicit", ["implicit-alpha0.25", "implicit-alpha0.5", "implicit-alpha1"]),
    ],
)
def test_c08_orderings(acceptance_report, family, names):
    wins, rows = 0, []
    for s in range(5):
        meds = [_median_at_128(name, SEED + s) for name in names]
        wins += meds[0] > meds[1] > meds[2]
        rows.append("/".join(f"{m:.3g}" for m in meds))
    ok = wins >= 4
    acceptance_report(f"8 {family} ordering at n=128", ok, f"{wins}/5 seeds ordered; medians {rows}")
    assert ok


def test_c09_residual_bound_frequency(acceptance_report):
    spec = EigenSpectrum.finite(20)
    target = TargetSpec.cos3(spec)
    v = moment_constants(spec)
    held = 0
    for t in range(200):
        ds = generate_dataset(spec, target, 64, 2**14, 0.5, 0.4, stream(SEED, f"acceptance/9/{t}"))
        dec = decomposition_exact(ds, 0.0)
        held += dec.S <= bound_S(spec, ds, 0.0, (0.1, 0.1, 0.1), v)
    ok = held >= 140
    acceptance_report("9 residual bound frequency", ok, f"S1+S2+S3 <= bound on {held}/200 trials")
    assert ok


def test_c10_temperature(acceptance_report, cache):
    res, elapsed = temperature_run(cache, workers=1)
    med = res.median_rmse(POOLED_GROUP)
    vals = list(med.values())
    baseline = res.lat_sd[POOLED_GROUP]
    decreasing = all(a > b for a, b in zip(vals, vals[1:]))
    ok = decreasing and vals[-1] < 0.5 * baseline and elapsed < 300
    detail = ", ".join(f"p={p}: {v:.3g}" for p, v in med.items())
    acceptance_report("10 temperature pipeline", ok, f"median RMSE {detail}; lat sd {baseline:.3g}; {elapsed:.0f} s")
    assert ok


def test_c11_determinism(acceptance_report, cache, tmp_path):
    sweeps = [benign_sweep(cache, w)[0] for w in (1, 2)]
    temps = [temperature_run(cache, w)[0] for w in (1, 2)]
    paths = []
    for i, (sw, tr) in enumerate(zip(sweeps, temps)):
        sw.write_csv(tmp_path / f"sweep{i}.csv")
        tr.write_csv(tmp_path / f"temp{i}.csv")
        paths.append(((tmp_path / f"sweep{i}.csv").read_bytes(), (tmp_path / f"temp{i}.csv").read_bytes()))
    ok = paths[0] == paths[1]
    acceptance_report("11 determinism across worker counts", ok, "sweep and temperature CSVs byte-identical" if ok else "CSV mismatch")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
