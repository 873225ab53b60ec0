"""Monte Carlo checks of the structural identities behind the LMM."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..lmm import generate_dataset, parse_target, sample_latents, sample_unit_noise, sample_W, panel_from_W
from ..ridge import scaled_gram
from ..risk import delta_matrix
from ..seeding import stream
from ..spectrum import EigenSpectrum, active_features
from .sweep import fit_loglog_slope


@dataclass(frozen=True)
class MeanCheck:
    """Entrywise MC means of a random matrix against its expectation."""

    name: str
    reps: int
    max_abs_dev: float
    se_at_max: float
    max_z: float
    frac_within_3se: float
    max_offdiag_abs_mean: float | None = None
    se_at_offdiag: float | None = None
    max_diag_dev: float | None = None

    @property
    def within_3se(self) -> bool:
        return self.frac_within_3se == 1.0

    def to_dict(self) -> dict:
        return asdict(self)


def _mean_check(name: str, samples: np.ndarray, expected: np.ndarray, square: bool = True) -> MeanCheck:
    reps = samples.shape[0]
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / math.sqrt(reps)
    dev = np.abs(mean - expected)
    # entries with zero spread (e.g. exact zeros) need exact agreement
    z = np.where(se > 0, dev / np.where(se > 0, se, 1.0), np.where(dev > 0, np.inf, 0.0))
    i = np.unravel_index(np.argmax(dev), dev.shape)
    extra = {}
    if square and mean.ndim == 2 and mean.shape[0] == mean.shape[1]:
        off = ~np.eye(mean.shape[0], dtype=bool)
        j = np.unravel_index(np.argmax(np.where(off, np.abs(mean), -1.0)), mean.shape)
        extra = dict(
            max_offdiag_abs_mean=float(abs(mean[j])),
            se_at_offdiag=float(se[j]),
            max_diag_dev=float(np.max(np.abs(np.diag(mean) - np.diag(expected)))),
        )
    return MeanCheck(
        name=name,
        reps=reps,
        max_abs_dev=float(dev[i]),
        se_at_max=float(se[i]),
        max_z=float(np.max(z)),
        frac_within_3se=float(np.mean(z <= 3.0)),
        **extra,
    )


def w_orthonormality(spec: EigenSpectrum, p: int, reps: int, seed: int, max_coords: int = 20) -> MeanCheck:
    """E[W^T W] = I over the first ``max_coords`` retained coordinates."""
    r = min(spec.rank, max_coords)
    samples = np.empty((reps, r, r))
    for i in range(reps):
        W = sample_W(spec, p, stream(seed, f"diag/w/p={p}/rep={i}"))[:, :r]
        samples[i] = W.T @ W
    return _mean_check("w-orthonormality", samples, np.eye(r))


def gram_expectation(
    spec: EigenSpectrum, n: int, p: int, sigma_x: float, reps: int, seed: int
) -> tuple[MeanCheck, float]:
    """Fixed z: MC mean of p^{-1} X X^T over panel redraws against Phi Phi^T + sigma_x^2 I.

    Also returns the worst elementwise error of X = sqrt(p) Phi W^T + sigma_x E
    across the redraws.
    """
    z = sample_latents(n, stream(seed, "diag/gram/z"))
    Phi = active_features(spec, z)
    expected = Phi @ Phi.T + sigma_x**2 * np.eye(n)
    samples = np.empty((reps, n, n))
    worst = 0.0
    for i in range(reps):
        rng = stream(seed, f"diag/gram/rep={i}")
        W = sample_W(spec, p, rng)
        Psi = panel_from_W(Phi, W)
        E = sample_unit_noise(rng, (n, p))
        X = Psi + sigma_x * E
        worst = max(worst, float(np.max(np.abs(X - (math.sqrt(p) * Phi @ W.T + sigma_x * E)))))
        samples[i] = scaled_gram(X)
    return _mean_check("gram-expectation", samples, expected), worst


@dataclass(frozen=True)
class DecayCheck:
    p_grid: list[int]
    medians: list[float]
    slope: float
    slope_se: float


def delta_decay(
    spec: EigenSpectrum,
    n: int,
    p_grid,
    trials: int,
    seed: int,
    sigma_x: float = 0.0,
    sigma_y: float = 0.4,
    theta="cos3",
) -> DecayCheck:
    """Median ||Delta||_2 across p and its log-log slope."""
    target = parse_target(theta, spec)
    medians = []
    for p in p_grid:
        norms = []
        for t in range(trials):
            ds = generate_dataset(spec, target, n, p, sigma_x, sigma_y, stream(seed, f"diag/delta/p={p}/trial={t}"))
            norms.append(delta_matrix(ds)[1])
        medians.append(float(np.median(norms)))
    slope, se = fit_loglog_slope(list(p_grid), medians)
    return DecayCheck(list(p_grid), medians, slope, se)
