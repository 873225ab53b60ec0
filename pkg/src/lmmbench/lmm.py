"""Sampling from the Latent Metric Model.

Random functions psi_j are zero-mean Gaussian processes with the spectrum's
kernel, drawn through their Karhunen-Loeve expansion
psi_j(z) = sum_k sqrt(lambda_k) xi_jk u_k(z). This keeps the projection matrix
W_jk = xi_jk / sqrt(p) available exactly, so X = sqrt(p) Phi W^T + sigma_x E
holds up to rounding.

W and Phi are stored on the ``spec.rank`` coordinates with nonzero
eigenvalue; the dropped columns are identically zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spectrum import (
    EigenSpectrum,
    active_features,
    default_grid,
    kernel_diagonal,
)

NOISE_FAMILIES = ("gaussian", "rademacher")
BLOCK_COLS = 8192


class LmmError(ValueError):
    pass


@dataclass(frozen=True)
class TargetSpec:
    """Regression target g(z) = <phi(z), theta*>."""

    theta_star: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta_star, dtype=np.float64)
        if theta.ndim != 1 or not np.all(np.isfinite(theta)):
            raise LmmError("theta_star must be a finite vector")
        theta.setflags(write=False)
        object.__setattr__(self, "theta_star", theta)

    @classmethod
    def cos3(cls, spec: EigenSpectrum) -> "TargetSpec":
        """Coefficients giving g(z) = cos(3z) exactly."""
        lam = spec.eigenvalues
        if spec.trunc < 3 or lam[2] <= 0:
            raise LmmError("cos3 target needs lambda_3 > 0")
        theta = np.zeros(spec.trunc)
        theta[2] = 1.0 / (math.sqrt(2.0) * math.sqrt(lam[2]))
        return cls(theta)

    def active(self, spec: EigenSpectrum) -> np.ndarray:
        """theta* restricted to the retained coordinates of ``spec``."""
        theta = self.theta_star
        if theta.size != spec.trunc:
            raise LmmError(f"theta_star has length {theta.size}, spectrum trunc is {spec.trunc}")
        r = spec.rank
        if np.any(theta[r:] != 0.0):
            raise LmmError("theta_star must vanish where lambda_k = 0")
        return theta[:r]

    def g(self, spec: EigenSpectrum, z) -> np.ndarray:
        return active_features(spec, z) @ self.active(spec)

    def sup_abs_g(self, spec: EigenSpectrum, grid=None) -> float:
        grid = default_grid() if grid is None else grid
        return float(np.max(np.abs(self.g(spec, grid))))


def parse_target(value, spec: EigenSpectrum) -> TargetSpec:
    if isinstance(value, str):
        if value == "cos3":
            return TargetSpec.cos3(spec)
        raise LmmError(f"unknown theta_star preset {value!r}")
    theta = np.zeros(spec.trunc)
    vals = np.asarray(value, dtype=np.float64)
    if vals.size > spec.trunc:
        raise LmmError("explicit theta_star longer than trunc")
    theta[: vals.size] = vals
    return TargetSpec(theta)


@dataclass(frozen=True)
class LmmDataset:
    spec: EigenSpectrum
    target: TargetSpec
    z: np.ndarray
    Psi: np.ndarray
    E_mat: np.ndarray
    X: np.ndarray
    y: np.ndarray
    eps: np.ndarray
    W: np.ndarray
    Phi: np.ndarray
    sigma_x: float
    sigma_y: float
    noise_family: str = "gaussian"
    seed: int | None = field(default=None, compare=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def g_train(self) -> np.ndarray:
        return self.Phi @ self.target.active(self.spec)

    @property
    def lam(self) -> np.ndarray:
        return self.spec.eigenvalues[: self.spec.rank]


def sample_latents(n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise LmmError("n must be >= 1")
    return rng.uniform(0.0, math.pi, size=n)


def sample_unit_noise(rng: np.random.Generator, shape, family: str = "gaussian") -> np.ndarray:
    """Zero-mean, unit-variance noise with the requested distribution."""
    if family == "gaussian":
        return rng.standard_normal(shape)
    if family == "rademacher":
        return rng.integers(0, 2, size=shape).astype(np.float64) * 2.0 - 1.0
    raise LmmError(f"unknown noise family {family!r}")


def sample_W(spec: EigenSpectrum, p: int, rng: np.random.Generator) -> np.ndarray:
    """Projection matrix W (p x rank) with i.i.d. N(0, 1/p) entries."""
    if p < 1:
        raise LmmError("p must be >= 1")
    return rng.standard_normal((p, spec.rank)) / math.sqrt(p)


def panel_from_W(Phi: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Psi = sqrt(p) Phi W^T, assembled in column blocks over p."""
    n, p = Phi.shape[0], W.shape[0]
    Psi = np.empty((n, p))
    root_p = math.sqrt(p)
    for start in range(0, p, BLOCK_COLS):
        stop = min(start + BLOCK_COLS, p)
        Psi[:, start:stop] = root_p * (Phi @ W[start:stop].T)
    return Psi


def sample_gp_panel(spec: EigenSpectrum, z, p: int, rng: np.random.Generator):
    """Evaluate p independent GP sample paths at z; returns (Psi, W)."""
    W = sample_W(spec, p, rng)
    Phi = active_features(spec, np.asarray(z))
    return panel_from_W(Phi, W), W


def generate_dataset(
    spec: EigenSpectrum,
    target: TargetSpec,
    n: int,
    p: int,
    sigma_x: float,
    sigma_y: float,
    rng: np.random.Generator,
    noise_family: str = "gaussian",
    seed: int | None = None,
    z: np.ndarray | None = None,
    eps: np.ndarray | None = None,
) -> LmmDataset:
    """Draw one realisation (z, Psi, E, eps) and assemble X and y.

    Draw order is fixed (latents, panel, covariate noise, response noise) so a
    given stream always yields the same dataset. Supplying ``z`` or ``eps``
    skips that draw, which keeps a training sample fixed while the panel is
    redrawn (e.g. across several p).
    """
    if sigma_x < 0 or sigma_y < 0:
        raise LmmError("noise levels must be non-negative")
    theta = target.active(spec)
    if z is None:
        z = sample_latents(n, rng)
    else:
        z = np.array(z, dtype=np.float64)
        if z.shape != (n,):
            raise LmmError(f"z has shape {z.shape}, expected ({n},)")
    Phi = active_features(spec, z)
    W = sample_W(spec, p, rng)
    Psi = panel_from_W(Phi, W)
    E_mat = sample_unit_noise(rng, (n, p), noise_family)
    if eps is None:
        eps = sigma_y * sample_unit_noise(rng, n, noise_family)
    else:
        eps = np.array(eps, dtype=np.float64)
        if eps.shape != (n,):
            raise LmmError(f"eps has shape {eps.shape}, expected ({n},)")
    X = Psi + sigma_x * E_mat if sigma_x else Psi.copy()
    y = Phi @ theta + eps
    for arr in (z, Psi, E_mat, X, y, eps, W, Phi):
        arr.setflags(write=False)
    return LmmDataset(
        spec=spec,
        target=target,
        z=z,
        Psi=Psi,
        E_mat=E_mat,
        X=X,
        y=y,
        eps=eps,
        W=W,
        Phi=Phi,
        sigma_x=float(sigma_x),
        sigma_y=float(sigma_y),
        noise_family=noise_family,
        seed=seed,
    )


def make_test_points(ds: LmmDataset, m: int, rng: np.random.Generator):
    """m fresh test pairs: z_test ~ U[0, pi], x_test = sqrt(p) W phi(z_test) + sigma_x e_test.

    The same W as the training panel is reused. Returns (z_test, X_test, e_test)
    with X_test of shape (m, p).
    """
    z_test = sample_latents(m, rng)
    phi_test = active_features(ds.spec, z_test)
    e_test = sample_unit_noise(rng, (m, ds.p), ds.noise_family)
    X_test = panel_from_W(phi_test, ds.W)
    if ds.sigma_x:
        X_test += ds.sigma_x * e_test
    return z_test, X_test, e_test


def make_test_point(ds: LmmDataset, rng: np.random.Generator) -> tuple[float, np.ndarray]:
    z_test, X_test, _ = make_test_points(ds, 1, rng)
    return float(z_test[0]), X_test[0]


def moment_constants(spec: EigenSpectrum, grid=None, full_grid: bool = False) -> tuple[float, float, float]:
    """(v1, v2, v3) for a Gaussian panel.

    For zero-mean Gaussian psi, Var[psi(z) psi(z')] = f(z,z) f(z',z') + f(z,z')^2.
    By Cauchy-Schwarz the maximum over grid x grid sits on the diagonal, so
    v1 = 2 max f(z,z)^2; ``full_grid=True`` evaluates every pair instead.
    v3 is the fourth moment of a standard normal.
    """
    grid = default_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    diag = kernel_diagonal(spec, grid)
    v2 = float(np.max(diag)) if diag.size else 0.0
    if full_grid:
        phi = active_features(spec, grid)
        f = phi @ phi.T
        v1 = float(np.max(np.outer(diag, diag) + f**2))
    else:
        v1 = 2.0 * v2 * v2
    return v1, v2, 3.0


def estimate_bytes(n: int, p: int, rank: int, n_test: int = 0) -> int:
    """Rough peak memory of one dataset plus a test batch, in bytes."""
    # W, Psi, E, X, test covariates and test noise, float64
    return 8 * (p * rank + 3 * n * p + 2 * n_test * p + n * rank)
