"""Mercer eigensystem of the implicit kernel on [0, pi] with the cosine basis.

Eigenfunctions are u_k(z) = sqrt(2) cos(kz), orthonormal in L2 of the uniform
measure on [0, pi]. Eigenvalues follow one of three regimes (finite rank,
exponential decay, polynomial decay) and are truncated at ``trunc`` for every
finite computation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

ZMAX = math.pi
DOMAIN_TOL = 1e-12
DEFAULT_TRUNC = 10_000
DEFAULT_GRID_SIZE = 2048


class SpectrumError(ValueError):
    """Raised for invalid spectrum parameters or degenerate tail requests."""


class Regime(enum.Enum):
    FINITE = "finite"
    EXPONENTIAL = "exp"
    POLYNOMIAL = "poly"


@dataclass(frozen=True)
class EigenSpectrum:
    """Eigenvalue sequence of the implicit kernel.

    ``k_max`` is the rank for the finite regime (None for infinite regimes).
    ``a`` is the decay rate: lambda_k = exp(-a k) or lambda_k = k^-(a+2).
    """

    regime: Regime
    k_max: int | None = None
    a: float = 1.0
    trunc: int = DEFAULT_TRUNC
    scale: float = 1.0

    def __post_init__(self):
        if self.scale < 0:
            raise SpectrumError("scale must be non-negative")
        if self.trunc < 1:
            raise SpectrumError("trunc must be >= 1")
        if self.regime is Regime.FINITE:
            if self.k_max is None or self.k_max < 1:
                raise SpectrumError("finite regime needs k_max >= 1")
            if self.trunc < self.k_max:
                raise SpectrumError(f"trunc={self.trunc} < k_max={self.k_max}")
        else:
            if self.k_max is not None:
                raise SpectrumError("k_max is only meaningful for the finite regime")
            if self.a <= 0:
                raise SpectrumError("decay rate a must be positive")

    @classmethod
    def finite(cls, k_max: int, scale: float = 1.0, trunc: int | None = None) -> "EigenSpectrum":
        return cls(Regime.FINITE, k_max=k_max, trunc=k_max if trunc is None else trunc, scale=scale)

    @classmethod
    def exponential(cls, a: float = 1.0, trunc: int = DEFAULT_TRUNC, scale: float = 1.0) -> "EigenSpectrum":
        return cls(Regime.EXPONENTIAL, a=a, trunc=trunc, scale=scale)

    @classmethod
    def polynomial(cls, a: float = 2.0, trunc: int = DEFAULT_TRUNC, scale: float = 1.0) -> "EigenSpectrum":
        return cls(Regime.POLYNOMIAL, a=a, trunc=trunc, scale=scale)

    @classmethod
    def zero(cls, trunc: int = 10) -> "EigenSpectrum":
        """All-zero spectrum (degenerate panel)."""
        return cls.finite(1, scale=0.0, trunc=trunc)

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """lambda_1..lambda_trunc as a read-only float64 array."""
        k = np.arange(1, self.trunc + 1, dtype=np.float64)
        if self.regime is Regime.FINITE:
            lam = np.where(k <= self.k_max, self.scale, 0.0)
        elif self.regime is Regime.EXPONENTIAL:
            lam = self.scale * np.exp(-self.a * k)
        else:
            lam = self.scale * k ** (-(self.a + 2.0))
        lam.setflags(write=False)
        return lam

    @cached_property
    def rank(self) -> int:
        """Number of retained coordinates with lambda_k > 0 (the r in I_r)."""
        return int(np.count_nonzero(self.eigenvalues))

    @cached_property
    def sqrt_eigenvalues(self) -> np.ndarray:
        return np.sqrt(self.eigenvalues)

    @property
    def is_finite_rank(self) -> bool:
        return self.regime is Regime.FINITE

    @property
    def label(self) -> str:
        if self.regime is Regime.FINITE:
            return f"finite:k_max={self.k_max}"
        return f"{self.regime.value}:a={self.a:g}"

    def trace(self) -> float:
        return float(_sum_small_first(self.eigenvalues))

    def weighted_trace(self) -> float:
        """sum_k k * lambda_k, finite for every constructible regime."""
        lam = self.eigenvalues
        return float(_sum_small_first(np.arange(1, lam.size + 1) * lam))


def parse_spectrum(text: str, trunc: int | None = None) -> EigenSpectrum:
    """Build a spectrum from a preset string such as ``"finite:k_max=20"``,
    ``"exp:a=1"`` or ``"poly:a=2"``. Extra ``key=value`` pairs (``scale``,
    ``trunc``) may follow, comma separated."""
    name, _, rest = text.strip().partition(":")
    params: dict[str, str] = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise SpectrumError(f"bad spectrum parameter {item!r} in {text!r}")
        params[key.strip()] = val.strip()
    try:
        scale = float(params.pop("scale", 1.0))
        if "trunc" in params:
            trunc = int(params.pop("trunc"))
        if name == "finite":
            k_max = int(params.pop("k_max"))
            spec = EigenSpectrum.finite(k_max, scale=scale, trunc=trunc)
        elif name in ("exp", "poly"):
            default_a = 1.0 if name == "exp" else 2.0
            a = float(params.pop("a", default_a))
            ctor = EigenSpectrum.exponential if name == "exp" else EigenSpectrum.polynomial
            spec = ctor(a=a, trunc=DEFAULT_TRUNC if trunc is None else trunc, scale=scale)
        else:
            raise SpectrumError(f"unknown spectrum regime {name!r}")
    except KeyError as exc:
        raise SpectrumError(f"spectrum {text!r} missing parameter {exc}") from None
    if params:
        raise SpectrumError(f"unknown spectrum parameters {sorted(params)} in {text!r}")
    return spec


def _sum_small_first(values: np.ndarray) -> float:
    # eigenvalues are non-increasing, so reversing accumulates smallest first
    return math.fsum(values[::-1])


def _check_domain(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if np.any(z < -DOMAIN_TOL) or np.any(z > ZMAX + DOMAIN_TOL):
        raise SpectrumError("latent location outside [0, pi]")
    return z


def eigenfunction_eval(k: int, z):
    """u_k(z) = sqrt(2) cos(k z); vectorised over z."""
    if k < 1:
        raise SpectrumError("eigenfunction index must be >= 1")
    z = _check_domain(z)
    out = math.sqrt(2.0) * np.cos(k * z)
    return float(out) if out.ndim == 0 else out


def eigenfunctions(z, trunc: int) -> np.ndarray:
    """Matrix U with U[i, k-1] = u_k(z_i) for k = 1..trunc."""
    z = np.atleast_1d(_check_domain(z))
    k = np.arange(1, trunc + 1, dtype=np.float64)
    return math.sqrt(2.0) * np.cos(np.outer(z, k))


def feature_map(spec: EigenSpectrum, z) -> np.ndarray:
    """Truncated feature map phi(z) = [sqrt(lambda_k) u_k(z)]_{k<=trunc}.

    A scalar z gives a vector of length trunc; an array of n locations gives
    an n x trunc matrix whose rows are feature vectors.
    """
    scalar = np.ndim(z) == 0
    phi = eigenfunctions(z, spec.trunc) * spec.sqrt_eigenvalues
    return phi[0] if scalar else phi


def active_features(spec: EigenSpectrum, z) -> np.ndarray:
    """Feature matrix restricted to the ``spec.rank`` nonzero coordinates."""
    z = np.atleast_1d(z)
    r = spec.rank
    return eigenfunctions(z, r) * spec.sqrt_eigenvalues[:r]


def kernel_eval(spec: EigenSpectrum, z, z_prime) -> float:
    """Truncated Mercer sum f(z, z') = sum_k lambda_k u_k(z) u_k(z')."""
    return float(feature_map(spec, z) @ feature_map(spec, z_prime))


def kernel_matrix(spec: EigenSpectrum, z, z_prime=None) -> np.ndarray:
    phi = active_features(spec, z)
    phi2 = phi if z_prime is None else active_features(spec, z_prime)
    return phi @ phi2.T


def kernel_diagonal(spec: EigenSpectrum, z) -> np.ndarray:
    """f(z, z) for each z, without forming the full kernel matrix."""
    return np.sum(active_features(spec, z) ** 2, axis=1)


def default_grid(size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    return np.linspace(0.0, ZMAX, size)


@dataclass(frozen=True)
class TailStats:
    k: int
    trace_tail: float
    trace_tail_sq: float
    op_norm_tail: float
    r_k: float
    R_k: float
    r_k_sq: float
    degenerate: bool = field(default=False)


def tail_stats(spec: EigenSpectrum, k: int) -> TailStats:
    """Trace and effective-rank statistics of the eigenvalue tail beyond k."""
    if k < 0 or k >= spec.trunc:
        raise SpectrumError(f"cut index k={k} must lie in [0, trunc)")
    tail = spec.eigenvalues[k:]
    tr = _sum_small_first(tail)
    tr_sq = _sum_small_first(tail**2)
    top = float(tail[0])
    if top == 0.0:
        return TailStats(k, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, degenerate=True)
    return TailStats(
        k=k,
        trace_tail=tr,
        trace_tail_sq=tr_sq,
        op_norm_tail=top,
        r_k=tr / top,
        R_k=tr * tr / tr_sq,
        r_k_sq=tr_sq / (top * top),
    )


def alpha_beta(spec: EigenSpectrum, k: int, grid=None) -> tuple[float, float]:
    """Grid extrema of the normalised feature-norm ratios at cut index k.

    alpha_k is the grid minimum of ||phi(z)_{>k}||^2 / tr(Lambda_{>k}); beta_k is
    the grid maximum of the largest of the head ratio ||u(z)_{<=k}||^2 / k and
    the two tail ratios.
    """
    grid = default_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise SpectrumError("grid must be non-empty")
    stats = tail_stats(spec, k)
    if stats.degenerate:
        raise SpectrumError("empty tail")
    lam = spec.eigenvalues
    r = spec.rank
    u = eigenfunctions(grid, r)
    u2 = u**2
    tail_phi = u2[:, k:] @ lam[k:r]
    tail_weighted = u2[:, k:] @ (lam[k:r] ** 2)
    ratios = [tail_phi / stats.trace_tail, tail_weighted / stats.trace_tail_sq]
    if k > 0:
        ratios.append(u2[:, :k].sum(axis=1) / k)
    alpha = float(np.min(ratios[0]))
    beta = float(max(np.max(q) for q in ratios))
    return alpha, beta


def head_ratio_sup(k: int, grid=None) -> float:
    """Grid maximum of ||u(z)_{<=k}||^2 / k (the only beta term when the tail is empty)."""
    grid = default_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    return float(np.max(np.sum(eigenfunctions(grid, k) ** 2, axis=1) / k))


def rho(
    spec: EigenSpectrum,
    gram_tail_eigs: tuple[float, float],
    k: int,
    n: int,
    sigma_x: float,
    gamma: float,
) -> float:
    """Concentration coefficient from the extreme eigenvalues (mu_1, mu_n) of K_{>k}/n."""
    mu_1, mu_n = gram_tail_eigs
    ridge = sigma_x**2 / n + gamma
    den = mu_n + ridge
    if den <= 0.0:
        raise SpectrumError("zero denominator")
    op = spec.eigenvalues[k] if k < spec.trunc else 0.0
    return float((op + mu_1 + ridge) / den)
