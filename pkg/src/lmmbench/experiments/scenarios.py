"""Scenario definitions and the named presets used by the rate sweeps."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

from ..lmm import NOISE_FAMILIES, estimate_bytes
from ..spectrum import parse_spectrum

P_CAP = 2**17


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    """One sweep configuration.

    Regularisation follows gamma = gamma_coef * n**gamma_exp. Covariate noise is
    either the constant ``sigma_x`` or, when ``sigma_x_tie_gamma`` is set,
    sqrt(n * sigma_x_tie_gamma). Dimension is ``p_fixed`` or
    floor(p_coef * n**p_exp).
    """

    name: str
    n_grid: tuple[int, ...] = (16, 32, 64, 128)
    spectrum: str = "finite:k_max=20"
    trunc: int | None = None
    theta: str = "cos3"
    sigma_y: float = 0.4
    gamma_coef: float = 0.0
    gamma_exp: float = 0.0
    sigma_x: float = 0.0
    sigma_x_tie_gamma: float | None = None
    p_coef: float = 1.0
    p_exp: float = 1.0
    p_fixed: int | None = None
    trials: int = 50
    n_test: int = 250
    seed: int = 0
    pinv: bool = False
    noise_family: str = "gaussian"
    regularised: bool = True
    decompose: bool = True
    stream_group: str | None = None
    max_memory_gb: float = 4.0

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        if not self.n_grid or any(n < 1 for n in self.n_grid):
            raise ScenarioError("n_grid must contain positive integers")
        if list(self.n_grid) != sorted(set(self.n_grid)):
            raise ScenarioError("n_grid must be strictly ascending")
        if self.trials < 1 or self.n_test < 2:
            raise ScenarioError("need trials >= 1 and n_test >= 2")
        if self.noise_family not in NOISE_FAMILIES:
            raise ScenarioError(f"noise_family must be one of {NOISE_FAMILIES}")
        if self.gamma_coef < 0 or self.sigma_x < 0:
            raise ScenarioError("gamma_coef and sigma_x must be non-negative")
        if self.regularised:
            by_gamma = self.gamma_coef > 0
            by_noise = self.sigma_x > 0 or bool(self.sigma_x_tie_gamma)
            if by_gamma == by_noise:
                raise ScenarioError(
                    f"scenario {self.name!r} is tagged regularised: exactly one of the "
                    "gamma rule and the sigma_x rule must supply regularisation"
                )

    def gamma(self, n: int) -> float:
        return self.gamma_coef * n**self.gamma_exp if self.gamma_coef else 0.0

    def sigma_x_at(self, n: int) -> float:
        if self.sigma_x_tie_gamma is not None:
            return math.sqrt(n * self.sigma_x_tie_gamma)
        return self.sigma_x

    def p(self, n: int) -> int:
        if self.p_fixed is not None:
            return int(self.p_fixed)
        return max(1, math.floor(self.p_coef * n**self.p_exp + 1e-9))

    def spectrum_obj(self):
        return parse_spectrum(self.spectrum, trunc=self.trunc)

    def check_resources(self) -> None:
        spec = self.spectrum_obj()
        limit = self.max_memory_gb * 2**30
        for n in self.n_grid:
            p = self.p(n)
            if p > P_CAP:
                raise ScenarioError(f"scenario {self.name!r}: p={p} at n={n} exceeds the cap {P_CAP}")
            need = estimate_bytes(n, p, spec.rank, min(self.n_test, 512))
            if need > limit:
                raise ScenarioError(
                    f"scenario {self.name!r}: n={n}, p={p}, rank={spec.rank} needs about "
                    f"{need / 2**30:.2f} GiB, above max_memory_gb={self.max_memory_gb}"
                )

    @property
    def stream_label(self) -> str:
        return self.stream_group or self.name

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_grid"] = list(self.n_grid)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ScenarioError(f"unknown scenario keys: {unknown}")
        return cls(**data)


def explicit_gamma_exponent(eps: float) -> float:
    """Finite-rank explicit schedule gamma = n^{-eps/2}."""
    return -eps / 2.0


def decaying_gamma_exponent(eps: float) -> float:
    """Infinite-rank explicit schedule gamma = n^{-(1+eps)/2}."""
    return -(1.0 + eps) / 2.0


def _build_presets() -> dict[str, Scenario]:
    out: dict[str, Scenario] = {}

    def add(sc: Scenario):
        out[sc.name] = sc

    add(Scenario(name="finite-implicit", spectrum="finite:k_max=20", sigma_x=0.5, p_coef=4.0, p_exp=2.0))
    add(
        Scenario(
            name="finite-explicit",
            spectrum="finite:k_max=20",
            gamma_coef=1.0,
            gamma_exp=explicit_gamma_exponent(0.5),
            p_coef=1.0,
            p_exp=1.5,
        )
    )
    for eps in (0.25, 0.5, 1.0):
        add(
            Scenario(
                name=f"explicit-eps{eps:g}",
                spectrum="finite:k_max=40",
                gamma_coef=1.0,
                gamma_exp=explicit_gamma_exponent(eps),
                p_coef=1.0,
                p_exp=1.25,
                n_grid=(16, 32, 64, 128),
                stream_group="explicit-family",
            )
        )
    for alpha in (0.25, 0.5, 1.0):
        add(
            Scenario(
                name=f"implicit-alpha{alpha:g}",
                spectrum="finite:k_max=40",
                sigma_x=0.1,
                p_coef=0.1**2,
                p_exp=1.0 + alpha,
                pinv=True,
                n_grid=(16, 32, 64, 128),
                stream_group="implicit-family",
            )
        )
    for regime, spectrum, trunc in (("exp", "exp:a=1", None), ("poly", "poly:a=2", 2000)):
        add(
            Scenario(
                name=f"{regime}-explicit",
                spectrum=spectrum,
                trunc=trunc,
                gamma_coef=1.0,
                gamma_exp=decaying_gamma_exponent(0.5),
                p_coef=1.0,
                p_exp=1.5,
            )
        )
        add(
            Scenario(
                name=f"{regime}-implicit",
                spectrum=spectrum,
                trunc=trunc,
                sigma_x=0.5,
                p_coef=1.0,
                p_exp=2.0,
                n_grid=(16, 32, 64),
            )
        )
    return out


PRESETS = _build_presets()


def get_preset(name: str, **overrides) -> Scenario:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ScenarioError(f"unknown scenario preset {name!r}; known: {sorted(PRESETS)}") from None
    return replace(base, **overrides) if overrides else base
