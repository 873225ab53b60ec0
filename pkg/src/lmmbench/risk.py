"""Prediction-error decomposition, perturbation matrix and bound evaluation.

With A = p^{-1} X X^T + n gamma I and theta_hat(v) = Phi^T A^{-1} v, the excess
risk is bounded by 4 (B + V + S1 + S2 + S3). Every term is an exact
conditional expectation over (z_test, e_test, eps) given the training draw,
computed here in closed form from trace identities. The absolute constants
of the probabilistic bounds are set to 1, so bound values carry trend
information only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import ridge
from .lmm import LmmDataset, TargetSpec, make_test_points, moment_constants
from .spectrum import (
    EigenSpectrum,
    SpectrumError,
    active_features,
    alpha_beta,
    head_ratio_sup,
    rho,
    tail_stats,
)

TEST_CHUNK = 512


class RiskError(ValueError):
    pass


@dataclass(frozen=True)
class RiskDecomposition:
    B: float
    V: float
    S1: float
    S2: float
    S3: float
    delta_opnorm: float
    mu_n_K: float
    mu_n_A: float
    event_C: bool
    event_D: bool
    excess_risk_mc: float | None = None
    excess_risk_se: float | None = None

    @property
    def total(self) -> float:
        return self.B + self.V + self.S1 + self.S2 + self.S3

    @property
    def S(self) -> float:
        return self.S1 + self.S2 + self.S3


@dataclass(frozen=True)
class BoundReport:
    k: int
    V_bound: float
    B_bound: float
    V_branch_rank: float
    V_branch_trace: float
    rho_k_n: float
    applicable: bool
    precondition_margin: float
    S_bound: float | None = None
    probC_bound: float | None = None
    finite_rank_variant: bool = False


# ---------------------------------------------------------------- helpers


class _GramSystem:
    """Eigendecomposition of A shared by all terms of one decomposition."""

    def __init__(self, ds: LmmDataset, gamma: float, pinv: bool = False, sol=None):
        self.n, self.p = ds.n, ds.p
        if sol is not None and sol.eig is not None:
            self.evals_A, self.V, self.evals_G = sol.eig
            gamma, pinv = sol.gamma, sol.pinv
        else:
            G = ridge.scaled_gram(ds.X)
            self.evals_A, self.V, self.evals_G = ridge.gram_eigh(G, gamma, self.n)
        self.G = (self.V * self.evals_G) @ self.V.T
        self.gamma = gamma
        self.pinv = pinv
        try:
            self.Ainv = ridge.solve_from_eigh(
                self.evals_A, self.V, self.evals_G, np.eye(self.n), gamma, pinv=pinv
            )
        except np.linalg.LinAlgError as exc:
            raise RiskError(f"A singular: {exc}") from None

    @property
    def mu_n_A(self) -> float:
        return float(self.evals_A[0])


def _min_eig_psd(M: np.ndarray, rank_bound: int) -> float:
    """Smallest eigenvalue of a PSD n x n matrix known to have rank <= rank_bound."""
    n = M.shape[0]
    if rank_bound < n:
        return 0.0
    return max(float(np.linalg.eigvalsh(M)[0]), 0.0)


def tail_gram(Phi: np.ndarray, k: int) -> np.ndarray:
    """K_{>k} = Phi_{>k} Phi_{>k}^T (K itself for k = 0)."""
    tail = Phi[:, k:]
    return tail @ tail.T


def mu_n_tail(Phi: np.ndarray, k: int) -> float:
    return _min_eig_psd(tail_gram(Phi, k), max(Phi.shape[1] - k, 0))


# ---------------------------------------------------------------- Delta


def delta_matrix(ds: LmmDataset) -> tuple[np.ndarray, float]:
    """Delta = Phi (W^T W - I) Phi^T + p^{-1/2} s (Phi W^T E^T + E W Phi^T) + p^{-1} s^2 (E E^T - p I)."""
    p = ds.p
    P = ds.W @ ds.Phi.T  # p x n
    delta = P.T @ P - ds.Phi @ ds.Phi.T
    if ds.sigma_x:
        C = ds.E_mat @ P
        delta += ds.sigma_x / math.sqrt(p) * (C + C.T)
        delta += ds.sigma_x**2 * (ridge.scaled_gram(ds.E_mat) - np.eye(ds.n))
    delta = 0.5 * (delta + delta.T)
    ev = np.linalg.eigvalsh(delta)
    return delta, float(max(abs(ev[0]), abs(ev[-1])))


def event_indicators(
    ds: LmmDataset, k: int, gamma: float, delta_opnorm: float | None = None
) -> tuple[bool, bool]:
    """(C, D): C when 2||Delta|| >= mu_n(K_{>k}) + sigma_x^2 + n gamma, D when that sum is 0."""
    if not 0 <= k <= ds.n:
        raise RiskError("event cut index must satisfy 0 <= k <= n")
    if delta_opnorm is None:
        delta_opnorm = delta_matrix(ds)[1]
    level = mu_n_tail(ds.Phi, k) + ds.sigma_x**2 + ds.n * gamma
    return bool(2.0 * delta_opnorm >= level), bool(level == 0.0)


# ---------------------------------------------------------------- decomposition


def decomposition_exact(
    ds: LmmDataset,
    gamma: float,
    target: TargetSpec | None = None,
    pinv: bool = False,
    delta_opnorm: float | None = None,
    sol: ridge.RidgeSolution | None = None,
) -> RiskDecomposition:
    """Closed-form B, V, S1, S2, S3 with event indicators at k = 0.

    Passing the fitted ``sol`` reuses its eigendecomposition of A.
    """
    target = ds.target if target is None else target
    sysA = _GramSystem(ds, gamma, pinv=pinv, sol=sol)
    return _decompose(ds, gamma, target, sysA, delta_opnorm)


def _decompose(ds, gamma, target, sysA: _GramSystem, delta_opnorm=None) -> RiskDecomposition:
    n, p = ds.n, ds.p
    lam = ds.lam
    root_lam = np.sqrt(lam)
    theta = target.active(ds.spec)
    Phi = ds.Phi
    Ainv = sysA.Ainv
    b = Phi @ theta
    s2y = ds.sigma_y**2

    # theta_hat(v) = Phi^T A^{-1} v
    T = Phi.T @ Ainv  # r x n
    bias_vec = T @ b - theta
    B = float(np.sum(lam * bias_vec**2))
    V = s2y * float(np.sum((root_lam[:, None] * T) ** 2))

    P = ds.W @ Phi.T  # p x n
    M = root_lam[:, None] * (ds.W.T @ P - Phi.T)  # Lambda^{1/2} (W^T W - I) Phi^T
    MA = M @ Ainv
    S1 = float(np.sum((MA @ b) ** 2) + s2y * np.sum(MA**2))

    if ds.sigma_x:
        EtA = ds.E_mat.T @ Ainv  # p x n
        N = root_lam[:, None] * (ds.W.T @ EtA)  # Lambda^{1/2} W^T E^T A^{-1}
        S2 = ds.sigma_x**2 / p * float(np.sum((N @ b) ** 2) + s2y * np.sum(N**2))
        # ||X^T v||^2 = p v^T G v
        AGA = Ainv @ sysA.G @ Ainv
        S3 = ds.sigma_x**2 / p * float(b @ AGA @ b + s2y * np.trace(AGA))
    else:
        S2 = S3 = 0.0

    if delta_opnorm is None:
        delta_opnorm = delta_matrix(ds)[1]
    mu_K = mu_n_tail(Phi, 0)
    level = mu_K + ds.sigma_x**2 + n * gamma
    return RiskDecomposition(
        B=B,
        V=V,
        S1=max(S1, 0.0),
        S2=max(S2, 0.0),
        S3=max(S3, 0.0),
        delta_opnorm=delta_opnorm,
        mu_n_K=mu_K,
        mu_n_A=sysA.mu_n_A,
        event_C=bool(2.0 * delta_opnorm >= level),
        event_D=bool(level == 0.0),
    )


def excess_risk_exact(
    ds: LmmDataset, gamma: float, target: TargetSpec | None = None, pinv: bool = False
) -> float:
    """Exact E_{z_test, e_test, eps} |p^{-1/2} x_test^T beta_hat(y) - g(z_test)|^2."""
    target = ds.target if target is None else target
    sysA = _GramSystem(ds, gamma, pinv=pinv)
    p = ds.p
    lam = ds.lam
    theta = target.active(ds.spec)
    b = ds.Phi @ theta
    # Q = p^{-1/2} W^T X^T A^{-1}, so the test prediction is phi^T Q y + (s/p) e^T X^T A^{-1} y
    Q = (ds.W.T @ ds.X.T) @ sysA.Ainv / math.sqrt(p)
    main = float(np.sum(lam * (Q @ b - theta) ** 2) + ds.sigma_y**2 * np.sum(lam[:, None] * Q**2))
    AGA = sysA.Ainv @ sysA.G @ sysA.Ainv
    noise = ds.sigma_x**2 / p * float(b @ AGA @ b + ds.sigma_y**2 * np.trace(AGA))
    return main + noise


# ---------------------------------------------------------------- Monte Carlo risk


@dataclass(frozen=True)
class HoldoutErrors:
    """Per-test-point squared errors for one fitted dataset."""

    realized: np.ndarray
    eps_averaged: np.ndarray

    @staticmethod
    def _summary(values: np.ndarray) -> tuple[float, float]:
        m = values.size
        return float(values.mean()), float(values.std(ddof=1) / math.sqrt(m))

    def realized_summary(self) -> tuple[float, float]:
        return self._summary(self.realized)

    def averaged_summary(self) -> tuple[float, float]:
        return self._summary(self.eps_averaged)


def holdout_errors(
    ds: LmmDataset,
    sol: ridge.RidgeSolution,
    n_test: int,
    rng: np.random.Generator,
    target: TargetSpec | None = None,
) -> HoldoutErrors:
    """Squared prediction errors at n_test fresh test pairs.

    ``realized`` uses the training responses actually drawn; ``eps_averaged``
    integrates the response noise analytically, (h^T Phi theta* - g)^2 + sigma_y^2 ||h||^2
    with h = p^{-1} A^{-1} X x_test.
    """
    if n_test < 2:
        raise RiskError("n_test must be >= 2")
    target = ds.target if target is None else target
    theta = target.active(ds.spec)
    b = ds.Phi @ theta
    Ainv = ridge.solve_from_eigh(*sol.eig, np.eye(ds.n), sol.gamma, pinv=sol.pinv)
    realized, averaged = [], []
    for start in range(0, n_test, TEST_CHUNK):
        m = min(TEST_CHUNK, n_test - start)
        z_test, X_test, _ = make_test_points(ds, m, rng)
        g = target.g(ds.spec, z_test)
        H = ridge.scaled_gram(X_test, ds.X) @ Ainv  # rows are h^T
        realized.append((H @ ds.y - g) ** 2)
        averaged.append((H @ b - g) ** 2 + ds.sigma_y**2 * np.sum(H**2, axis=1))
    return HoldoutErrors(np.concatenate(realized), np.concatenate(averaged))


def excess_risk_mc(
    ds: LmmDataset,
    sol: ridge.RidgeSolution,
    target: TargetSpec | None,
    n_test: int,
    rng: np.random.Generator,
    n_eps: int | None = None,
) -> tuple[float, float]:
    """Monte Carlo estimate (mean, stderr) of the excess risk.

    By default the response noise is averaged analytically per test point.
    With ``n_eps`` set, each test point instead averages over n_eps >= 32
    refits on resampled responses y = Phi theta* + eps. The refits are shared
    by all test points, so the stderr there is conditional on those draws.
    """
    if n_test < 2:
        raise RiskError("n_test must be >= 2")
    if n_eps is None:
        return holdout_errors(ds, sol, n_test, rng, target).averaged_summary()
    if n_eps < 32:
        raise RiskError("eps resampling needs n_eps >= 32")
    from .lmm import sample_unit_noise

    target = ds.target if target is None else target
    b = ds.Phi @ target.active(ds.spec)
    eps = ds.sigma_y * sample_unit_noise(rng, (ds.n, n_eps), ds.noise_family)
    Y = b[:, None] + eps
    duals = ridge.solve_from_eigh(*sol.eig, Y, sol.gamma, pinv=sol.pinv)  # one refit per column
    errs = []
    for start in range(0, n_test, TEST_CHUNK):
        m = min(TEST_CHUNK, n_test - start)
        z_test, X_test, _ = make_test_points(ds, m, rng)
        g = target.g(ds.spec, z_test)
        pred = ridge.scaled_gram(X_test, ds.X) @ duals  # m x n_eps
        errs.append(np.mean((pred - g[:, None]) ** 2, axis=1))
    return HoldoutErrors._summary(np.concatenate(errs))


# ---------------------------------------------------------------- bounds


def _precondition(beta_k: float, k: int, n: int) -> float:
    klogk = k * math.log(k) if k > 1 else 0.0
    return n - beta_k * klogk


def bound_V_B(
    spec: EigenSpectrum,
    ds: LmmDataset,
    k: int,
    gamma: float,
    delta: float,
    target: TargetSpec | None = None,
    grid=None,
) -> BoundReport:
    """Constants-free bracketed expressions bounding V and B at cut index k.

    For finite rank with k = k_max the finite-rank variant is used. The report
    is marked not applicable (never raised) when preconditions fail.
    """
    if not 0 < delta < 1:
        raise RiskError("delta must lie in (0, 1)")
    target = ds.target if target is None else target
    n = ds.n
    ridge_term = ds.sigma_x**2 + n * gamma
    lam_full = spec.eigenvalues
    theta = target.theta_star
    s2y = ds.sigma_y**2

    if spec.is_finite_rank and k >= spec.k_max:
        k = spec.k_max
        lam = lam_full[:k]
        beta_k = head_ratio_sup(k, grid)
        margin = _precondition(beta_k, k, n)
        with np.errstate(divide="ignore"):
            theta_inv = float(np.sum(np.where(lam > 0, theta[:k] ** 2 / lam, 0.0)))
        return BoundReport(
            k=k,
            V_bound=s2y * k / n,
            B_bound=theta_inv * ridge_term**2 / n**2,
            V_branch_rank=0.0,
            V_branch_trace=0.0,
            rho_k_n=1.0,
            applicable=bool(margin >= 0 and max(ds.sigma_x, gamma) > 0),
            precondition_margin=margin,
            finite_rank_variant=True,
        )

    stats = tail_stats(spec, k)
    if stats.degenerate:
        raise RiskError("empty tail: use the finite-rank variant")
    alpha_k, beta_k = alpha_beta(spec, k, grid)
    Kt = tail_gram(ds.Phi, k) / n
    ev = np.linalg.eigvalsh(Kt)
    mu_1 = max(float(ev[-1]), 0.0)
    mu_n = 0.0 if ds.Phi.shape[1] - k < n else max(float(ev[0]), 0.0)
    try:
        rho_kn = rho(spec, (mu_1, mu_n), k, n, ds.sigma_x, gamma)
    except SpectrumError:
        return BoundReport(k, math.inf, math.inf, math.inf, math.inf, math.inf, False, _precondition(beta_k, k, n))

    branch_rank = stats.r_k_sq / n
    branch_trace = (n / stats.R_k) * stats.trace_tail**2 / (alpha_k * stats.trace_tail + ridge_term) ** 2
    V_bound = rho_kn**2 * s2y * (k / n + min(branch_rank, branch_trace))
    lam_head = lam_full[:k]
    head = float(np.sum(theta[:k] ** 2 / lam_head)) if k else 0.0
    tail = float(np.sum(lam_full[k:] * theta[k:] ** 2))
    B_bound = rho_kn**3 * (tail / delta + head / n**2 * (beta_k * stats.trace_tail + ridge_term) ** 2)
    margin = _precondition(beta_k, k, n)
    return BoundReport(
        k=k,
        V_bound=V_bound,
        B_bound=B_bound,
        V_branch_rank=branch_rank,
        V_branch_trace=branch_trace,
        rho_k_n=rho_kn,
        applicable=bool(margin >= 0 and math.isfinite(V_bound) and math.isfinite(B_bound)),
        precondition_margin=margin,
    )


def bound_S(
    spec: EigenSpectrum,
    ds: LmmDataset,
    gamma: float,
    deltas: tuple[float, float, float],
    v: tuple[float, float, float] | None = None,
    target: TargetSpec | None = None,
    grid=None,
) -> float:
    """High-probability bound on S1 + S2 + S3 (probability >= 1 - sum(deltas) off events C, D)."""
    if any(not 0 < d < 1 for d in deltas):
        raise RiskError("each delta_i must lie in (0, 1)")
    target = ds.target if target is None else target
    v1, v2, _ = moment_constants(spec, grid) if v is None else v
    d1, d2, d3 = deltas
    n, p, s2 = ds.n, ds.p, ds.sigma_x**2
    den = mu_n_tail(ds.Phi, 0) + s2 + n * gamma
    if den <= 0:
        raise RiskError("zero denominator (event D)")
    moments = v1 / d1 + s2 * v2 / d2 + s2 * (v2 + s2) / d3
    g_term = target.sup_abs_g(spec, grid) ** 2 + ds.sigma_y**2 / n
    return 4.0 * n**2 / p * moments * g_term / den**2


def tail_eig_probability(
    spec: EigenSpectrum, n: int, k: int, phi_k: float, reps: int, rng: np.random.Generator
) -> float:
    """Monte Carlo estimate of P(mu_n(K_{>k}) >= phi_k) over latent redraws."""
    if phi_k <= 0:
        return 1.0
    hits = 0
    for _ in range(reps):
        z = rng.uniform(0.0, math.pi, size=n)
        hits += mu_n_tail(active_features(spec, z), k) >= phi_k
    return hits / reps


def prob_C_bound(
    spec: EigenSpectrum,
    n: int,
    p: int,
    k: int,
    gamma: float,
    sigma_x: float,
    v: tuple[float, float, float],
    phi_k: float,
    p_hat: float | None = None,
    rng: np.random.Generator | None = None,
    reps: int = 200,
) -> float:
    """Upper bound on P(C^{(k)}), clamped to [0, 1].

    ``p_hat`` estimates P(mu_n(K_{>k}) >= phi_k); when omitted it is
    estimated by ``reps`` latent redraws from ``rng``.
    """
    if phi_k < 0:
        raise RiskError("phi_k must be non-negative")
    if p_hat is None:
        if phi_k > 0 and rng is None:
            raise RiskError("need rng or p_hat to estimate the tail-eigenvalue probability")
        p_hat = tail_eig_probability(spec, n, k, phi_k, reps, rng)
    v1, v2, v3 = v
    s2 = sigma_x**2
    den = (phi_k + s2 + n * gamma) ** 2
    if den == 0:
        return 1.0
    factor = 1.0 - 24.0 * n**2 / p * (v1 + 8 * s2 * v2 + 2 * s2**2 * v3) / den
    return float(min(1.0, max(0.0, 1.0 - factor * p_hat)))


def with_excess(dec: RiskDecomposition, mean: float, se: float) -> RiskDecomposition:
    return replace(dec, excess_risk_mc=mean, excess_risk_se=se)
