"""Independent reference computations used by the test suite.

Nothing here calls the closed-form paths under test: the Monte Carlo oracle
evaluates each risk term from its expectation form with fresh draws, and the
spectral references use quadrature or closed-form series.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from lmmbench.spectrum import active_features


def cosine_inner_product(m: int, k: int) -> float:
    """(1/pi) int_0^pi u_m u_k dz by adaptive quadrature."""
    val, _ = integrate.quad(lambda z: 2.0 * math.cos(m * z) * math.cos(k * z), 0.0, math.pi, limit=200)
    return val / math.pi


def geometric_tail(a: float, k: int) -> dict:
    """Tail statistics of lambda_j = exp(-a j) for an untruncated spectrum."""
    q = math.exp(-a)
    lam_next = math.exp(-a * (k + 1))
    trace = lam_next / (1 - q)
    trace_sq = lam_next**2 / (1 - q * q)
    return {
        "trace_tail": trace,
        "trace_tail_sq": trace_sq,
        "r_k": trace / lam_next,
        "R_k": trace**2 / trace_sq,
        "r_k_sq": trace_sq / lam_next**2,
    }


def _solve_A(ds, gamma):
    n, p = ds.n, ds.p
    A = ds.X @ ds.X.T / p + n * gamma * np.eye(n)
    return A


def mc_decomposition(ds, gamma: float, draws: int, rng: np.random.Generator, chunk: int = 200_000) -> dict:
    """Brute-force (mean, stderr) of B, V, S1, S2, S3 from their expectation definitions.

    Each draw takes a fresh z_test, e_test and response noise eps. B uses
    ||v||_Lambda^2 = E_z (phi(z)^T v)^2.
    """
    n, p = ds.n, ds.p
    A = _solve_A(ds, gamma)
    theta = ds.target.active(ds.spec)
    b = ds.Phi @ theta
    Ainv_b = np.linalg.solve(A, b)
    bias_coef = ds.Phi.T @ Ainv_b - theta  # theta_hat(Phi theta*) - theta*
    WtW_I = ds.W.T @ ds.W - np.eye(ds.W.shape[1])
    sums = {k: [0.0, 0.0] for k in ("B", "V", "S1", "S2", "S3")}
    done = 0
    while done < draws:
        m = min(chunk, draws - done)
        z = rng.uniform(0.0, math.pi, size=m)
        phi = active_features(ds.spec, z)  # m x r
        eps = ds.sigma_y * rng.standard_normal((m, n))
        e_test = rng.standard_normal((m, p))
        Y = b[None, :] + eps  # m x n, one response vector per draw
        AinvY = np.linalg.solve(A, Y.T).T  # m x n
        Ainv_eps = np.linalg.solve(A, eps.T).T
        terms = {
            "B": (phi @ bias_coef) ** 2,
            "V": np.einsum("mr,mr->m", phi, Ainv_eps @ ds.Phi) ** 2,
            "S1": np.einsum("mr,mr->m", phi @ WtW_I, AinvY @ ds.Phi) ** 2,
            "S2": ds.sigma_x**2 / p * np.einsum("mr,mr->m", phi, AinvY @ ds.E_mat @ ds.W) ** 2,
            "S3": ds.sigma_x**2 / p**2 * np.einsum("mp,mp->m", e_test, AinvY @ ds.X) ** 2,
        }
        for key, vals in terms.items():
            sums[key][0] += float(vals.sum())
            sums[key][1] += float((vals**2).sum())
        done += m
    out = {}
    for key, (s, s2) in sums.items():
        mean = s / draws
        var = max(s2 / draws - mean**2, 0.0) * draws / (draws - 1)
        out[key] = (mean, math.sqrt(var / draws))
    return out


def mc_excess_risk(ds, gamma: float, draws: int, rng: np.random.Generator, chunk: int = 100_000) -> tuple[float, float]:
    """Brute-force excess risk with fresh (z_test, e_test, eps) per draw."""
    n, p = ds.n, ds.p
    A = _solve_A(ds, gamma)
    theta = ds.target.active(ds.spec)
    b = ds.Phi @ theta
    s, s2, done = 0.0, 0.0, 0
    while done < draws:
        m = min(chunk, draws - done)
        z = rng.uniform(0.0, math.pi, size=m)
        phi = active_features(ds.spec, z)
        x_test = math.sqrt(p) * phi @ ds.W.T + ds.sigma_x * rng.standard_normal((m, p))
        Y = b[None, :] + ds.sigma_y * rng.standard_normal((m, n))
        pred = np.einsum("mn,mn->m", x_test @ ds.X.T / p, np.linalg.solve(A, Y.T).T)
        err = (pred - phi @ theta) ** 2
        s += float(err.sum())
        s2 += float((err**2).sum())
        done += m
    mean = s / draws
    var = max(s2 / draws - mean**2, 0.0) * draws / (draws - 1)
    return mean, math.sqrt(var / draws)
