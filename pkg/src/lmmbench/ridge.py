"""Scaled ridge / ridge-less regression of y onto p^{-1/2} X.

The estimator is beta_hat = p^{-1/2} X^T (p^{-1} X X^T + n gamma I)^{-1} y, always
solved through the n x n Gram matrix. ``fit_primal`` solves the p x p normal
equations instead and exists as an independent check.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

RANK_RTOL = 1e-10
GRAM_BLOCK = 8192


class SingularGramError(np.linalg.LinAlgError):
    """p^{-1} X X^T is numerically singular and gamma = 0."""


class Mode(enum.Enum):
    DUAL = "dual"
    PRIMAL = "primal"
    KERNEL_ORACLE = "kernel_oracle"


def scaled_gram(X: np.ndarray, X2: np.ndarray | None = None) -> np.ndarray:
    """p^{-1} X X2^T accumulated over column blocks of p."""
    X = np.asarray(X, dtype=np.float64)
    X2 = X if X2 is None else np.asarray(X2, dtype=np.float64)
    p = X.shape[1]
    out = np.zeros((X.shape[0], X2.shape[0]))
    for start in range(0, p, GRAM_BLOCK):
        stop = min(start + GRAM_BLOCK, p)
        out += X[:, start:stop] @ X2[:, start:stop].T
    out /= p
    if X2 is X:
        out = 0.5 * (out + out.T)
    return out


@dataclass(frozen=True)
class RidgeSolution:
    dual_coef: np.ndarray
    gamma: float
    min_eig_A: float
    mode: Mode
    X: np.ndarray | None = None
    effective_reg: float | None = None
    pinv: bool = False
    primal_coef: np.ndarray | None = None
    eig: tuple | None = None

    @property
    def n(self) -> int:
        return self.dual_coef.shape[0]

    def beta(self) -> np.ndarray:
        """Primal coefficients p^{-1/2} X^T dual_coef."""
        if self.primal_coef is not None:
            return self.primal_coef
        return self.X.T @ self.dual_coef / math.sqrt(self.X.shape[1])


def gram_eigh(G: np.ndarray, gamma: float, n: int):
    """Eigendecomposition of A = G + n gamma I; returns (evals_of_A, evecs, evals_of_G)."""
    s, V = np.linalg.eigh(G)
    s = np.maximum(s, 0.0) if gamma == 0 else s
    return s + n * gamma, V, s


def solve_from_eigh(evals_A, V, evals_G, y, gamma: float, pinv: bool = False):
    """Apply A^{-1} (or its pseudo-inverse when gamma = 0 and pinv) to y.

    ``y`` may be a vector or an n x m matrix.
    """
    top = max(float(evals_G[-1]), 0.0)
    cutoff = RANK_RTOL * top
    if gamma == 0:
        small = evals_G <= cutoff
        if np.any(small) and not pinv:
            raise SingularGramError(
                f"singular Gram: mu_n = {evals_G[0]:.3e} below tolerance {cutoff:.3e}"
            )
        inv = np.where(small, 0.0, 1.0 / np.where(small, 1.0, evals_A))
    else:
        if evals_A[0] <= 0:
            raise SingularGramError("A is not positive definite")
        inv = 1.0 / evals_A
    coef = V.T @ y
    coef = (inv[:, None] * coef) if coef.ndim == 2 else inv * coef
    return V @ coef


def fit_dual(
    X: np.ndarray,
    y: np.ndarray,
    gamma: float,
    pinv: bool = False,
    G: np.ndarray | None = None,
) -> RidgeSolution:
    """Dual solution dual_coef = (p^{-1} X X^T + n gamma I)^{-1} y.

    With gamma = 0 and a numerically singular Gram (eigenvalues below
    1e-10 * mu_1) this raises SingularGramError unless ``pinv`` is set, in
    which case the pseudo-inverse gives the minimum-norm least-squares fit.
    A precomputed ``G = p^{-1} X X^T`` may be passed to skip assembly.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    n = X.shape[0]
    if y.shape != (n,):
        raise ValueError(f"y has shape {y.shape}, expected ({n},)")
    G = scaled_gram(X) if G is None else G
    evals_A, V, evals_G = gram_eigh(G, gamma, n)
    dual = solve_from_eigh(evals_A, V, evals_G, y, gamma, pinv=pinv)
    return RidgeSolution(
        dual_coef=dual,
        gamma=float(gamma),
        min_eig_A=float(evals_A[0]),
        mode=Mode.DUAL,
        X=X,
        pinv=pinv,
        eig=(evals_A, V, evals_G),
    )


def fit_primal(X: np.ndarray, y: np.ndarray, gamma: float) -> RidgeSolution:
    """beta_hat = (p^{-1} X^T X + n gamma I)^{-1} p^{-1/2} X^T y via the p x p system."""
    X = np.asarray(X, dtype=np.float64)
    n, p = X.shape
    if gamma <= 0:
        raise ValueError("primal form needs gamma > 0")
    H = X.T @ X / p + n * gamma * np.eye(p)
    beta = np.linalg.solve(H, X.T @ y / math.sqrt(p))
    min_eig = float(np.linalg.eigvalsh(scaled_gram(X))[0] + n * gamma)
    return RidgeSolution(
        dual_coef=np.full(n, np.nan),
        gamma=float(gamma),
        min_eig_A=min_eig,
        mode=Mode.PRIMAL,
        X=X,
        primal_coef=beta,
    )


def predict(sol: RidgeSolution, x_test: np.ndarray, X: np.ndarray | None = None) -> np.ndarray:
    """p^{-1/2} x_test^T beta_hat; x_test may be one vector or an m x p batch."""
    X = sol.X if X is None else np.asarray(X, dtype=np.float64)
    x_test = np.asarray(x_test, dtype=np.float64)
    p = X.shape[1]
    if x_test.shape[-1] != p:
        raise ValueError(f"x_test has {x_test.shape[-1]} coordinates, training covariates have {p}")
    if sol.mode is Mode.PRIMAL:
        return x_test @ sol.primal_coef / math.sqrt(p)
    if x_test.ndim == 1:
        return float((X @ x_test) @ sol.dual_coef / p)
    return scaled_gram(x_test, X) @ sol.dual_coef


def kernel_ridge_fit(Phi: np.ndarray, y: np.ndarray, reg: float) -> np.ndarray:
    """theta_hat = Phi^T (Phi Phi^T + reg I)^{-1} y for reg = sigma_x^2 + n gamma > 0."""
    if not reg > 0:
        raise ValueError("kernel ridge needs reg > 0")
    Phi = np.asarray(Phi, dtype=np.float64)
    n = Phi.shape[0]
    K = Phi @ Phi.T
    alpha = np.linalg.solve(K + reg * np.eye(n), y)
    return Phi.T @ alpha


def kernel_ridge_predict(theta_hat: np.ndarray, phi_test: np.ndarray) -> np.ndarray:
    return phi_test @ theta_hat
