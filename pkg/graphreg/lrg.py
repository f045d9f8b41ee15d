"""Batch linear regression over graphs.

Minimizes

    C(W) = sum_n ||t_n - W^T phi(x_n)||^2 + alpha ||W||_F^2
           + beta sum_n (W^T phi(x_n))^T L (W^T phi(x_n))

over W in R^{K x M}. Setting the gradient to zero gives the normal equations

    F vec(W) = (I_M kron Phi^T) vec(T),
    F = (I_M + beta L) kron Phi^T Phi + alpha I_{MK}

with vec() stacking columns, so the K x K diagonal blocks of F belong to
single nodes. With beta = 0 the blocks decouple into per-node ridge
regressions, which is the graph-free LR baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from graphreg.errors import SingularSystemError, ValidationError
from graphreg.features import FeatureMap, apply


def vec(W: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization of a K x M matrix."""
    return np.asarray(W).reshape(-1, order="F")


def unvec(w: np.ndarray, K: int, M: int) -> np.ndarray:
    return np.asarray(w).reshape((K, M), order="F")


@dataclass(frozen=True)
class LrgProblem:
    Phi: np.ndarray
    T: np.ndarray
    L: np.ndarray
    alpha: float
    beta: float

    def __post_init__(self):
        Phi = np.asarray(self.Phi, dtype=float)
        T = np.asarray(self.T, dtype=float)
        L = np.asarray(self.L, dtype=float)
        if Phi.ndim != 2 or T.ndim != 2:
            raise ValidationError("Phi and T must be matrices")
        if Phi.shape[0] != T.shape[0]:
            raise ValidationError(
                f"Phi has {Phi.shape[0]} rows but T has {T.shape[0]}"
            )
        if L.shape != (T.shape[1], T.shape[1]):
            raise ValidationError(
                f"Laplacian of shape {L.shape} does not match {T.shape[1]} target columns"
            )
        if self.alpha < 0 or self.beta < 0:
            raise ValidationError(
                f"alpha and beta must be nonnegative, got {self.alpha}, {self.beta}"
            )
        object.__setattr__(self, "Phi", Phi)
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "L", L)

    @property
    def N(self) -> int:
        return self.Phi.shape[0]

    @property
    def K(self) -> int:
        return self.Phi.shape[1]

    @property
    def M(self) -> int:
        return self.T.shape[1]


def build_F(L: np.ndarray, Phi: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    """Return (I_M + beta L) kron Phi^T Phi + alpha I_{MK}."""
    L = np.asarray(L, dtype=float)
    Phi = np.asarray(Phi, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ValidationError(f"Laplacian must be square, got shape {L.shape}")
    if Phi.ndim != 2:
        raise ValidationError(f"Phi must be a matrix, got shape {Phi.shape}")
    if alpha < 0 or beta < 0:
        raise ValidationError(f"alpha and beta must be nonnegative, got {alpha}, {beta}")
    M, K = L.shape[0], Phi.shape[1]
    gram = Phi.T @ Phi
    return np.kron(np.eye(M) + beta * L, gram) + alpha * np.eye(M * K)


def cholesky(F: np.ndarray):
    """Cholesky-factor an SPD matrix, raising SingularSystemError on failure."""
    try:
        return cho_factor(F, lower=True, check_finite=True)
    except LinAlgError as e:
        raise SingularSystemError(
            f"Normal-equation matrix of size {F.shape[0]} is not positive definite: {e}"
        ) from e


def solve_batch(p: LrgProblem) -> np.ndarray:
    """Solve the normal equations for the K x M coefficient matrix.

    Raises:
        SingularSystemError: If F is singular, which can only happen with
                             alpha == 0 and a rank-deficient Phi^T Phi.
    """
    F = build_F(p.L, p.Phi, p.alpha, p.beta)
    rhs = vec(p.Phi.T @ p.T)
    w = cho_solve(cholesky(F), rhs)
    return unvec(w, p.K, p.M)


def ridge(Phi: np.ndarray, T: np.ndarray, alpha: float) -> np.ndarray:
    """Per-node ridge regression (Phi^T Phi + alpha I)^{-1} Phi^T T.

    T may be a length-N vector or an N x M matrix.
    """
    Phi = np.asarray(Phi, dtype=float)
    gram = Phi.T @ Phi + alpha * np.eye(Phi.shape[1])
    return cho_solve(cholesky(gram), Phi.T @ np.asarray(T, dtype=float))


def predict(W: np.ndarray, x: np.ndarray, fmap: FeatureMap) -> np.ndarray:
    """Graph signal W^T phi(x) for a single input."""
    phi = apply(fmap, x)
    if W.shape[0] != phi.shape[0]:
        raise ValidationError(
            f"Coefficients have {W.shape[0]} rows but the feature map gives K={phi.shape[0]}"
        )
    return W.T @ phi


def predict_design(W: np.ndarray, Phi: np.ndarray) -> np.ndarray:
    """Predicted signals for every row of a design matrix, as N x M."""
    if Phi.shape[1] != W.shape[0]:
        raise ValidationError(
            f"Design matrix has K={Phi.shape[1]} but coefficients have K={W.shape[0]}"
        )
    return Phi @ W


def _check_cost_dims(W: np.ndarray, p: LrgProblem) -> None:
    if W.shape != (p.K, p.M):
        raise ValidationError(
            f"Coefficients of shape {W.shape} do not match (K, M) = ({p.K}, {p.M})"
        )


def cost(W: np.ndarray, p: LrgProblem) -> float:
    """Regularized cost as a sum over training samples."""
    W = np.asarray(W, dtype=float)
    _check_cost_dims(W, p)
    total = 0.0
    for phi, t in zip(p.Phi, p.T):
        y = W.T @ phi
        r = t - y
        total += r @ r + p.beta * (y @ p.L @ y)
    return float(total + p.alpha * np.sum(W * W))


def cost_trace(W: np.ndarray, p: LrgProblem) -> float:
    """The same cost written with matrix traces."""
    W = np.asarray(W, dtype=float)
    _check_cost_dims(W, p)
    gram = p.Phi.T @ p.Phi
    PW = gram @ W
    return float(
        np.trace(p.T.T @ p.T)
        - 2.0 * np.trace(p.T.T @ p.Phi @ W)
        + np.trace(W.T @ PW)
        + p.alpha * np.trace(W.T @ W)
        + p.beta * np.trace(W.T @ PW @ p.L)
    )
