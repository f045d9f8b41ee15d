"""Noise injection, the NMSE metric and k-fold hyperparameter selection."""

from __future__ import annotations

import itertools
import logging
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from graphreg.errors import ValidationError
from graphreg.lrg import LrgProblem, predict_design, solve_batch

logger = logging.getLogger(__name__)

# Above this the noise variance underflows to nothing useful.
MAX_SNR_DB = 300.0

DEFAULT_GRID = [10.0 ** p for p in range(-4, 3)]


class NoiseSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    snr_db: float = 10.0
    seed: int = 0

    @field_validator("snr_db")
    @classmethod
    def _finite(cls, v: float) -> float:
        if math.isnan(v) or v == -math.inf:
            raise ValueError("snr_db must be a number")
        return v


class CvConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    folds: int = Field(default=4, ge=2)
    alpha_grid: list[float] = Field(default_factory=lambda: list(DEFAULT_GRID))
    beta_grid: list[float] = Field(default_factory=lambda: list(DEFAULT_GRID))

    @field_validator("alpha_grid")
    @classmethod
    def _alphas(cls, v: list[float]) -> list[float]:
        if not v:
            raise ValueError("alpha_grid must not be empty")
        if any(not a > 0 for a in v):
            raise ValueError("alpha_grid values must be positive")
        return v

    @field_validator("beta_grid")
    @classmethod
    def _betas(cls, v: list[float]) -> list[float]:
        if not v:
            raise ValueError("beta_grid must not be empty")
        if any(not b >= 0 for b in v):
            raise ValueError("beta_grid values must be nonnegative")
        return v


def add_noise(
    T_clean: np.ndarray,
    spec: NoiseSpec,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Add white Gaussian noise at spec.snr_db relative to the mean signal power.

    The noise variance is P / 10^(snr/10) with P = mean(T_clean^2). Draws come
    from `rng` when given, otherwise from a generator seeded with spec.seed.

    Raises:
        ValidationError: If the signal power is zero (SNR undefined).
    """
    T_clean = np.asarray(T_clean, dtype=float)
    power = float(np.mean(T_clean ** 2)) if T_clean.size else 0.0
    if power == 0.0:
        raise ValidationError("Signal power is zero; SNR is undefined")

    snr_db = min(spec.snr_db, MAX_SNR_DB)
    sigma = math.sqrt(power / 10.0 ** (snr_db / 10.0))
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    return T_clean + sigma * rng.standard_normal(T_clean.shape)


def nmse(pred: np.ndarray, truth: np.ndarray) -> float:
    """sum ||truth_n - pred_n||^2 / sum ||truth_n||^2."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ValidationError(
            f"Prediction shape {pred.shape} does not match truth shape {truth.shape}"
        )
    denom = float(np.sum(truth ** 2))
    if denom == 0.0:
        raise ValidationError("NMSE is undefined for an all-zero truth")
    return float(np.sum((truth - pred) ** 2)) / denom


def contiguous_folds(N: int, folds: int) -> list[np.ndarray]:
    """Split range(N) into `folds` contiguous blocks in sample order."""
    if N < folds:
        raise ValidationError(f"Need at least {folds} samples for {folds}-fold CV, got {N}")
    return np.array_split(np.arange(N), folds)


def cv_score(
    Phi: np.ndarray,
    T: np.ndarray,
    L: np.ndarray,
    alpha: float,
    beta: float,
    folds: list[np.ndarray],
) -> float:
    """Mean validation NMSE of batch LRG over the given folds."""
    scores = []
    for held in folds:
        train = np.setdiff1d(np.arange(Phi.shape[0]), held)
        W = solve_batch(LrgProblem(Phi=Phi[train], T=T[train], L=L, alpha=alpha, beta=beta))
        truth = T[held]
        if not np.any(truth):
            continue
        scores.append(nmse(predict_design(W, Phi[held]), truth))
    if not scores:
        raise ValidationError("Every validation fold has all-zero targets")
    return float(np.mean(scores))


def cross_validate(
    Phi: np.ndarray,
    T: np.ndarray,
    L: np.ndarray,
    cfg: CvConfig,
) -> tuple[float, float]:
    """Grid-search (alpha, beta) by contiguous k-fold validation NMSE.

    Ties go to the smallest alpha, then the smallest beta.

    Raises:
        ValidationError: If N < cfg.folds.
    """
    Phi = np.asarray(Phi, dtype=float)
    T = np.asarray(T, dtype=float)
    folds = contiguous_folds(Phi.shape[0], cfg.folds)

    best: tuple[float, float] | None = None
    best_score = math.inf
    for alpha, beta in itertools.product(sorted(cfg.alpha_grid), sorted(cfg.beta_grid)):
        score = cv_score(Phi, T, L, alpha, beta, folds)
        if score < best_score:
            best, best_score = (alpha, beta), score

    if best is None:
        raise ValidationError("No grid point produced a finite validation score")
    logger.debug("Selected alpha=%g beta=%g (validation NMSE %.4g)", *best, best_score)
    return best
