"""Input feature maps and design-matrix assembly.

Two maps are supported:
- identity: phi(x) = x, so K == I.
- random-sigmoid: phi_i(x) = 1 / (1 + exp(-(f_i^T x + g_i))) with f_i, g_i
  drawn i.i.d. from N(0, 1) once, from a seed, and then frozen.

Feature maps know nothing about the graph; the design matrix built from
them stays fixed while the graph grows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from graphreg.errors import ValidationError

IDENTITY = "identity"
RANDOM_SIGMOID = "random-sigmoid"

_KINDS = (IDENTITY, RANDOM_SIGMOID)


@dataclass(frozen=True)
class FeatureMap:
    kind: str
    input_dim: int
    K: int
    weights: np.ndarray | None = None
    biases: np.ndarray | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValidationError(f"Unknown feature map kind: {self.kind!r}")
        if self.kind == IDENTITY and self.K != self.input_dim:
            raise ValidationError(
                f"Identity map needs K == I, got K={self.K}, I={self.input_dim}"
            )
        if self.kind == RANDOM_SIGMOID:
            if self.weights is None or self.biases is None:
                raise ValidationError("Random-sigmoid map needs weights and biases")
            if self.weights.shape != (self.K, self.input_dim) or self.biases.shape != (self.K,):
                raise ValidationError("Random-sigmoid parameters have the wrong shape")
            if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.biases))):
                raise ValidationError("Random-sigmoid parameters must be finite")

    @classmethod
    def identity(cls, input_dim: int) -> FeatureMap:
        return cls(kind=IDENTITY, input_dim=input_dim, K=input_dim)

    @classmethod
    def random_sigmoid(cls, input_dim: int, K: int, seed: int) -> FeatureMap:
        """Draw f_i and g_i from the standard normal with the given seed."""
        if K < 1 or input_dim < 1:
            raise ValidationError(f"Feature dimensions must be positive, got K={K}, I={input_dim}")
        rng = np.random.default_rng(seed)
        weights = rng.standard_normal((K, input_dim))
        biases = rng.standard_normal(K)
        weights.setflags(write=False)
        biases.setflags(write=False)
        return cls(
            kind=RANDOM_SIGMOID,
            input_dim=input_dim,
            K=K,
            weights=weights,
            biases=biases,
            seed=seed,
        )


def _check_inputs(fmap: FeatureMap, X: np.ndarray) -> None:
    if X.shape[-1] != fmap.input_dim:
        raise ValidationError(
            f"Input dimension {X.shape[-1]} does not match feature map I={fmap.input_dim}"
        )
    if not np.all(np.isfinite(X)):
        raise ValidationError("Inputs must be finite")


def apply(fmap: FeatureMap, x: np.ndarray) -> np.ndarray:
    """Map one length-I input to its length-K feature vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValidationError(f"Expected a single input vector, got shape {x.shape}")
    _check_inputs(fmap, x)
    if fmap.kind == IDENTITY:
        return x.copy()
    return expit(fmap.weights @ x + fmap.biases)


def design_matrix(fmap: FeatureMap, inputs: np.ndarray) -> np.ndarray:
    """Stack phi(x_n) row-wise into the N x K design matrix."""
    X = np.asarray(inputs, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValidationError(f"Need a non-empty N x I input matrix, got shape {X.shape}")
    _check_inputs(fmap, X)
    if fmap.kind == IDENTITY:
        return X.copy()
    return expit(X @ fmap.weights.T + fmap.biases)
