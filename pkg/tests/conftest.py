import os
import sys

import numpy as np
import pytest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from graphreg.graph import Graph


def random_adjacency(rng: np.random.Generator, M: int, density: float = 0.6) -> np.ndarray:
    """Symmetric nonnegative weights, zero diagonal, some edges absent."""
    W = rng.uniform(0.0, 1.0, size=(M, M))
    W[rng.uniform(size=(M, M)) > density] = 0.0
    A = np.triu(W, k=1)
    return A + A.T


def random_graph(rng: np.random.Generator, M: int, density: float = 0.6) -> Graph:
    return Graph.from_adjacency(random_adjacency(rng, M, density))


def random_attachment(rng: np.random.Generator, M: int, density: float = 0.6) -> np.ndarray:
    a = rng.uniform(0.0, 1.0, size=M)
    a[rng.uniform(size=M) > density] = 0.0
    return a


def kron_F(L, Phi, alpha, beta):
    """F assembled entry by entry, without np.kron."""
    M, K = L.shape[0], Phi.shape[1]
    G = Phi.T @ Phi
    F = np.zeros((M * K, M * K))
    for i in range(M):
        for j in range(M):
            coef = (1.0 if i == j else 0.0) + beta * L[i, j]
            for p in range(K):
                for q in range(K):
                    F[i * K + p, j * K + q] = coef * G[p, q]
    return F + alpha * np.eye(M * K)


def brute_force_W(L, Phi, T, alpha, beta):
    """Explicit inverse of F times (I kron Phi^T) vec(T)."""
    M, K = L.shape[0], Phi.shape[1]
    F = kron_F(L, Phi, alpha, beta)
    rhs = np.kron(np.eye(M), Phi.T) @ T.reshape(-1, order="F")
    return (np.linalg.inv(F) @ rhs).reshape((K, M), order="F")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
