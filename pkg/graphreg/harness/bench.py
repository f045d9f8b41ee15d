"""Timing of one recursive node insertion against a batch re-solve."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from graphreg.graph import Graph, geodesic_adjacency, knn_attachment
from graphreg.harness.datasets import SyntheticSpec, random_coords
from graphreg.lrg import LrgProblem, solve_batch
from graphreg.nrlrg import init_state, update

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BenchResult:
    M: int
    K: int
    N: int
    neighbors: int | None
    repetitions: int
    recursive_s: float
    batch_s: float

    @property
    def ratio(self) -> float:
        return self.recursive_s / self.batch_s


def run_benchmark(
    M: int = 50,
    K: int = 10,
    N: int = 100,
    repetitions: int = 10,
    neighbors: int | None = 1,
    alpha: float = 1.0,
    beta: float = 0.5,
    seed: int = 0,
) -> BenchResult:
    """Median wall time of update() at M nodes vs solve_batch at M + 1 nodes."""
    rng = np.random.default_rng(seed)
    A = geodesic_adjacency(random_coords(M + 1, SyntheticSpec(), rng))
    a = A[M, :M]
    if neighbors is not None:
        a = knn_attachment(a, neighbors)
    A[M, :M] = a
    A[:M, M] = a

    Phi = rng.standard_normal((N, K))
    T = rng.standard_normal((N, M + 1))
    g_small = Graph.from_adjacency(A[:M, :M])
    g_full = Graph.from_adjacency(A)
    state = init_state(g_small, Phi, T[:, :M], alpha, beta)
    problem = LrgProblem(Phi=Phi, T=T, L=g_full.L, alpha=alpha, beta=beta)

    recursive, batch = [], []
    for _ in range(repetitions):
        start = time.perf_counter()
        update(state, a, T[:, M])
        recursive.append(time.perf_counter() - start)

        start = time.perf_counter()
        solve_batch(problem)
        batch.append(time.perf_counter() - start)

    result = BenchResult(
        M=M, K=K, N=N, neighbors=neighbors, repetitions=repetitions,
        recursive_s=float(np.median(recursive)),
        batch_s=float(np.median(batch)),
    )
    logger.info(
        "M=%d K=%d N=%d: recursive %.4fs, batch %.4fs (ratio %.3f)",
        M, K, N, result.recursive_s, result.batch_s, result.ratio,
    )
    return result
