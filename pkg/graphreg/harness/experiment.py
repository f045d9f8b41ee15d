"""Expansion experiments: LR vs LRG vs NR-LRG as the graph grows.

For every trial a fresh noise realization is drawn for the training
targets. For every training size N in the sweep, hyperparameters are chosen
(pinned, or cross-validated on the initial or the full graph), the chain is
run from m0 to m_max nodes and each method's test NMSE is recorded at every
graph size.
"""

from __future__ import annotations

import logging

import numpy as np

from graphreg.config import DatasetSpec, ExperimentConfig
from graphreg.errors import ValidationError
from graphreg.evaluation import add_noise, cross_validate
from graphreg.features import FeatureMap, design_matrix
from graphreg.graph import Graph, knn_attachment
from graphreg.harness.chain import build_chain, run_chain
from graphreg.harness.datasets import CsvSource, Dataset, DatasetSource, SyntheticSource
from graphreg.harness.report import ExperimentReport, emit_report

logger = logging.getLogger(__name__)


def source_for(spec: DatasetSpec) -> DatasetSource:
    if spec.source == "csv":
        return CsvSource(
            spec.signals,
            spec.pairing,
            coords=spec.coords,
            adjacency=spec.adjacency,
            train_count=spec.train_count,
            test_count=spec.test_count,
        )
    return SyntheticSource(
        spec.synthetic,
        spec.pairing,
        train_count=spec.train_count,
        test_count=spec.test_count,
    )


def sparsify_insertions(A: np.ndarray, k: int) -> np.ndarray:
    """Keep, for each node, only its k strongest links to earlier nodes."""
    A = np.asarray(A, dtype=float)
    out = np.zeros_like(A)
    for m in range(1, A.shape[0]):
        a = knn_attachment(A[m, :m], k)
        out[m, :m] = a
        out[:m, m] = a
    return out


def build_feature_map(cfg: ExperimentConfig, input_dim: int) -> FeatureMap:
    spec = cfg.features
    if spec.kind == "identity":
        return FeatureMap.identity(input_dim)
    return FeatureMap.random_sigmoid(input_dim, spec.resolve_K(input_dim), spec.seed)


def select_hyperparameters(
    cfg: ExperimentConfig,
    Phi: np.ndarray,
    T: np.ndarray,
    A: np.ndarray,
    m0: int,
    m_max: int,
) -> dict:
    """Return alpha, beta (LRG and the chain) and lr_alpha (LR)."""
    if cfg.pinned is not None:
        return {
            "alpha": cfg.pinned.alpha,
            "beta": cfg.pinned.beta,
            "lr_alpha": cfg.pinned.lr_alpha or cfg.pinned.alpha,
        }
    M = m0 if cfg.cv.select_at == "initial" else m_max
    L = Graph.from_adjacency(A[:M, :M]).L
    alpha, beta = cross_validate(Phi, T[:, :M], L, cfg.cv)
    lr_alpha, _ = cross_validate(
        Phi, T[:, :M], L, cfg.cv.model_copy(update={"beta_grid": [0.0]})
    )
    return {"alpha": alpha, "beta": beta, "lr_alpha": lr_alpha}


def prepare_dataset(cfg: ExperimentConfig) -> Dataset:
    dataset = source_for(cfg.dataset).load()
    if cfg.expansion.order is not None:
        if len(cfg.expansion.order) != dataset.M:
            raise ValidationError(
                f"Insertion order has {len(cfg.expansion.order)} nodes, dataset has {dataset.M}"
            )
        dataset = dataset.reordered(cfg.expansion.order)
    if dataset.test_count < 1:
        raise ValidationError("Expansion experiments need at least one test pair")
    return dataset


def run_expansion_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Run every (trial, N) chain of the configured sweep.

    If a chain fails, the rows gathered so far are written to the output
    path before the error propagates.
    """
    report = ExperimentReport()
    try:
        _run(cfg, report)
    except Exception:
        logger.error("Experiment aborted; flushing %d rows to %s", len(report.rows), cfg.output.path)
        emit_report(report, cfg.output.path, aggregate=cfg.output.aggregate)
        raise
    return report


def _run(cfg: ExperimentConfig, report: ExperimentReport) -> None:
    dataset = prepare_dataset(cfg)
    m0 = cfg.expansion.m0
    m_max = cfg.expansion.m_max or dataset.M
    if m_max > dataset.M:
        raise ValidationError(f"m_max ({m_max}) exceeds the {dataset.M} dataset nodes")

    A = dataset.adjacency
    if cfg.expansion.neighbors is not None:
        A = sparsify_insertions(A, cfg.expansion.neighbors)

    X_train, T_train = dataset.train
    X_test, truth_test = dataset.test
    fmap = build_feature_map(cfg, dataset.inputs.shape[1])
    phi_train = design_matrix(fmap, X_train)
    phi_test = design_matrix(fmap, X_test)

    n_sweep = cfg.n_sweep or [dataset.train_count]
    if max(n_sweep) > dataset.train_count:
        raise ValidationError(
            f"n_sweep value {max(n_sweep)} exceeds the {dataset.train_count} training pairs"
        )

    report.metadata = {
        "truth": "clean" if dataset.truth_is_clean else "observed",
        "m0": m0,
        "m_max": m_max,
        "K": fmap.K,
        "feature_map": fmap.kind,
        "snr_db": cfg.noise.snr_db,
        "selected": [],
    }

    chain = build_chain()
    streams = np.random.SeedSequence([cfg.seed, cfg.noise.seed]).spawn(cfg.trials)
    for trial, stream in enumerate(streams):
        noisy = add_noise(T_train, cfg.noise, rng=np.random.default_rng(stream))
        for N in n_sweep:
            Phi, T = phi_train[:N], noisy[:N]
            hyper = select_hyperparameters(cfg, Phi, T, A, m0, m_max)
            report.metadata["selected"].append({"trial": trial, "N": N, **hyper})

            final = run_chain(chain, {
                "adjacency": A[:m_max, :m_max],
                "phi_train": Phi,
                "targets_train": T[:, :m_max],
                "phi_test": phi_test,
                "truth_test": truth_test[:, :m_max],
                "trial": trial,
                "m0": m0,
                "m_max": m_max,
                **hyper,
                "retune_cv": cfg.cv if cfg.cv.retune_per_size else None,
                "verify": cfg.expansion.verify,
                "record_wall_time": cfg.record_wall_time,
            })
            report.add(final["rows"])
            if final["selected"]:
                report.metadata.setdefault("retuned", []).append(
                    {"trial": trial, "N": N, "per_size": final["selected"]}
                )
        logger.info("Finished trial %d/%d", trial + 1, cfg.trials)


def run_and_emit(cfg: ExperimentConfig) -> ExperimentReport:
    report = run_expansion_experiment(cfg)
    emit_report(report, cfg.output.path, aggregate=cfg.output.aggregate)
    return report
