import numpy as np
import pytest

from graphreg.config import ExperimentConfig, load_experiment_config
from graphreg.errors import NumericalBreakdownError, ValidationError
from graphreg.graph import Graph
from graphreg.harness import nodes
from graphreg.harness.chain import build_chain, run_chain
from graphreg.harness.experiment import (
    run_and_emit,
    run_expansion_experiment,
    sparsify_insertions,
)
from graphreg.harness.routing import route_after_evaluate
from graphreg.lrg import LrgProblem, solve_batch
from tests.conftest import random_adjacency


def _config(tmp_path, **overrides) -> ExperimentConfig:
    config = {
        "dataset": {
            "source": "synthetic",
            "synthetic": {"n_nodes": 8, "rows": 40, "seed": 3},
            "pairing": {"kind": "lag", "lag": 1},
            "train_count": 30,
        },
        "features": {"kind": "identity"},
        "expansion": {"m0": 3, "m_max": 8},
        "noise": {"snr_db": 10.0, "seed": 1},
        "cv": {"folds": 4, "alpha_grid": [0.1, 1.0], "beta_grid": [0.1, 1.0]},
        "output": {"path": str(tmp_path / "report.csv")},
        "pinned": {"alpha": 0.5, "beta": 1.0},
        "n_sweep": [8, 16],
        "trials": 2,
    }
    config.update(overrides)
    return ExperimentConfig.model_validate(config)


# ---------------------------------------------------------------------------
# Chain
# ---------------------------------------------------------------------------

def test_route_after_evaluate():
    assert route_after_evaluate({"current_m": 3, "m_max": 5}) == "attach"
    assert route_after_evaluate({"current_m": 5, "m_max": 5}) == "end"


def test_chain_scores_every_graph_size(rng):
    M, N, K = 6, 12, 3
    A = random_adjacency(rng, M)
    phi_train = rng.standard_normal((N, K))
    targets = rng.standard_normal((N, M))
    final = run_chain(build_chain(), {
        "adjacency": A,
        "phi_train": phi_train,
        "targets_train": targets,
        "phi_test": rng.standard_normal((5, K)),
        "truth_test": rng.standard_normal((5, M)),
        "trial": 0,
        "m0": 2,
        "m_max": M,
        "alpha": 0.3,
        "beta": 0.6,
        "lr_alpha": 0.3,
        "retune_cv": None,
        "verify": True,
        "record_wall_time": False,
    })

    assert final["current_m"] == M
    assert len(final["rows"]) == 3 * (M - 2 + 1)
    assert {r["M"] for r in final["rows"]} == set(range(2, M + 1))
    assert all(r["wall_time_s"] == 0.0 for r in final["rows"])

    expected = solve_batch(LrgProblem(
        Phi=phi_train, T=targets, L=Graph.from_adjacency(A).L, alpha=0.3, beta=0.6,
    ))
    np.testing.assert_allclose(final["recursion"].W, expected, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(final["W_lrg"], expected, rtol=1e-10, atol=1e-12)


def test_sparsify_insertions_keeps_k_earlier_links(rng):
    A = random_adjacency(rng, 6, density=1.0)
    S = sparsify_insertions(A, 2)
    np.testing.assert_array_equal(S, S.T)
    for m in range(1, 6):
        assert np.count_nonzero(S[m, :m]) == min(m, 2)


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

class TestExpansionExperiment:
    def test_row_count(self, tmp_path):
        cfg = _config(tmp_path)
        report = run_expansion_experiment(cfg)
        # trials x sweep x graph sizes x methods
        assert len(report.rows) == 2 * 2 * 6 * 3

    def test_pinned_recursion_tracks_batch(self, tmp_path):
        report = run_expansion_experiment(_config(tmp_path))
        for lrg in report.select(method="LRG"):
            (nr,) = report.select(method="NR-LRG", M=lrg["M"], N=lrg["N"], trial=lrg["trial"])
            assert abs(nr["nmse"] - lrg["nmse"]) <= 1e-6

    def test_reports_are_byte_identical(self, tmp_path):
        first = _config(tmp_path, output={"path": str(tmp_path / "a.csv")})
        second = _config(tmp_path, output={"path": str(tmp_path / "b.csv")})
        run_and_emit(first)
        run_and_emit(second)
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert (tmp_path / "a.agg.dat").read_bytes() == (tmp_path / "b.agg.dat").read_bytes()

    def test_cross_validated_run_records_selection(self, tmp_path):
        cfg = _config(tmp_path, pinned=None)
        report = run_expansion_experiment(cfg)
        selected = report.metadata["selected"]
        assert len(selected) == 2 * 2
        assert all(s["alpha"] in (0.1, 1.0) and s["beta"] in (0.1, 1.0) for s in selected)
        assert report.metadata["truth"] == "clean"

    def test_retune_per_size(self, tmp_path):
        cfg = _config(tmp_path, pinned=None, cv={
            "folds": 4, "alpha_grid": [0.1, 1.0], "beta_grid": [0.1], "retune_per_size": True,
        }, trials=1, n_sweep=[16])
        report = run_expansion_experiment(cfg)
        (retuned,) = report.metadata["retuned"]
        assert [s["M"] for s in retuned["per_size"]] == list(range(3, 9))

    def test_insertion_order_and_neighbours(self, tmp_path):
        cfg = _config(
            tmp_path,
            expansion={"m0": 3, "m_max": 8, "order": [7, 6, 5, 4, 3, 2, 1, 0], "neighbors": 2},
            trials=1,
        )
        report = run_expansion_experiment(cfg)
        assert len(report.rows) == 2 * 6 * 3

    def test_m_max_beyond_dataset(self, tmp_path):
        cfg = _config(tmp_path, expansion={"m0": 3, "m_max": 9})
        with pytest.raises(ValidationError, match="m_max"):
            run_expansion_experiment(cfg)

    def test_failure_flushes_completed_chains(self, tmp_path, monkeypatch):
        real_update = nodes.update
        calls = {"n": 0}

        def failing_update(*args, **kwargs):
            calls["n"] += 1
            if calls["n"] > 5:
                raise NumericalBreakdownError("forced")
            return real_update(*args, **kwargs)

        monkeypatch.setattr(nodes, "update", failing_update)
        cfg = _config(tmp_path)
        with pytest.raises(NumericalBreakdownError):
            run_expansion_experiment(cfg)

        lines = (tmp_path / "report.csv").read_text().splitlines()
        # header plus the first chain: 6 graph sizes x 3 methods
        assert len(lines) == 1 + 18


@pytest.mark.slow
def test_smooth_signals_favour_graph_regression(tmp_path):
    cfg = load_experiment_config("temperature_synthetic")
    cfg = cfg.model_copy(update={"output": cfg.output.model_copy(
        update={"path": str(tmp_path / "report.csv")}
    )})
    report = run_expansion_experiment(cfg)
    means = {(r["method"], r["M"], r["N"]): r["nmse"] for r in report.aggregate()}

    M = cfg.expansion.m_max
    for N in (4, 8, 16):
        assert means[("LRG", M, N)] <= means[("LR", M, N)]
    for N in cfg.n_sweep:
        assert abs(means[("NR-LRG", M, N)] - means[("LRG", M, N)]) <= 0.02

    for method in ("LR", "LRG", "NR-LRG"):
        curve = [means[(method, M, N)] for N in cfg.n_sweep]
        rises = [b - a for a, b in zip(curve, curve[1:]) if b > a]
        assert len(rises) <= 1 and all(r <= 0.005 for r in rises)
