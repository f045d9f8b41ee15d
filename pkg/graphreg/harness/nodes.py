"""Node functions for the expansion chain.

Each node takes ExpansionState and returns a partial state dict to be merged
by LangGraph. Only coefficient computations are timed; evaluation is not.
"""

from __future__ import annotations

import logging
import time

from graphreg.evaluation import cross_validate, nmse
from graphreg.graph import Graph
from graphreg.lrg import LrgProblem, predict_design, ridge, solve_batch
from graphreg.nrlrg import init_state, predict_state, update

logger = logging.getLogger(__name__)

METHODS = ("LR", "LRG", "NR-LRG")


def _graph(state: dict, M: int) -> Graph:
    return Graph.from_adjacency(state["adjacency"][:M, :M])


def init_node(state: dict) -> dict:
    """Solve the batch problem on the first m0 nodes and start the chain."""
    m0 = state["m0"]
    start = time.perf_counter()
    recursion = init_state(
        _graph(state, m0),
        state["phi_train"],
        state["targets_train"][:, :m0],
        state["alpha"],
        state["beta"],
    )
    elapsed = time.perf_counter() - start
    return {
        "recursion": recursion,
        "current_m": m0,
        "timings": {"NR-LRG": elapsed},
        "current_step": "initialized",
    }


def attach_node(state: dict) -> dict:
    """Bring in the next node with a recursive update."""
    m = state["current_m"]
    a = state["adjacency"][m, :m]
    t_new = state["targets_train"][:, m]

    start = time.perf_counter()
    recursion = update(state["recursion"], a, t_new, verify=state.get("verify", False))
    elapsed = time.perf_counter() - start

    return {
        "recursion": recursion,
        "current_m": m + 1,
        "timings": {**state["timings"], "NR-LRG": elapsed},
        "current_step": "attached",
    }


def batch_node(state: dict) -> dict:
    """Re-solve LRG and the graph-free LR baseline on the current graph."""
    M = state["current_m"]
    g = _graph(state, M)
    Phi = state["phi_train"]
    T = state["targets_train"][:, :M]

    alpha, beta, lr_alpha = state["alpha"], state["beta"], state["lr_alpha"]
    selected = state.get("selected", [])
    cv = state.get("retune_cv")
    if cv is not None:
        alpha, beta = cross_validate(Phi, T, g.L, cv)
        lr_alpha, _ = cross_validate(Phi, T, g.L, cv.model_copy(update={"beta_grid": [0.0]}))
        selected = selected + [
            {"M": M, "alpha": alpha, "beta": beta, "lr_alpha": lr_alpha}
        ]

    start = time.perf_counter()
    W_lrg = solve_batch(LrgProblem(Phi=Phi, T=T, L=g.L, alpha=alpha, beta=beta))
    lrg_time = time.perf_counter() - start

    start = time.perf_counter()
    W_lr = ridge(Phi, T, lr_alpha)
    lr_time = time.perf_counter() - start

    return {
        "W_lrg": W_lrg,
        "W_lr": W_lr,
        "timings": {**state["timings"], "LRG": lrg_time, "LR": lr_time},
        "selected": selected,
        "current_step": "solved",
    }


def evaluate_node(state: dict) -> dict:
    """Score all three methods on the test data of the current nodes."""
    M = state["current_m"]
    phi_test = state["phi_test"]
    truth = state["truth_test"][:, :M]
    predictions = {
        "LR": predict_design(state["W_lr"], phi_test),
        "LRG": predict_design(state["W_lrg"], phi_test),
        "NR-LRG": predict_state(state["recursion"], phi_test),
    }

    N = state["phi_train"].shape[0]
    rows = []
    for method in METHODS:
        score = nmse(predictions[method], truth)
        wall = state["timings"].get(method, 0.0) if state.get("record_wall_time") else 0.0
        rows.append({
            "method": method,
            "M": M,
            "N": N,
            "trial": state["trial"],
            "nmse": score,
            "wall_time_s": wall,
        })

    logger.debug(
        "trial %d N=%d M=%d: %s", state["trial"], N, M,
        ", ".join(f"{r['method']}={r['nmse']:.4f}" for r in rows),
    )
    return {"rows": state["rows"] + rows, "current_step": "evaluated"}
