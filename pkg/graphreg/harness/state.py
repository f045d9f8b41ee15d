"""ExpansionState definition for the LangGraph expansion chain."""

from __future__ import annotations

from typing import TypedDict

import numpy as np

from graphreg.evaluation import CvConfig
from graphreg.nrlrg import RecursionState


class ExpansionState(TypedDict, total=False):
    # Problem data, target nodes already in insertion order
    adjacency: np.ndarray
    phi_train: np.ndarray
    targets_train: np.ndarray
    phi_test: np.ndarray
    truth_test: np.ndarray

    # Sweep coordinates
    trial: int
    m0: int
    m_max: int

    # Hyperparameters; alpha/beta are fixed for the recursion chain
    alpha: float
    beta: float
    lr_alpha: float
    retune_cv: CvConfig | None
    verify: bool
    record_wall_time: bool

    # Chain
    current_step: str
    current_m: int
    recursion: RecursionState | None
    W_lrg: np.ndarray | None
    W_lr: np.ndarray | None
    timings: dict
    selected: list[dict]

    # Output
    rows: list[dict]
