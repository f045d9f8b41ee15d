"""Dataset sources for expansion experiments.

Defines the DatasetSource protocol and implementations:
- CsvSource: signals from a CSV file (one column per node, one row per time
  sample) plus a coordinate or adjacency CSV for the graph.
- SyntheticSource: smooth signals over a random geodesic graph, generated
  from a seed. Stands in for datasets that are not redistributable.

Input/target pairs are built either by lag (x_n = row n, t_n = row n + lag,
all nodes) or by a column split (inputs from the first block of columns,
targets from the rest, same row).
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, replace
from typing import Literal, Protocol, runtime_checkable

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.linalg import cho_factor, cho_solve

from graphreg.errors import DataIOError, ValidationError
from graphreg.graph import geodesic_adjacency, laplacian, load_adjacency, load_coords

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray            # N_total x I
    targets_clean: np.ndarray     # N_total x M
    adjacency: np.ndarray         # M x M, over the target nodes
    train_count: int
    test_count: int
    node_coords: np.ndarray | None = None
    node_names: tuple[str, ...] = ()
    truth_is_clean: bool = True

    def __post_init__(self):
        if self.inputs.shape[0] != self.targets_clean.shape[0]:
            raise ValidationError(
                f"{self.inputs.shape[0]} inputs but {self.targets_clean.shape[0]} targets"
            )
        M = self.targets_clean.shape[1]
        if self.adjacency.shape != (M, M):
            raise ValidationError(
                f"Adjacency of shape {self.adjacency.shape} does not match {M} target nodes"
            )
        if self.train_count < 0 or self.test_count < 0:
            raise ValidationError("Train and test counts must be nonnegative")
        if self.train_count + self.test_count > self.N_total:
            raise ValidationError(
                f"train ({self.train_count}) + test ({self.test_count}) exceeds "
                f"{self.N_total} available pairs"
            )

    @property
    def N_total(self) -> int:
        return self.inputs.shape[0]

    @property
    def M(self) -> int:
        return self.targets_clean.shape[1]

    @property
    def train(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.train_count
        return self.inputs[:n], self.targets_clean[:n]

    @property
    def test(self) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.train_count, self.train_count + self.test_count
        return self.inputs[lo:hi], self.targets_clean[lo:hi]

    def reordered(self, order) -> Dataset:
        """Permute the target nodes, e.g. to set the insertion order."""
        idx = np.asarray(list(order), dtype=int)
        if sorted(idx.tolist()) != list(range(self.M)):
            raise ValidationError(f"Node order is not a permutation of range({self.M})")
        names = tuple(self.node_names[i] for i in idx) if self.node_names else ()
        coords = self.node_coords[idx] if self.node_coords is not None else None
        return replace(
            self,
            targets_clean=self.targets_clean[:, idx],
            adjacency=self.adjacency[np.ix_(idx, idx)],
            node_coords=coords,
            node_names=names,
        )


# ---------------------------------------------------------------------------
# Pairing
# ---------------------------------------------------------------------------

class PairingSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["lag", "split"] = "lag"
    lag: int = Field(default=2, ge=0)
    n_inputs: int | None = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _split_needs_inputs(self):
        if self.kind == "split" and self.n_inputs is None:
            raise ValueError("split pairing needs n_inputs")
        return self


def make_lagged_pairs(signals: np.ndarray, lag: int) -> tuple[np.ndarray, np.ndarray]:
    """x_n = row n, t_n = row n + lag; rows - lag pairs.

    Raises:
        ValidationError: If there are no more rows than the lag.
    """
    signals = np.asarray(signals, dtype=float)
    if lag < 0:
        raise ValidationError(f"Lag must be nonnegative, got {lag}")
    rows = signals.shape[0]
    if rows <= lag:
        raise ValidationError(
            f"No input-target pairs can be formed from {rows} rows with lag {lag}"
        )
    return signals[: rows - lag], signals[lag:]


def split_columns(signals: np.ndarray, n_inputs: int) -> tuple[np.ndarray, np.ndarray]:
    """Inputs from the first n_inputs columns, targets from the rest."""
    signals = np.asarray(signals, dtype=float)
    if not 0 < n_inputs < signals.shape[1]:
        raise ValidationError(
            f"Cannot split {signals.shape[1]} columns with {n_inputs} inputs"
        )
    return signals[:, :n_inputs], signals[:, n_inputs:]


def pair(signals: np.ndarray, spec: PairingSpec) -> tuple[np.ndarray, np.ndarray]:
    if spec.kind == "lag":
        return make_lagged_pairs(signals, spec.lag)
    return split_columns(signals, spec.n_inputs)


# ---------------------------------------------------------------------------
# CSV signals
# ---------------------------------------------------------------------------

def read_signal_csv(path: str) -> tuple[list[str], np.ndarray]:
    """Read a CSV with a node-name header and one numeric row per sample.

    Raises:
        DataIOError: On a missing file, ragged rows or non-numeric cells;
                     the message names the row and column.
    """
    if not os.path.isfile(path):
        raise DataIOError(f"Signal file not found: {path}")

    rows: list[list[float]] = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if not header:
            raise DataIOError(f"Signal file has no header row: {path}")
        names = [h.strip() for h in header]
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(names):
                raise DataIOError(
                    f"{path}: row {row_no} has {len(row)} columns, expected {len(names)}"
                )
            values = []
            for col_no, cell in enumerate(row, start=1):
                try:
                    values.append(float(cell))
                except ValueError as e:
                    raise DataIOError(
                        f"{path}: row {row_no}, column {col_no} "
                        f"({names[col_no - 1]}) is not numeric: {cell!r}"
                    ) from e
            rows.append(values)

    if not rows:
        raise DataIOError(f"Signal file has no data rows: {path}")
    logger.debug("Read %d x %d signals from %s", len(rows), len(names), path)
    return names, np.array(rows, dtype=float)


def load_signals(
    path: str,
    pairing: PairingSpec,
    adjacency: np.ndarray,
    train_count: int | None = None,
    test_count: int | None = None,
    node_coords: np.ndarray | None = None,
) -> Dataset:
    """Build a Dataset from a signal CSV and a target-node adjacency."""
    names, signals = read_signal_csv(path)
    inputs, targets = pair(signals, pairing)
    if pairing.kind == "split":
        names = names[pairing.n_inputs:]
    n_total = inputs.shape[0]
    if train_count is None:
        train_count = n_total
    if test_count is None:
        test_count = n_total - train_count
    return Dataset(
        inputs=inputs,
        targets_clean=targets,
        adjacency=np.asarray(adjacency, dtype=float),
        train_count=train_count,
        test_count=test_count,
        node_coords=node_coords,
        node_names=tuple(names),
        truth_is_clean=False,
    )


# ---------------------------------------------------------------------------
# Synthetic smooth signals
# ---------------------------------------------------------------------------

def synth_smooth(
    L: np.ndarray,
    gamma: float,
    n: int,
    seed: int | np.random.Generator,
) -> np.ndarray:
    """n smooth graph signals y = (I + gamma L)^{-1} z, z ~ N(0, I), as n x M."""
    if gamma < 0:
        raise ValidationError(f"Smoothing strength must be nonnegative, got {gamma}")
    L = np.asarray(L, dtype=float)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    Z = rng.standard_normal((n, L.shape[0]))
    if gamma == 0:
        return Z
    factor = cho_factor(np.eye(L.shape[0]) + gamma * L)
    return cho_solve(factor, Z.T).T


class SyntheticSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_nodes: int = Field(default=25, ge=2)
    rows: int = Field(default=90, ge=2)
    gamma: float = Field(default=10.0, ge=0)
    ar_coefficient: float = Field(default=0.9, ge=0, lt=1)
    offset: float = 0.0
    lat_range: tuple[float, float] = (55.0, 69.0)
    lon_range: tuple[float, float] = (11.0, 24.0)
    seed: int = 0


def random_coords(n: int, spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    lat = rng.uniform(*spec.lat_range, size=n)
    lon = rng.uniform(*spec.lon_range, size=n)
    return np.column_stack([lat, lon])


def synthetic_signals(spec: SyntheticSpec) -> tuple[np.ndarray, np.ndarray]:
    """Coordinates and a rows x n_nodes series of smooth, AR(1)-correlated signals."""
    rng = np.random.default_rng(spec.seed)
    coords = random_coords(spec.n_nodes, spec, rng)
    L = laplacian(geodesic_adjacency(coords))
    innovations = synth_smooth(L, spec.gamma, spec.rows, rng)

    rho = spec.ar_coefficient
    scale = np.sqrt(1.0 - rho ** 2)
    series = np.empty_like(innovations)
    series[0] = innovations[0]
    for r in range(1, spec.rows):
        series[r] = rho * series[r - 1] + scale * innovations[r]
    return coords, series + spec.offset


# ---------------------------------------------------------------------------
# Sources
# ---------------------------------------------------------------------------

@runtime_checkable
class DatasetSource(Protocol):
    def load(self) -> Dataset: ...


class CsvSource:
    """Signals and graph read from CSV files."""

    def __init__(
        self,
        signals: str,
        pairing: PairingSpec,
        coords: str | None = None,
        adjacency: str | None = None,
        train_count: int | None = None,
        test_count: int | None = None,
    ):
        if coords is None and adjacency is None:
            raise ValidationError("A CSV dataset needs a coordinate or adjacency file")
        self.signals = signals
        self.pairing = pairing
        self.coords = coords
        self.adjacency = adjacency
        self.train_count = train_count
        self.test_count = test_count

    def load(self) -> Dataset:
        node_coords = None
        if self.adjacency is not None:
            A = load_adjacency(self.adjacency).A
        else:
            _, node_coords = load_coords(self.coords)
            A = geodesic_adjacency(node_coords)
        return load_signals(
            self.signals,
            self.pairing,
            A,
            train_count=self.train_count,
            test_count=self.test_count,
            node_coords=node_coords,
        )


class SyntheticSource:
    """Seeded smooth signals over a random geodesic graph."""

    def __init__(
        self,
        spec: SyntheticSpec,
        pairing: PairingSpec,
        train_count: int | None = None,
        test_count: int | None = None,
    ):
        self.spec = spec
        self.pairing = pairing
        self.train_count = train_count
        self.test_count = test_count

    def load(self) -> Dataset:
        coords, series = synthetic_signals(self.spec)
        inputs, targets = pair(series, self.pairing)
        if self.pairing.kind == "split":
            coords = coords[self.pairing.n_inputs:]
        n_total = inputs.shape[0]
        train_count = n_total if self.train_count is None else self.train_count
        test_count = n_total - train_count if self.test_count is None else self.test_count
        return Dataset(
            inputs=inputs,
            targets_clean=targets,
            adjacency=geodesic_adjacency(coords),
            train_count=train_count,
            test_count=test_count,
            node_coords=coords,
            node_names=tuple(f"node_{i + 1}" for i in range(targets.shape[1])),
            truth_is_clean=True,
        )
