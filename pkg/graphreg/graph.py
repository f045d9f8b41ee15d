"""Undirected weighted graphs and their Laplacians.

A Graph holds a symmetric nonnegative adjacency with zero diagonal and the
Laplacian L = D - A derived from it. Graphs only grow through append_node,
which keeps every existing edge and borders both matrices with the incoming
node's weights.

Also provides the geodesic (great-circle) adjacency used for city networks
and the CSV readers/writers for coordinates and adjacency matrices.
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass

import numpy as np

from graphreg.errors import DataIOError, ValidationError

logger = logging.getLogger(__name__)

EARTH_RADIUS_KM = 6371.0

_SYMMETRY_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _validate_adjacency(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"Adjacency must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        i, j = np.argwhere(~np.isfinite(A))[0]
        raise ValidationError(f"Adjacency entry ({i}, {j}) is not finite")
    if np.any(A < 0):
        i, j = np.argwhere(A < 0)[0]
        raise ValidationError(
            f"Adjacency entry ({i}, {j}) is negative: {A[i, j]!r}"
        )
    diag = np.flatnonzero(np.diag(A))
    if diag.size:
        i = diag[0]
        raise ValidationError(
            f"Adjacency entry ({i}, {i}) is a self-loop: {A[i, i]!r}"
        )
    tol = _SYMMETRY_TOL * max(1.0, float(np.abs(A).max(initial=0.0)))
    asym = np.abs(A - A.T) > tol
    if np.any(asym):
        i, j = np.argwhere(asym)[0]
        raise ValidationError(
            f"Adjacency is not symmetric at ({i}, {j}): "
            f"{A[i, j]!r} != {A[j, i]!r}"
        )
    return 0.5 * (A + A.T)


def laplacian(A: np.ndarray) -> np.ndarray:
    """Return the graph Laplacian D - A of an adjacency matrix.

    Raises:
        ValidationError: If A is not square, symmetric, nonnegative and
                         free of self-loops. The message names the entry.
    """
    A = _validate_adjacency(A)
    return np.diag(A.sum(axis=1)) - A


@dataclass(frozen=True)
class Graph:
    """Immutable undirected weighted graph with a cached Laplacian."""

    A: np.ndarray
    L: np.ndarray

    @classmethod
    def from_adjacency(cls, A: np.ndarray) -> Graph:
        A = _validate_adjacency(A)
        return cls(A=_frozen(A), L=_frozen(np.diag(A.sum(axis=1)) - A))

    @classmethod
    def empty(cls, M: int) -> Graph:
        """Graph of M isolated nodes."""
        return cls.from_adjacency(np.zeros((M, M)))

    @property
    def M(self) -> int:
        return self.A.shape[0]


def smoothness(y: np.ndarray, L: np.ndarray) -> float:
    """Laplacian quadratic form y^T L y; smaller means smoother."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.shape[0] != L.shape[0]:
        raise ValidationError(
            f"Signal of shape {y.shape} does not match a {L.shape[0]}-node graph"
        )
    return float(y @ L @ y)


def validate_attachment(a: np.ndarray, M: int) -> np.ndarray:
    """Check an incoming node's edge-weight vector against an M-node graph."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 1 or a.shape[0] != M:
        raise ValidationError(
            f"Attachment of shape {a.shape} does not match a {M}-node graph"
        )
    if not np.all(np.isfinite(a)):
        raise ValidationError("Attachment weights must be finite")
    if np.any(a < 0):
        j = int(np.flatnonzero(a < 0)[0])
        raise ValidationError(f"Attachment weight {j} is negative: {a[j]!r}")
    return a


def append_node(g: Graph, a: np.ndarray) -> Graph:
    """Insert one node joined to the existing nodes with weights a.

    The new adjacency is [[A, a], [a^T, 0]] and the new Laplacian is
    [[L + diag(a), -a], [-a^T, a^T 1]]; existing edges are unchanged.
    """
    a = validate_attachment(a, g.M)
    M = g.M

    A = np.zeros((M + 1, M + 1))
    A[:M, :M] = g.A
    A[:M, M] = a
    A[M, :M] = a

    L = np.zeros((M + 1, M + 1))
    L[:M, :M] = g.L + np.diag(a)
    L[:M, M] = -a
    L[M, :M] = -a
    L[M, M] = a.sum()

    return Graph(A=_frozen(A), L=_frozen(L))


def subgraph(g: Graph, nodes) -> Graph:
    """Induced subgraph on the given nodes, in the given order."""
    idx = np.asarray(list(nodes), dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= g.M):
        raise ValidationError(f"Node index out of range for a {g.M}-node graph")
    if np.unique(idx).size != idx.size:
        raise ValidationError("Subgraph node list contains duplicates")
    return Graph.from_adjacency(g.A[np.ix_(idx, idx)])


def knn_attachment(a: np.ndarray, k: int) -> np.ndarray:
    """Keep the k largest weights of an attachment, zeroing the rest.

    Ties are broken towards the lower node index.
    """
    a = np.asarray(a, dtype=float)
    if k < 0:
        raise ValidationError(f"Neighbour count must be nonnegative, got {k}")
    if k >= a.size:
        return a.copy()
    keep = np.argsort(-a, kind="stable")[:k]
    out = np.zeros_like(a)
    out[keep] = a[keep]
    return out


def haversine_km(coords: np.ndarray) -> np.ndarray:
    """Pairwise great-circle distances in km for (lat, lon) rows in degrees."""
    coords = np.radians(np.asarray(coords, dtype=float))
    lat = coords[:, 0][:, None]
    lon = coords[:, 1][:, None]
    dlat = lat.T - lat
    dlon = lon.T - lon
    h = np.sin(dlat / 2) ** 2 + np.cos(lat) * np.cos(lat.T) * np.sin(dlon / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def _check_coordinate(lat: float, lon: float, where: str) -> None:
    if not (np.isfinite(lat) and np.isfinite(lon)):
        raise ValidationError(f"{where} has a non-finite coordinate ({lat}, {lon})")
    if abs(lat) > 90.0 or abs(lon) > 180.0:
        raise ValidationError(
            f"{where} is outside lat [-90, 90] / lon [-180, 180]: ({lat}, {lon})"
        )


def geodesic_adjacency(coords) -> np.ndarray:
    """Adjacency a_ij = exp(-d_ij^2 / S) from great-circle distances.

    S is the sum of d_ij^2 over all ordered pairs i != j, so each unordered
    pair is counted twice. The diagonal is zero.

    Raises:
        ValidationError: If fewer than two points are given, a coordinate
                         is non-finite or out of range, or every pair of
                         points coincides (S == 0).
    """
    coords = np.asarray(coords, dtype=float)
    if coords.ndim != 2 or coords.shape[1] != 2:
        raise ValidationError(
            f"Coordinates must be (lat, lon) rows, got shape {coords.shape}"
        )
    if coords.shape[0] < 2:
        raise ValidationError("Geodesic adjacency needs at least two points")
    for i, (lat, lon) in enumerate(coords):
        _check_coordinate(lat, lon, f"Coordinate row {i}")

    d2 = haversine_km(coords) ** 2
    np.fill_diagonal(d2, 0.0)
    S = d2.sum()
    if S == 0:
        raise ValidationError("All points coincide; distance normalization is zero")

    A = np.exp(-d2 / S)
    np.fill_diagonal(A, 0.0)
    return 0.5 * (A + A.T)


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------

def load_coords(path: str) -> tuple[list[str], np.ndarray]:
    """Read a `name,lat,lon` CSV. Row order defines node indices."""
    if not os.path.isfile(path):
        raise DataIOError(f"Coordinate file not found: {path}")

    names: list[str] = []
    coords: list[tuple[float, float]] = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["name", "lat", "lon"]:
            raise DataIOError(
                f"Coordinate file must have header name,lat,lon: {path}"
            )
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataIOError(
                    f"{path}: row {row_no} has {len(row)} columns, expected 3"
                )
            try:
                lat, lon = float(row[1]), float(row[2])
            except ValueError as e:
                raise DataIOError(
                    f"{path}: row {row_no} has a non-numeric coordinate: {e}"
                ) from e
            _check_coordinate(lat, lon, f"{path}: row {row_no}")
            names.append(row[0].strip())
            coords.append((lat, lon))

    logger.debug("Loaded %d coordinates from %s", len(coords), path)
    return names, np.array(coords, dtype=float).reshape(-1, 2)


def write_adjacency(path: str, A: np.ndarray, names: list[str] | None = None) -> None:
    """Write an adjacency matrix as CSV with a node-name header."""
    A = np.asarray(A, dtype=float)
    if names is None:
        names = [f"node_{i + 1}" for i in range(A.shape[0])]
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(names)
            for row in A:
                writer.writerow([repr(float(v)) for v in row])
    except OSError as e:
        raise DataIOError(f"Cannot write adjacency to {path}: {e}") from e


def load_adjacency(path: str) -> Graph:
    """Read an adjacency CSV written by write_adjacency."""
    if not os.path.isfile(path):
        raise DataIOError(f"Adjacency file not found: {path}")

    rows: list[list[float]] = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise DataIOError(f"Adjacency file is empty: {path}")
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataIOError(
                    f"{path}: row {row_no} has {len(row)} columns, "
                    f"expected {len(header)}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError as e:
                raise DataIOError(
                    f"{path}: row {row_no} has a non-numeric weight: {e}"
                ) from e

    return Graph.from_adjacency(np.array(rows, dtype=float).reshape(-1, len(header)))
