"""Command-line interface.

Subcommands:
- build-graph: coordinates CSV -> geodesic adjacency CSV
- train:       batch LRG on the first nodes of a signal CSV; writes the
               coefficients and a chain snapshot
- expand:      continue a chain snapshot node by node with NR-LRG
- experiment:  run a configured LR / LRG / NR-LRG sweep and write its report
- bench:       time one recursive insertion against a batch re-solve

Exit codes: 0 success, 1 validation error, 2 numerical breakdown, 3 I/O.
"""

from __future__ import annotations

import argparse
import csv
import logging

import numpy as np
from pydantic import ValidationError as PydanticError

from graphreg.config import load_experiment_config
from graphreg.errors import DataIOError, NumericalBreakdownError, ValidationError
from graphreg.features import FeatureMap, design_matrix
from graphreg.graph import (
    geodesic_adjacency,
    load_adjacency,
    load_coords,
    subgraph,
    write_adjacency,
)
from graphreg.harness.bench import run_benchmark
from graphreg.harness.datasets import PairingSpec, pair, read_signal_csv
from graphreg.harness.experiment import run_and_emit
from graphreg.nrlrg import expand, init_state, load_state, save_state

logger = logging.getLogger("graphreg")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _pairing(args) -> PairingSpec:
    if args.n_inputs is not None:
        return PairingSpec(kind="split", n_inputs=args.n_inputs)
    return PairingSpec(kind="lag", lag=args.lag)


def _training_pairs(args) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Node names, inputs and targets of the first train_count pairs."""
    names, signals = read_signal_csv(args.signals)
    pairing = _pairing(args)
    X, T = pair(signals, pairing)
    if pairing.kind == "split":
        names = names[pairing.n_inputs:]
    n = args.train_count or X.shape[0]
    if n > X.shape[0]:
        raise ValidationError(f"train_count {n} exceeds the {X.shape[0]} available pairs")
    return names, X[:n], T[:n]


def _write_coefficients(path: str, W: np.ndarray, names: list[str]) -> None:
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(names[: W.shape[1]])
            for row in W:
                writer.writerow([repr(float(v)) for v in row])
    except OSError as e:
        raise DataIOError(f"Cannot write coefficients to {path}: {e}") from e


def _add_pairing_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--signals", required=True, help="Signal CSV, one column per node.")
    p.add_argument("--adjacency", required=True, help="Adjacency CSV over the target nodes.")
    p.add_argument("--lag", type=int, default=2, help="Lag pairing: t_n = row n + lag.")
    p.add_argument(
        "--n-inputs", type=int, default=None,
        help="Column-split pairing: first n columns are inputs, the rest targets.",
    )
    p.add_argument("--train-count", type=int, default=None, help="Use the first N pairs.")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_build_graph(args) -> int:
    names, coords = load_coords(args.coords)
    A = geodesic_adjacency(coords)
    write_adjacency(args.out, A, names)
    logger.info("Wrote %d-node adjacency to %s", len(names), args.out)
    return EXIT_OK


def cmd_train(args) -> int:
    names, X, T = _training_pairs(args)
    g = load_adjacency(args.adjacency)
    m0 = args.m0 or g.M
    g0 = subgraph(g, range(m0))

    if args.features == "identity":
        fmap = FeatureMap.identity(X.shape[1])
    else:
        fmap = FeatureMap.random_sigmoid(X.shape[1], args.K or 2 * X.shape[1], args.seed)
    Phi = design_matrix(fmap, X)

    state = init_state(g0, Phi, T[:, :m0], args.alpha, args.beta)
    save_state(args.state_out, state)
    if args.coef_out:
        _write_coefficients(args.coef_out, state.W, names)
    logger.info("Trained on %d nodes, %d samples; snapshot at %s", m0, Phi.shape[0], args.state_out)
    return EXIT_OK


def cmd_expand(args) -> int:
    state = load_state(args.state)
    names, _, T = _training_pairs(args)
    if T.shape[0] != state.N:
        raise ValidationError(
            f"Snapshot was trained on N={state.N} samples, signals give {T.shape[0]}"
        )
    g = load_adjacency(args.adjacency)
    until = args.until or g.M
    if until > g.M or until > T.shape[1]:
        raise ValidationError(f"Cannot expand to {until} nodes; data has {min(g.M, T.shape[1])}")

    attachments = [g.A[m, :m] for m in range(state.M, until)]
    state = expand(state, attachments, T[:, state.M:until], verify=args.verify)
    save_state(args.state_out or args.state, state)
    if args.coef_out:
        _write_coefficients(args.coef_out, state.W, names)
    logger.info("Expanded chain to %d nodes", state.M)
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = load_experiment_config(args.config)
    if args.output:
        cfg = cfg.model_copy(update={"output": cfg.output.model_copy(update={"path": args.output})})
    report = run_and_emit(cfg)
    logger.info("Wrote %d rows to %s", len(report.rows), cfg.output.path)
    return EXIT_OK


def cmd_bench(args) -> int:
    result = run_benchmark(
        M=args.M, K=args.K, N=args.N, repetitions=args.reps,
        neighbors=None if args.neighbors < 0 else args.neighbors,
        seed=args.seed,
    )
    print("M,K,N,neighbors,repetitions,recursive_s,batch_s,ratio")
    print(
        f"{result.M},{result.K},{result.N},{result.neighbors},{result.repetitions},"
        f"{result.recursive_s:.6g},{result.batch_s:.6g},{result.ratio:.4f}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphreg",
        description="Linear regression over graphs with node-recursive updates.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-graph", help="Geodesic adjacency from a coordinate CSV.")
    p.add_argument("--coords", required=True, help="CSV with header name,lat,lon.")
    p.add_argument("--out", required=True, help="Output adjacency CSV.")
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("train", help="Batch LRG on the first m0 nodes.")
    _add_pairing_args(p)
    p.add_argument("--m0", type=int, default=None, help="Initial node count (default: all).")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--features", choices=("identity", "random-sigmoid"), default="identity")
    p.add_argument("--K", type=int, default=None, help="Random-sigmoid dimension (default 2I).")
    p.add_argument("--seed", type=int, default=0, help="Random-sigmoid seed.")
    p.add_argument("--state-out", required=True, help="Snapshot (.npz) to write.")
    p.add_argument("--coef-out", default=None, help="Coefficient CSV to write.")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("expand", help="Add nodes to a snapshot with NR-LRG.")
    _add_pairing_args(p)
    p.add_argument("--state", required=True, help="Snapshot (.npz) to continue.")
    p.add_argument("--until", type=int, default=None, help="Final node count (default: all).")
    p.add_argument("--verify", action="store_true", help="Check F Q = I after each insertion.")
    p.add_argument("--state-out", default=None, help="Snapshot to write (default: overwrite).")
    p.add_argument("--coef-out", default=None, help="Coefficient CSV to write.")
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("experiment", help="Run a configured expansion sweep.")
    p.add_argument("--config", required=True, help="Config JSON path or experiment id.")
    p.add_argument("--output", default=None, help="Override the report path.")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("bench", help="Recursive insertion vs batch re-solve timing.")
    p.add_argument("--M", type=int, default=50)
    p.add_argument("--K", type=int, default=10)
    p.add_argument("--N", type=int, default=100)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument(
        "--neighbors", type=int, default=1,
        help="Links of the incoming node (negative: link to every node).",
    )
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ValidationError, PydanticError) as e:
        logger.error("%s", e)
        return EXIT_VALIDATION
    except NumericalBreakdownError as e:
        logger.error("Numerical breakdown: %s", e)
        return EXIT_NUMERICAL
    except OSError as e:
        logger.error("I/O error: %s", e)
        return EXIT_IO
