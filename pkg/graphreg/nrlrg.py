"""Node-recursive linear regression over graphs.

When a node joins a graph of M nodes, the normal-equation matrix of the
(M+1)-node problem borders the old one:

    F_{M+1} = [[b, c], [c^T, d]]
    b = F_M + beta diag(a) kron G
    c = -beta a kron G
    d = (1 + beta a^T 1) G + alpha I_K

with G = Phi^T Phi. Block inversion gives F_{M+1}^{-1} = [[z, m], [m^T, n]]
where z = (Q_M^{-1} + h)^{-1}, h = beta diag(a) kron G - c d^{-1} c^T and
Q_M = F_M^{-1}.

h is zero outside the block rows of the nodes the newcomer links to (the
support). For a sparse attachment z comes from Q_M with a Woodbury
correction of the size of the support, applied as a symmetric low-rank
downdate. When the support covers more than half of the block rows that
correction costs more than a factorization, so the top-left Schur
complement b - c d^{-1} c^T is Cholesky-factored instead and the explicit
inverse is only assembled if a later step asks for it.

The coefficients then follow without re-solving:

    vec(W_{M+1}) = [ z F_M vec(W_M) + m Phi^T t ;
                     m^T F_M vec(W_M) + n Phi^T t ]

where t holds the newcomer's N training targets and F_M vec(W_M) is the
cached right-hand side vec(Phi^T T_M). alpha and beta stay fixed for the
lifetime of a chain.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, eigh, solve

from graphreg.errors import (
    DataIOError,
    NumericalBreakdownError,
    ValidationError,
)
from graphreg.graph import Graph, append_node, validate_attachment
from graphreg.lrg import LrgProblem, build_F, cholesky, predict_design, solve_batch, unvec, vec

logger = logging.getLogger(__name__)

SNAPSHOT_VERSION = 1

# Residual above which verify mode discards the recursion and re-solves.
VERIFY_TOLERANCE = 1e-6


def _sym(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X + X.T)


def _block_index(nodes: np.ndarray, K: int) -> np.ndarray:
    return (nodes[:, None] * K + np.arange(K)[None, :]).ravel()


@dataclass(frozen=True)
class SchurFactor:
    """F_{M+1}^{-1} held as the Cholesky factor of b - c d^{-1} c^T."""

    factor: tuple
    c: np.ndarray       # MK x K
    d_factor: tuple

    def solve(self, r: np.ndarray, pt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Solve F_{M+1} [x; y] = [r; pt] by block elimination."""
        x = cho_solve(self.factor, r - self.c @ cho_solve(self.d_factor, pt), check_finite=False)
        y = cho_solve(self.d_factor, pt - self.c.T @ x)
        return x, y

    def assemble(self) -> np.ndarray:
        MK, K = self.c.shape
        Q = np.empty((MK + K, MK + K))
        z = Q[:MK, :MK]
        m = Q[:MK, MK:]
        z[...] = _sym(cho_solve(self.factor, np.eye(MK), check_finite=False))
        dinv_ct = cho_solve(self.d_factor, self.c.T)
        m[...] = -(z @ dinv_ct.T)
        Q[MK:, MK:] = _sym(cho_solve(self.d_factor, np.eye(K)) - dinv_ct @ m)
        Q[MK:, :MK] = m.T
        return Q


@dataclass(frozen=True)
class RecursionState:
    """Everything a chain carries from one node insertion to the next.

    `inverse` is either F^{-1} itself or a SchurFactor from which it is
    assembled on first access through `Q`.
    """

    graph: Graph
    W: np.ndarray        # K x M
    inverse: np.ndarray | SchurFactor
    alpha: float
    beta: float
    gram: np.ndarray     # K x K, Phi^T Phi
    phi_t: np.ndarray    # K x N, Phi^T
    rhs: np.ndarray      # K x M, Phi^T T

    @property
    def M(self) -> int:
        return self.graph.M

    @property
    def K(self) -> int:
        return self.gram.shape[0]

    @property
    def N(self) -> int:
        return self.phi_t.shape[1]

    @property
    def w(self) -> np.ndarray:
        return vec(self.W)

    @cached_property
    def Q(self) -> np.ndarray:
        """MK x MK inverse of F."""
        if isinstance(self.inverse, SchurFactor):
            return self.inverse.assemble()
        return self.inverse

    @cached_property
    def F(self) -> np.ndarray:
        """Normal-equation matrix of the current graph, built on first use."""
        return build_F(self.graph.L, self.phi_t.T, self.alpha, self.beta)


LowRank = tuple[np.ndarray, np.ndarray]


def _lowrank_apply(U: LowRank, v: np.ndarray) -> np.ndarray:
    """(U+ U+^T - U- U-^T) v"""
    U_pos, U_neg = U
    out = U_pos @ (U_pos.T @ v)
    if U_neg.shape[1]:
        out -= U_neg @ (U_neg.T @ v)
    return out


def _downdate(Q: np.ndarray, U: LowRank, out: np.ndarray) -> np.ndarray:
    """out = Q - U+ U+^T + U- U-^T, symmetric whenever Q is."""
    U_pos, U_neg = U
    np.subtract(Q, U_pos @ U_pos.T, out=out)
    if U_neg.shape[1]:
        out += U_neg @ U_neg.T
    return out


@dataclass(frozen=True)
class BlockPieces:
    """Blocks of F_{M+1} and of its inverse for one incoming node.

    h and b - F_M are nonzero only on the support (the block rows of the
    nodes the newcomer links to), so only those blocks are built, and only
    on request. z, m and n are views into the assembled inverse.
    """

    prior: RecursionState
    a: np.ndarray
    c: np.ndarray           # MK x K
    d: np.ndarray           # K x K
    support: np.ndarray     # scalar indices where h is nonzero
    inverse: np.ndarray | SchurFactor
    correction: LowRank | None = None  # z = Q_M - U+ U+^T + U- U-^T

    @property
    def _split(self) -> int:
        return self.c.shape[0]

    @cached_property
    def Q_next(self) -> np.ndarray:
        if isinstance(self.inverse, SchurFactor):
            return self.inverse.assemble()
        return self.inverse

    @property
    def z(self) -> np.ndarray:
        return self.Q_next[: self._split, : self._split]

    @property
    def m(self) -> np.ndarray:
        return self.Q_next[: self._split, self._split:]

    @property
    def n(self) -> np.ndarray:
        return self.Q_next[self._split:, self._split:]

    @property
    def F_M(self) -> np.ndarray:
        return self.prior.F

    @cached_property
    def b_S(self) -> np.ndarray:
        """b - F_M on the support."""
        nodes = self.support[:: self.d.shape[0]] // self.d.shape[0]
        return np.kron(np.diag(self.a[nodes]), self.prior.beta * self.prior.gram)

    @cached_property
    def h_S(self) -> np.ndarray:
        if self.support.size == 0:
            return np.zeros((0, 0))
        c_S = self.c[self.support, :]
        return _sym(self.b_S - c_S @ cho_solve(cholesky(self.d), c_S.T))

    @cached_property
    def h(self) -> np.ndarray:
        h = np.zeros_like(self.F_M)
        h[np.ix_(self.support, self.support)] = self.h_S
        return h

    @cached_property
    def rho(self) -> np.ndarray:
        """I - z F_M, the matrix that discounts the old coefficients."""
        return np.eye(self._split) - self.z @ self.F_M

    def assemble_F(self) -> np.ndarray:
        n = self._split
        F = np.empty((n + self.d.shape[0],) * 2)
        F[:n, :n] = self.F_M
        F[np.ix_(self.support, self.support)] += self.b_S
        F[:n, n:] = self.c
        F[n:, :n] = self.c.T
        F[n:, n:] = self.d
        return F

    def assemble_Q(self) -> np.ndarray:
        return self.Q_next


def init_state(
    g: Graph,
    Phi: np.ndarray,
    T: np.ndarray,
    alpha: float,
    beta: float,
) -> RecursionState:
    """Solve the batch problem on the initial graph and factor F once."""
    if alpha <= 0:
        raise ValidationError(f"A recursion chain needs alpha > 0, got {alpha}")
    problem = LrgProblem(Phi=Phi, T=T, L=g.L, alpha=alpha, beta=beta)
    W = solve_batch(problem)

    F = build_F(g.L, problem.Phi, alpha, beta)
    Q = _sym(cho_solve(cholesky(F), np.eye(F.shape[0])))

    logger.debug(
        "Initialized chain at M=%d (K=%d, N=%d, alpha=%g, beta=%g)",
        g.M, problem.K, problem.N, alpha, beta,
    )
    return RecursionState(
        graph=g,
        W=W,
        inverse=Q,
        alpha=float(alpha),
        beta=float(beta),
        gram=problem.Phi.T @ problem.Phi,
        phi_t=problem.Phi.T.copy(),
        rhs=problem.Phi.T @ problem.T,
    )


def _support(h: np.ndarray) -> np.ndarray:
    nz = h != 0
    return np.flatnonzero(nz.any(axis=0) | nz.any(axis=1))


def _woodbury_factors(Q_S: np.ndarray, h_S: np.ndarray, support: np.ndarray) -> LowRank:
    """Split Q_:,S (I + h_S Q_SS)^{-1} h_S Q_S,: into U+ U+^T - U- U-^T.

    The inner sK x sK matrix is symmetrized and eigendecomposed, so the
    MK x MK correction is a difference of two Gram products.
    """
    system = np.eye(support.size) + h_S @ Q_S[support, :]
    try:
        Y = solve(system, h_S, check_finite=True)
    except (LinAlgError, ValueError) as e:
        raise NumericalBreakdownError(
            f"Woodbury system of size {support.size} is singular: {e}"
        ) from e
    if not np.all(np.isfinite(Y)):
        raise NumericalBreakdownError("Woodbury correction produced non-finite values")

    lam, V = eigh(_sym(Y))
    B = Q_S @ V
    pos, neg = lam > 0, lam < 0
    return B[:, pos] * np.sqrt(lam[pos]), B[:, neg] * np.sqrt(-lam[neg])


def woodbury_z(
    Q: np.ndarray,
    h: np.ndarray,
    support: np.ndarray | None = None,
) -> np.ndarray:
    """Return (Q^{-1} + h)^{-1} without inverting h.

    Uses z = Q - Q h (I + Q h)^{-1} Q, restricted to the rows and columns
    in `support` (where h is nonzero), so the only dense solve is of the
    size of the support. With an empty support z == Q.

    Raises:
        NumericalBreakdownError: If I + Q h is singular.
    """
    if support is None:
        support = _support(h)
    if support.size == 0:
        return Q.copy()
    U = _woodbury_factors(Q[:, support], h[np.ix_(support, support)], support)
    return _downdate(Q, U, np.empty_like(Q))


def _schur_factor(state: RecursionState, a: np.ndarray, c: np.ndarray, d_factor) -> SchurFactor:
    """Cholesky-factor b - c d^{-1} c^T for an attachment that touches most nodes."""
    G, beta, K = state.gram, state.beta, state.K
    # b - c d^{-1} c^T = (I + beta (L_M + diag a)) kron G
    #                    - beta^2 a a^T kron G d^{-1} G + alpha I
    H = _sym(G @ cho_solve(d_factor, G))
    S = np.kron(np.eye(state.M) + beta * (state.graph.L + np.diag(a)), G)
    S -= np.kron(np.outer(a, a), beta * beta * H)
    S[np.diag_indices(state.M * K)] += state.alpha
    try:
        # S is exactly symmetric, so its transpose is the Fortran-ordered
        # view LAPACK can factor in place.
        factor = cho_factor(S.T, lower=True, overwrite_a=True, check_finite=False)
    except LinAlgError as e:
        raise NumericalBreakdownError(
            f"Schur complement of size {S.shape[0]} is not positive definite: {e}"
        ) from e
    return SchurFactor(factor=factor, c=c, d_factor=d_factor)


def block_pieces(state: RecursionState, a: np.ndarray) -> BlockPieces:
    """Partition F_{M+1} for attachment a and invert it blockwise."""
    a = validate_attachment(a, state.M)
    K = state.K
    G = state.gram
    beta, alpha = state.beta, state.alpha
    MK = state.M * K

    nodes = np.flatnonzero(a) if beta != 0 else np.array([], dtype=int)
    support = _block_index(nodes, K)

    c = -beta * np.kron(a[:, None], G)
    d = (1.0 + beta * a.sum()) * G + alpha * np.eye(K)
    d_factor = cholesky(d)

    if 2 * support.size > MK:
        return BlockPieces(
            prior=state, a=a, c=c, d=d, support=support,
            inverse=_schur_factor(state, a, c, d_factor),
        )

    Q = state.Q
    Q_next = np.empty((MK + K, MK + K))
    z = Q_next[:MK, :MK]
    m = Q_next[:MK, MK:]
    n = Q_next[MK:, MK:]
    n[...] = _sym(cho_solve(d_factor, np.eye(K)))

    U = None
    if support.size:
        c_S = c[support, :]
        dinv_cS = cho_solve(d_factor, c_S.T)  # K x sK
        h_S = _sym(np.kron(np.diag(a[nodes]), beta * G) - c_S @ dinv_cS)
        U = _woodbury_factors(Q[:, support], h_S, support)
        _downdate(Q, U, out=z)
        # m = -z c d^{-1}, n = d^{-1} - d^{-1} c^T m; c is zero off the support
        m[...] = -(z[:, support] @ dinv_cS.T)
        n[...] = _sym(n - dinv_cS @ m[support, :])
    else:
        z[...] = Q
        m[...] = 0.0
    Q_next[MK:, :MK] = m.T

    return BlockPieces(
        prior=state, a=a, c=c, d=d, support=support,
        inverse=Q_next, correction=U,
    )


def inverse_residual(state: RecursionState) -> float:
    """max |F Q - I|, the drift of the cached inverse."""
    return float(np.abs(state.F @ state.Q - np.eye(state.Q.shape[0])).max())


def predict_state(state: RecursionState, Phi: np.ndarray) -> np.ndarray:
    """Predicted signals of the chain's current coefficients, N x M."""
    return predict_design(state.W, Phi)


def _resolve(graph: Graph, state: RecursionState, rhs: np.ndarray) -> RecursionState:
    F = build_F(graph.L, state.phi_t.T, state.alpha, state.beta)
    factor = cholesky(F)
    Q = _sym(cho_solve(factor, np.eye(F.shape[0])))
    W = unvec(cho_solve(factor, vec(rhs)), state.K, graph.M)
    return RecursionState(
        graph=graph, W=W, inverse=Q, alpha=state.alpha, beta=state.beta,
        gram=state.gram, phi_t=state.phi_t, rhs=rhs,
    )


def update(
    state: RecursionState,
    a: np.ndarray,
    t_new: np.ndarray,
    verify: bool = False,
) -> RecursionState:
    """Append one node and return the state of the (M+1)-node problem.

    Args:
        state: Chain state for the current graph.
        a: Edge weights from the incoming node to each existing node.
        t_new: The incoming node's targets for all N training samples.
        verify: Recompute F Q after the update and fall back to a batch
                re-solve if the residual exceeds VERIFY_TOLERANCE.

    Raises:
        ValidationError: On shape mismatches or non-finite targets.
        NumericalBreakdownError: If the Woodbury correction or the Schur
                                 factorization breaks down.
    """
    t_new = np.asarray(t_new, dtype=float)
    if t_new.shape != (state.N,):
        raise ValidationError(
            f"New-node targets of shape {t_new.shape} do not match N={state.N}"
        )
    if not np.all(np.isfinite(t_new)):
        raise ValidationError("New-node targets must be finite")

    pieces = block_pieces(state, a)
    graph = append_node(state.graph, a)

    r = vec(state.rhs)
    pt = state.phi_t @ t_new
    if isinstance(pieces.inverse, SchurFactor):
        top, bottom = pieces.inverse.solve(r, pt)
    else:
        # F_M vec(W_M) is the cached right-hand side, so z F_M vec(W_M) =
        # vec(W_M) - (U+ U+^T - U- U-^T) vec(rhs); with no support the old
        # coefficients are carried over exactly.
        top = state.w + pieces.m @ pt
        if pieces.correction is not None:
            top = top - _lowrank_apply(pieces.correction, r)
        bottom = pieces.m.T @ r + pieces.n @ pt
    W = unvec(np.concatenate([top, bottom]), state.K, state.M + 1)

    rhs = np.column_stack([state.rhs, pt])
    new_state = RecursionState(
        graph=graph,
        W=W,
        inverse=pieces.inverse,
        alpha=state.alpha,
        beta=state.beta,
        gram=state.gram,
        phi_t=state.phi_t,
        rhs=rhs,
    )

    logger.debug(
        "Appended node %d with %d neighbours (%s)",
        state.M + 1, pieces.support.size // state.K,
        "schur" if isinstance(pieces.inverse, SchurFactor) else "woodbury",
    )

    if verify:
        residual = inverse_residual(new_state)
        if not residual <= VERIFY_TOLERANCE:
            logger.warning(
                "Inverse drift %.3g at M=%d exceeds %.1g; re-solving batch",
                residual, graph.M, VERIFY_TOLERANCE,
            )
            return _resolve(graph, state, rhs)
    return new_state


def expand(
    state: RecursionState,
    attachments,
    targets: np.ndarray,
    verify: bool = False,
) -> RecursionState:
    """Apply update() for each attachment in turn.

    targets is N x (number of attachments); column j belongs to the j-th
    incoming node.
    """
    targets = np.asarray(targets, dtype=float)
    attachments = list(attachments)
    if targets.ndim != 2 or targets.shape[1] != len(attachments):
        raise ValidationError(
            f"Need one target column per attachment, got shape {targets.shape} "
            f"for {len(attachments)} attachments"
        )
    for j, a in enumerate(attachments):
        state = update(state, a, targets[:, j], verify=verify)
    return state


# ---------------------------------------------------------------------------
# Snapshots
# ---------------------------------------------------------------------------

def save_state(path: str, state: RecursionState) -> None:
    """Write a versioned .npz snapshot: header [version, M, K, N] + matrices."""
    header = np.array([SNAPSHOT_VERSION, state.M, state.K, state.N], dtype=np.int64)
    try:
        with open(path, "wb") as f:
            np.savez(
                f,
                header=header,
                hyper=np.array([state.alpha, state.beta]),
                A=np.ascontiguousarray(state.graph.A),
                W=np.ascontiguousarray(state.W),
                Q=np.ascontiguousarray(state.Q),
                gram=np.ascontiguousarray(state.gram),
                phi_t=np.ascontiguousarray(state.phi_t),
                rhs=np.ascontiguousarray(state.rhs),
            )
    except OSError as e:
        raise DataIOError(f"Cannot write state snapshot to {path}: {e}") from e


def load_state(path: str) -> RecursionState:
    """Read a snapshot written by save_state."""
    if not os.path.isfile(path):
        raise DataIOError(f"State snapshot not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as data:
            arrays = {k: data[k] for k in data.files}
    except (OSError, ValueError) as e:
        raise DataIOError(f"Cannot read state snapshot {path}: {e}") from e

    missing = {"header", "hyper", "A", "W", "Q", "gram", "phi_t", "rhs"} - set(arrays)
    if missing:
        raise DataIOError(f"State snapshot {path} lacks arrays: {sorted(missing)}")

    version, M, K, N = (int(v) for v in arrays["header"])
    if version != SNAPSHOT_VERSION:
        raise DataIOError(
            f"State snapshot {path} has version {version}, expected {SNAPSHOT_VERSION}"
        )
    expected = {
        "A": (M, M), "W": (K, M), "Q": (M * K, M * K),
        "gram": (K, K), "phi_t": (K, N), "rhs": (K, M),
    }
    for name, shape in expected.items():
        if arrays[name].shape != shape:
            raise DataIOError(
                f"State snapshot {path}: {name} has shape {arrays[name].shape}, "
                f"expected {shape}"
            )

    alpha, beta = (float(v) for v in arrays["hyper"])
    return RecursionState(
        graph=Graph.from_adjacency(arrays["A"]),
        W=arrays["W"],
        inverse=arrays["Q"],
        alpha=alpha,
        beta=beta,
        gram=arrays["gram"],
        phi_t=arrays["phi_t"],
        rhs=arrays["rhs"],
    )
