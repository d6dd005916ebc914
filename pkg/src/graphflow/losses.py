"""Loss, gradient and curvature evaluation for the graph dynamics problems.

States are plain float arrays of shape (n, d) with one row per node
(d = 1 for temperatures and phases); a flat (n,) array is accepted
wherever d = 1. Conventions used throughout:

  heat           L(w) = 1/2 w^T L w + c sum_{i in S} |w_i - T_i|^p
  kuramoto       L(w) = -sum_{i,j} A_ji cos(w_i - w_j)      (ordered pairs)
  hopf-kuramoto  L(w) = c sum_{i,j} A_ji [sin(w_i - w_j) + s1 cos(w_i - w_j)]
                        + s2/2 sum_{i,k,j} A_ij A_jk [cos(D_ji + D_jk)
                                                      + cos(D_ji - D_jk)]

with D_ab = w_a - w_b. The double sums run over ordered pairs, so each
undirected edge is counted twice; gradients are the exact derivatives of
these expressions. Phases are stored unwrapped; only the order parameter
and reporting wrap them.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse.csgraph as csgraph

from .errors import DimensionMismatch, SizeLimit, SingularSystem, UnsupportedProblem
from .graphs import SparseGraph, degree_vector, laplacian
from .sparse import SparseMatrix


def as_state(values, n, d=1) -> np.ndarray:
    """Validate and reshape a state to (n, d)."""
    w = np.asarray(values, dtype=np.float64)
    if w.ndim == 1:
        w = w[:, None]
    if w.shape != (n, d):
        raise DimensionMismatch(f"state shape {w.shape}, expected ({n}, {d})")
    if not np.all(np.isfinite(w)):
        raise DimensionMismatch("state has non-finite entries")
    return w


def _flat(w, n):
    w = np.asarray(w, dtype=np.float64)
    orig_shape = w.shape
    if w.ndim == 2 and w.shape[1] == 1:
        w = w[:, 0]
    if w.shape != (n,):
        raise DimensionMismatch(f"state shape {orig_shape}, expected ({n},) or ({n}, 1)")
    return w, orig_shape


@dataclass(frozen=True)
class BoundaryCondition:
    """Pinned nodes with targets, penalty strength c and even exponent p."""

    pinned: tuple
    strength: float = 1.0
    exponent: int = 2

    def __post_init__(self):
        object.__setattr__(self, "pinned", tuple((int(i), float(t)) for i, t in self.pinned))
        nodes = [i for i, _ in self.pinned]
        if len(set(nodes)) != len(nodes):
            raise DimensionMismatch("duplicate pinned node")
        if self.strength <= 0:
            raise DimensionMismatch("boundary strength must be positive")
        if self.exponent not in (2, 4):
            raise DimensionMismatch("boundary exponent must be 2 or 4")

    @property
    def nodes(self):
        return np.array([i for i, _ in self.pinned], dtype=np.int64)

    @property
    def targets(self):
        return np.array([t for _, t in self.pinned])


@dataclass(frozen=True)
class HopfParams:
    c: float = 1.0
    s1: float = 1.0
    s2: float = 0.0

    def __post_init__(self):
        for v in (self.c, self.s1, self.s2):
            if not np.isfinite(v):
                raise DimensionMismatch("non-finite Hopf-Kuramoto parameter")


class _GraphProblem:
    """Shared precomputation: COO entry arrays of the adjacency."""

    d = 1
    is_phase = False

    def __init__(self, graph: SparseGraph):
        self.graph = graph
        self.n = graph.n
        self._rows, self._cols, self._vals = graph.edge_arrays()

    def evaluate(self, w):
        raise NotImplementedError

    def hessian_at_zero(self) -> SparseMatrix:
        raise NotImplementedError


class HeatProblem(_GraphProblem):
    """Dirichlet energy with an optional boundary pinning penalty."""

    def __init__(self, graph, bc: BoundaryCondition | None = None):
        super().__init__(graph)
        self.bc = bc if bc is not None else BoundaryCondition(pinned=())
        if len(self.bc.pinned) and self.bc.nodes.max() >= self.n:
            raise DimensionMismatch("pinned node outside the graph")
        self._lap = laplacian(graph)

    def evaluate(self, w):
        w, shape = _flat(w, self.n)
        lw = self._lap @ w
        loss = 0.5 * float(w @ lw)
        grad = lw
        bc = self.bc
        if len(bc.pinned):
            dev = w[bc.nodes] - bc.targets
            p, c = bc.exponent, bc.strength
            loss += c * float(np.sum(np.abs(dev) ** p))
            grad = grad.copy()
            grad[bc.nodes] += c * p * dev ** (p - 1)
        return loss, grad.reshape(shape)

    def hessian_at_zero(self):
        h = self._lap
        bc = self.bc
        if len(bc.pinned):
            if bc.exponent == 2:
                extra = np.full(len(bc.pinned), 2.0 * bc.strength)
            else:
                extra = 12.0 * bc.strength * bc.targets**2
            diag = SparseMatrix.from_coo(self.n, self.n, bc.nodes, bc.nodes, extra)
            h = h.add(diag)
        return h


class KuramotoProblem(_GraphProblem):
    """Phase-coupling energy -sum A cos(dw); gradient 2 sum A sin(dw)."""

    is_phase = True

    def evaluate(self, w):
        w, shape = _flat(w, self.n)
        d = w[self._rows] - w[self._cols]
        loss = -float(np.sum(self._vals * np.cos(d)))
        grad = 2.0 * np.bincount(
            self._rows, weights=self._vals * np.sin(d), minlength=self.n
        )
        return loss, grad.reshape(shape)

    def hessian_at_zero(self):
        return laplacian(self.graph).scale(2.0)


class HopfKuramotoProblem(_GraphProblem):
    """Kuramoto extension with two-hop interactions (constants c, s1, s2).

    The second-neighbor triple sum collapses exactly, for symmetric A,
    to s2 * sum_j C_j^2 with C_j = sum_i A_ji cos(w_j - w_i); both loss
    and gradient are evaluated through it in O(nnz).
    """

    is_phase = True

    def __init__(self, graph, params: HopfParams):
        super().__init__(graph)
        self.params = params
        self._deg = degree_vector(graph)

    def evaluate(self, w):
        w, shape = _flat(w, self.n)
        c, s1, s2 = self.params.c, self.params.s1, self.params.s2
        rows, cols, vals = self._rows, self._cols, self._vals
        d = w[rows] - w[cols]
        sin_d, cos_d = np.sin(d), np.cos(d)
        loss = c * float(np.sum(vals * (sin_d + s1 * cos_d)))
        # first-neighbor term, differentiated literally
        by_row_cos = np.bincount(rows, weights=vals * cos_d, minlength=self.n)
        by_col_cos = np.bincount(cols, weights=vals * cos_d, minlength=self.n)
        by_row_sin = np.bincount(rows, weights=vals * sin_d, minlength=self.n)
        by_col_sin = np.bincount(cols, weights=vals * sin_d, minlength=self.n)
        grad = c * ((by_row_cos - by_col_cos) + s1 * (by_col_sin - by_row_sin))
        if s2 != 0.0:
            cj = by_row_cos  # C_j = sum_i A_ji cos(w_j - w_i)
            sj = by_row_sin
            loss += s2 * float(cj @ cj)
            cross = np.bincount(
                cols, weights=vals * cj[rows] * sin_d, minlength=self.n
            )
            grad += 2.0 * s2 * (cross - cj * sj)
        return loss, grad.reshape(shape)

    def hessian_at_zero(self):
        c, s1, s2 = self.params.c, self.params.s1, self.params.s2
        rows, cols, vals = self._rows, self._cols, self._vals
        deg = self._deg
        wdeg = np.zeros(self.n)  # (A @ deg)_a = sum_j A_aj d_j
        np.add.at(wdeg, rows, vals * deg[cols])
        diag = -2.0 * c * s1 * deg - 2.0 * s2 * (deg**2 + wdeg)
        off = 2.0 * c * s1 * vals + 2.0 * s2 * vals * (deg[rows] + deg[cols])
        idx = np.arange(self.n)
        return SparseMatrix.from_coo(
            self.n,
            self.n,
            np.concatenate([rows, idx]),
            np.concatenate([cols, idx]),
            np.concatenate([off, diag]),
        )


def heat_eval(g: SparseGraph, w, bc: BoundaryCondition):
    return HeatProblem(g, bc).evaluate(w)


def kuramoto_eval(g: SparseGraph, w):
    return KuramotoProblem(g).evaluate(w)


def hopf_kuramoto_eval(g: SparseGraph, w, hp: HopfParams):
    return HopfKuramotoProblem(g, hp).evaluate(w)


def hessian_at_zero(problem) -> SparseMatrix:
    """Sparse symmetric Hessian of the problem's loss at w = 0."""
    if not hasattr(problem, "hessian_at_zero"):
        raise UnsupportedProblem(f"{type(problem).__name__} has no Hessian")
    return problem.hessian_at_zero()


def order_parameter(w) -> float:
    """Global synchronization measure rho = |mean exp(i w)| in [0, 1]."""
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    rho = abs(np.exp(1j * w).mean())
    return min(float(rho), 1.0)


def heat_direct_solve(g: SparseGraph, bc: BoundaryCondition) -> np.ndarray:
    """Steady state of the pinned heat problem via a dense linear solve.

    Solves (L + 2cP) w = 2cPt where P indicates pinned nodes and t the
    targets; valid for quadratic pinning (p = 2) and graphs up to
    n = 5000. Every connected component must contain a pin, otherwise
    the system is singular.
    """
    if bc.exponent != 2:
        raise UnsupportedProblem("direct solve requires exponent p = 2")
    if g.n > 5000:
        raise SizeLimit(f"direct solve limited to n <= 5000, got {g.n}")
    if not len(bc.pinned):
        raise SingularSystem("no pinned nodes")
    n_comp, labels = csgraph.connected_components(g.adjacency.to_scipy(), directed=False)
    pinned_comps = set(labels[bc.nodes].tolist())
    if len(pinned_comps) != n_comp:
        raise SingularSystem("a connected component has no pinned node")
    c = bc.strength
    a = laplacian(g).to_dense()
    rhs = np.zeros(g.n)
    a[bc.nodes, bc.nodes] += 2.0 * c
    rhs[bc.nodes] = 2.0 * c * bc.targets
    try:
        w = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    residual = np.linalg.norm(a @ w - rhs)
    if residual > 1e-8 * max(1.0, np.linalg.norm(rhs)):
        raise SingularSystem(f"solve residual {residual:.2e}")
    return w[:, None]
