"""Sparse undirected graphs, generators and derived matrices.

The derived operators follow the usual conventions: degree D_ii = sum_k
A_ik, Laplacian L = D - A, and the symmetric degree-normalized adjacency
A_s = D^{-1/2} A D^{-1/2} (with optional self loops, in which case the
degrees are those of A + I).
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    AsymmetricInput,
    EmptyGraph,
    FileError,
    IndexOutOfRange,
    IsolatedNode,
    NonPositiveWeight,
    SelfLoop,
    ZeroMatrix,
)
from .sparse import SparseMatrix


@dataclass(frozen=True)
class SparseGraph:
    """Weighted undirected graph stored as a symmetric adjacency matrix."""

    adjacency: SparseMatrix
    symmetric: bool = True

    def __post_init__(self):
        a = self.adjacency
        if a.n_rows != a.n_cols:
            raise AsymmetricInput("adjacency must be square")
        if self.symmetric and not a.is_symmetric():
            raise AsymmetricInput("adjacency is not symmetric")
        rows = a.row_index_of_entries()
        if np.any(rows == a.col_indices):
            raise SelfLoop("adjacency has a nonzero diagonal")
        if len(a.values) and a.values.min() < 0:
            raise NonPositiveWeight("negative edge weight")

    @property
    def n(self) -> int:
        return self.adjacency.n_rows

    @property
    def n_edges(self) -> int:
        """Number of undirected edges (stored entries / 2)."""
        return self.adjacency.nnz // 2

    def edge_arrays(self):
        """(rows, cols, weights) of all stored directed entries."""
        a = self.adjacency
        return a.row_index_of_entries(), a.col_indices, a.values


# ---------------------------------------------------------------------
# graph specs
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class Lattice2D:
    rows: int
    cols: int
    periodic: bool = False


@dataclass(frozen=True)
class Lattice3D:
    nx: int
    ny: int
    nz: int
    periodic: bool = False


@dataclass(frozen=True)
class Circle:
    n: int


@dataclass(frozen=True)
class Tree:
    branching: int
    depth: int


@dataclass(frozen=True)
class SBM:
    block_sizes: tuple
    p_in: float
    p_out: float

    def __post_init__(self):
        object.__setattr__(self, "block_sizes", tuple(self.block_sizes))


@dataclass(frozen=True)
class RGG:
    n: int
    radius: float
    dim: int = 2


@dataclass(frozen=True)
class EdgeListFile:
    path: str


GraphSpec = Lattice2D | Lattice3D | Circle | Tree | SBM | RGG | EdgeListFile


# ---------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------


def from_edge_list(n, edges) -> SparseGraph:
    """Build a symmetric graph from (i, j, weight) triples.

    Both orientations are stored and duplicate edges are summed, so the
    result is a weighted adjacency whatever the input ordering.
    """
    rows, cols, vals = [], [], []
    for i, j, w in edges:
        if not (0 <= i < n and 0 <= j < n):
            raise IndexOutOfRange(f"edge ({i},{j}) outside [0,{n})")
        if i == j:
            raise SelfLoop(f"self loop at node {i}")
        if w <= 0:
            raise NonPositiveWeight(f"edge ({i},{j}) has weight {w}")
        rows += [i, j]
        cols += [j, i]
        vals += [w, w]
    adjacency = SparseMatrix.from_coo(n, n, rows, cols, vals)
    return SparseGraph(adjacency=adjacency, symmetric=True)


def to_edge_list(g: SparseGraph):
    """Canonical sorted edge list [(i, j, weight)] with i < j."""
    rows, cols, vals = g.edge_arrays()
    keep = rows < cols
    return list(zip(rows[keep].tolist(), cols[keep].tolist(), vals[keep].tolist()))


def read_edge_list(path) -> SparseGraph:
    """Read the text edge-list format.

    One edge per line as ``i j [weight]`` (0-based, weight defaults to
    1.0); lines starting with ``#`` are ignored; an optional first line
    ``n <count>`` declares the node count, otherwise n = max index + 1.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FileError(f"cannot read edge list {path}: {exc}") from exc
    n_declared = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "n" and n_declared is None and not edges:
            if len(parts) != 2:
                raise FileError(f"{path}:{lineno}: malformed node-count line")
            n_declared = int(parts[1])
            continue
        if len(parts) not in (2, 3):
            raise FileError(f"{path}:{lineno}: expected 'i j [weight]'")
        try:
            i, j = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError as exc:
            raise FileError(f"{path}:{lineno}: {exc}") from exc
        edges.append((i, j, w))
    if not edges:
        raise EmptyGraph(f"{path}: no edges")
    n = n_declared if n_declared is not None else max(max(i, j) for i, j, _ in edges) + 1
    return from_edge_list(n, edges)


def write_edge_list(g: SparseGraph, path):
    lines = [f"n {g.n}"]
    lines += [f"{i} {j} {w:.17g}" for i, j, w in to_edge_list(g)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def rgg_points(n, dim, seed) -> np.ndarray:
    """The seeded uniform point sample on [0,1]^dim used by RGG."""
    return np.random.default_rng(seed).random((n, dim))


def generate(spec, seed=0) -> SparseGraph:
    """Generate a graph; deterministic for a fixed (spec, seed).

    Lattice, circle and tree generators ignore the seed; SBM and RGG
    draw from ``numpy.random.default_rng(seed)``. All edges have unit
    weight.
    """
    edges = []
    if isinstance(spec, Lattice2D):
        r, c = spec.rows, spec.cols
        n = r * c
        node = lambda a, b: a * c + b
        for a in range(r):
            for b in range(c):
                if b + 1 < c or (spec.periodic and c > 2):
                    edges.append((node(a, b), node(a, (b + 1) % c), 1.0))
                if a + 1 < r or (spec.periodic and r > 2):
                    edges.append((node(a, b), node((a + 1) % r, b), 1.0))
    elif isinstance(spec, Lattice3D):
        nx, ny, nz = spec.nx, spec.ny, spec.nz
        n = nx * ny * nz
        node = lambda a, b, c: (a * ny + b) * nz + c
        for a in range(nx):
            for b in range(ny):
                for c in range(nz):
                    if a + 1 < nx or (spec.periodic and nx > 2):
                        edges.append((node(a, b, c), node((a + 1) % nx, b, c), 1.0))
                    if b + 1 < ny or (spec.periodic and ny > 2):
                        edges.append((node(a, b, c), node(a, (b + 1) % ny, c), 1.0))
                    if c + 1 < nz or (spec.periodic and nz > 2):
                        edges.append((node(a, b, c), node(a, b, (c + 1) % nz), 1.0))
    elif isinstance(spec, Circle):
        n = spec.n
        if n == 2:
            edges = [(0, 1, 1.0)]
        else:
            edges = [(i, (i + 1) % n, 1.0) for i in range(n)]
    elif isinstance(spec, Tree):
        b, depth = spec.branching, spec.depth
        n = sum(b**k for k in range(depth + 1))
        # nodes in breadth-first order: children of v are b*v+1 .. b*v+b
        last_parent = sum(b**k for k in range(depth)) - 1
        for v in range(last_parent + 1):
            for k in range(1, b + 1):
                edges.append((v, b * v + k, 1.0))
    elif isinstance(spec, SBM):
        sizes = np.asarray(spec.block_sizes, dtype=int)
        n = int(sizes.sum())
        labels = np.repeat(np.arange(len(sizes)), sizes)
        rng = np.random.default_rng(seed)
        iu, ju = np.triu_indices(n, k=1)
        p = np.where(labels[iu] == labels[ju], spec.p_in, spec.p_out)
        mask = rng.random(len(iu)) < p
        edges = [(int(i), int(j), 1.0) for i, j in zip(iu[mask], ju[mask])]
    elif isinstance(spec, RGG):
        n = spec.n
        pts = rgg_points(n, spec.dim, seed)
        iu, ju = np.triu_indices(n, k=1)
        d = np.linalg.norm(pts[iu] - pts[ju], axis=1)
        mask = d <= spec.radius
        edges = [(int(i), int(j), 1.0) for i, j in zip(iu[mask], ju[mask])]
    elif isinstance(spec, EdgeListFile):
        return read_edge_list(spec.path)
    else:
        raise TypeError(f"unknown graph spec {spec!r}")
    if n == 0:
        raise EmptyGraph(f"{spec!r} yields an empty graph")
    return from_edge_list(n, edges) if edges else SparseGraph(
        SparseMatrix.from_coo(n, n, [], [], []), symmetric=True
    )


# ---------------------------------------------------------------------
# derived matrices
# ---------------------------------------------------------------------


def degree_vector(g: SparseGraph) -> np.ndarray:
    """Weighted degrees, i.e. row sums of the adjacency."""
    a = g.adjacency
    deg = np.zeros(g.n)
    np.add.at(deg, a.row_index_of_entries(), a.values)
    return deg


def laplacian(g: SparseGraph) -> SparseMatrix:
    """Graph Laplacian L = D - A (symmetric positive semi-definite)."""
    if not g.symmetric:
        raise AsymmetricInput("laplacian requires a symmetric graph")
    rows, cols, vals = g.edge_arrays()
    deg = degree_vector(g)
    idx = np.arange(g.n)
    all_rows = np.concatenate([rows, idx])
    all_cols = np.concatenate([cols, idx])
    all_vals = np.concatenate([-vals, deg])
    return SparseMatrix.from_coo(g.n, g.n, all_rows, all_cols, all_vals)


def normalized_adjacency(g: SparseGraph, add_self_loops=False) -> SparseMatrix:
    """D^{-1/2} A D^{-1/2}, optionally of A + I (GCN convention)."""
    rows, cols, vals = g.edge_arrays()
    deg = degree_vector(g)
    if add_self_loops:
        deg = deg + 1.0
        idx = np.arange(g.n)
        rows = np.concatenate([rows, idx])
        cols = np.concatenate([cols, idx])
        vals = np.concatenate([vals, np.ones(g.n)])
    elif np.any(deg == 0):
        bad = int(np.flatnonzero(deg == 0)[0])
        raise IsolatedNode(f"node {bad} has degree 0 and self loops are off")
    inv_sqrt = 1.0 / np.sqrt(deg)
    scaled = vals * inv_sqrt[rows] * inv_sqrt[cols]
    return SparseMatrix.from_coo(g.n, g.n, rows, cols, scaled)


def estimate_top_eigenvalue(m: SparseMatrix, iters=50, seed=0) -> float:
    """Cheap top-eigenvalue estimate for a symmetric PSD matrix.

    Uses the one-shot quotient (1^T m^2 1) / (1^T m 1) when the
    denominator is nonzero; a Laplacian has zero row sums, so in that
    case we fall back to `iters` rounds of power iteration from a
    seeded random vector. Either way the result is a Rayleigh quotient
    and stays inside the spectral range.
    """
    if m.nnz == 0 or not np.any(m.values):
        raise ZeroMatrix("matrix has no nonzero entries")
    ones = np.ones(m.n_cols)
    m1 = m @ ones
    denom = float(m1.sum())
    if abs(denom) >= 1e-12:
        return float(m1 @ m1) / denom
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(m.n_cols)
    v /= np.linalg.norm(v)
    for _ in range(max(1, iters)):
        w = m @ v
        norm = np.linalg.norm(w)
        if norm == 0:
            return 0.0
        v = w / norm
    return float(v @ (m @ v))
