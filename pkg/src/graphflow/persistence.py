"""H0 persistent homology of 2-D point clouds and the topological loss.

For the distance filtration of a point cloud, the connected-component
(H0) features all have birth 0 and their finite death values are exactly
the edge weights of the Euclidean minimum spanning tree; we compute them
with Kruskal's algorithm over the complete distance graph plus a
union-find. One feature per point, including a single infinite one.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateCloud, DimensionMismatch, FileError, UnsupportedProblem
from .graphs import SparseGraph, from_edge_list
from .sparse import SparseMatrix


@dataclass(frozen=True)
class PointCloud:
    positions: np.ndarray  # (n, 2)
    range_r: float = 1.0

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise DimensionMismatch(f"positions must be (n, 2), got {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise DimensionMismatch("non-finite point coordinates")
        if self.range_r <= 0:
            raise DimensionMismatch("range must be positive")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def n(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class PersistenceDiagram:
    """H0 features as (birth, death, edge) with one infinite feature."""

    features: tuple

    @property
    def finite_deaths(self) -> np.ndarray:
        return np.array([d for _, d, _ in self.features if np.isfinite(d)])

    @property
    def finite_edges(self):
        return [e for _, d, e in self.features if np.isfinite(d)]

    def __len__(self):
        return len(self.features)


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, k):
        root = k
        while root != self.parent[root]:
            root = self.parent[root]
        while k != root:
            self.parent[k], k = root, self.parent[k]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


def _pairwise(pos):
    iu, ju = np.triu_indices(len(pos), k=1)
    d = np.linalg.norm(pos[iu] - pos[ju], axis=1)
    return iu, ju, d


def h0_diagram(pc: PointCloud) -> PersistenceDiagram:
    """H0 diagram: one (0, mst edge weight, edge) per MST edge plus the
    infinite component. Ties are broken lexicographically by edge index."""
    n = pc.n
    features = []
    if n > 1:
        iu, ju, d = _pairwise(pc.positions)
        order = np.lexsort((ju, iu, d))
        uf = _UnionFind(n)
        found = 0
        for k in order:
            i, j = int(iu[k]), int(ju[k])
            if uf.union(i, j):
                features.append((0.0, float(d[k]), (i, j)))
                found += 1
                if found == n - 1:
                    break
    features.append((0.0, np.inf, None))
    return PersistenceDiagram(features=tuple(features))


def persistence_loss(pc: PointCloud, box_weight=1.0):
    """Topological point-cloud loss and its (sub)gradient.

    loss = -sum over finite features ((death - birth)/2)^2
           + box_weight * sum_i max(0, ||w_i||_inf - r)^2

    The first term rewards long-lived components (for H0, births are 0
    so it is -sum (death/2)^2); the hinge keeps points inside the square
    of half-width r centered at the origin. The gradient routes each
    death along its MST edge; exactly coincident points make the
    diagram nondifferentiable and are reported, not perturbed.
    """
    n = pc.n
    pos = pc.positions
    grad = np.zeros_like(pos)
    loss = 0.0
    if n > 1:
        diagram = h0_diagram(pc)
        deaths = diagram.finite_deaths
        if np.any(deaths == 0.0):
            raise DegenerateCloud("two points coincide exactly")
        loss -= float(np.sum((deaths / 2.0) ** 2))
        for death, (i, j) in zip(deaths, diagram.finite_edges):
            # d(-(|wi-wj|/2)^2)/dwi = -(wi-wj)/2
            half = (pos[i] - pos[j]) / 2.0
            grad[i] -= half
            grad[j] += half
    # box hinge on the sup norm
    absw = np.abs(pos)
    m = absw.max(axis=1)
    over = m - pc.range_r
    active = over > 0
    if np.any(active):
        loss += box_weight * float(np.sum(over[active] ** 2))
        k = np.argmax(absw[active], axis=1)
        rows = np.flatnonzero(active)
        grad[rows, k] += (
            2.0 * box_weight * over[active] * np.sign(pos[rows, k])
        )
    return loss, grad


def rips_adjacency(pc: PointCloud, eps_filt: float) -> SparseGraph:
    """Unit-weight graph connecting points within distance eps_filt."""
    if eps_filt <= 0:
        raise DimensionMismatch("filtration value must be positive")
    iu, ju, d = _pairwise(pc.positions)
    mask = d <= eps_filt
    edges = [(int(i), int(j), 1.0) for i, j in zip(iu[mask], ju[mask])]
    if not edges:
        return SparseGraph(SparseMatrix.from_coo(pc.n, pc.n, [], [], []))
    return from_edge_list(pc.n, edges)


def default_filtration(pc: PointCloud) -> float:
    """Midpoint of the min and max nonzero pairwise distances."""
    _, _, d = _pairwise(pc.positions)
    nz = d[d > 0]
    if not len(nz):
        raise DegenerateCloud("all points coincide")
    return 0.5 * (float(nz.min()) + float(nz.max()))


class PersistenceProblem:
    """Point-cloud optimization problem (state shape (n, 2))."""

    d = 2
    is_phase = False

    def __init__(self, n, range_r, box_weight=1.0):
        self.n = int(n)
        self.range_r = float(range_r)
        self.box_weight = float(box_weight)

    def evaluate(self, w):
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (self.n, 2):
            raise DimensionMismatch(f"state shape {w.shape}, expected ({self.n}, 2)")
        pc = PointCloud(positions=w, range_r=self.range_r)
        return persistence_loss(pc, box_weight=self.box_weight)

    def hessian_at_zero(self):
        raise UnsupportedProblem("persistence loss is nonsmooth; no Hessian")


def sample_cloud(n, range_r, seed) -> PointCloud:
    """Uniform random cloud in the square of half-width range_r."""
    rng = np.random.default_rng(seed)
    pos = rng.uniform(-range_r, range_r, size=(n, 2))
    return PointCloud(positions=pos, range_r=range_r)


def read_cloud_csv(path, range_r=1.0) -> PointCloud:
    try:
        lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    except OSError as exc:
        raise FileError(f"cannot read point cloud {path}: {exc}") from exc
    if not lines or lines[0].strip().lower().replace(" ", "") != "x,y":
        raise FileError(f"{path}: expected header 'x,y'")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 2:
            raise FileError(f"{path}:{lineno}: expected two columns")
        rows.append((float(parts[0]), float(parts[1])))
    return PointCloud(positions=np.array(rows), range_r=range_r)


def write_cloud_csv(pc: PointCloud, path):
    lines = ["x,y"] + [f"{x:.17g},{y:.17g}" for x, y in pc.positions]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
