import numpy as np
import pytest

from graphflow.errors import DegenerateCloud
from graphflow.persistence import (
    PersistenceProblem,
    PointCloud,
    default_filtration,
    h0_diagram,
    persistence_loss,
    read_cloud_csv,
    rips_adjacency,
    sample_cloud,
    write_cloud_csv,
)


def prim_mst_weights(pos):
    """Independent Prim implementation over the complete distance graph."""
    n = len(pos)
    d = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=2)
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = d[0].copy()
    best[0] = np.inf
    weights = []
    for _ in range(n - 1):
        j = int(np.argmin(np.where(in_tree, np.inf, best)))
        weights.append(best[j])
        in_tree[j] = True
        best = np.minimum(best, d[j])
    return np.sort(np.array(weights))


def test_two_points():
    pc = PointCloud(positions=np.array([[0.0, 0.0], [3.0, 0.0]]), range_r=5.0)
    diagram = h0_diagram(pc)
    assert len(diagram) == 2
    assert diagram.finite_deaths.tolist() == [3.0]
    assert sum(1 for _, d, _ in diagram.features if np.isinf(d)) == 1


def test_collinear_points():
    pc = PointCloud(positions=np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]))
    assert sorted(h0_diagram(pc).finite_deaths.tolist()) == [1.0, 2.0]


def test_diagram_brute_force_kruskal_oracle():
    rng = np.random.default_rng(0)
    pc = PointCloud(positions=rng.uniform(-1, 1, (10, 2)), range_r=1.0)
    deaths = np.sort(h0_diagram(pc).finite_deaths)
    assert np.allclose(deaths, prim_mst_weights(pc.positions), atol=1e-12)


def test_diagram_size_and_total_weight():
    rng = np.random.default_rng(1)
    for n in (2, 17, 60, 200):
        pc = PointCloud(positions=rng.uniform(-2, 2, (n, 2)), range_r=2.0)
        diagram = h0_diagram(pc)
        assert len(diagram) == n
        assert np.isclose(diagram.finite_deaths.sum(),
                          prim_mst_weights(pc.positions).sum(), atol=1e-9)


def test_diagram_rigid_motion_invariance():
    rng = np.random.default_rng(2)
    pos = rng.uniform(-1, 1, (40, 2))
    theta = 0.83
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    moved = pos @ rot.T + np.array([3.0, -1.5])
    d1 = np.sort(h0_diagram(PointCloud(pos)).finite_deaths)
    d2 = np.sort(h0_diagram(PointCloud(moved)).finite_deaths)
    assert np.allclose(d1, d2, atol=1e-9)


def test_loss_two_points():
    pc = PointCloud(positions=np.array([[0.0, 0.0], [2.0, 0.0]]), range_r=10.0)
    loss, grad = persistence_loss(pc)
    assert loss == pytest.approx(-1.0)
    assert np.allclose(grad[1], [-1.0, 0.0])
    assert np.allclose(grad[0], [1.0, 0.0])


def test_loss_single_point():
    pc = PointCloud(positions=np.zeros((1, 2)), range_r=1.0)
    loss, grad = persistence_loss(pc)
    assert loss == 0.0
    assert np.allclose(grad, 0.0)


def test_box_penalty_active_outside():
    pc = PointCloud(positions=np.array([[0.0, 0.0], [3.0, 0.5]]), range_r=1.0)
    loss, grad = persistence_loss(pc)
    d = np.hypot(3.0, 0.5)
    assert loss == pytest.approx(-((d / 2) ** 2) + (3.0 - 1.0) ** 2)
    # hinge acts on the sup-norm coordinate only
    assert grad[1][1] != 0.0  # topological part moves y too
    assert grad[1][0] == pytest.approx(-(3.0 - 0.0) / 2 + 2 * (3.0 - 1.0))


def test_degenerate_cloud_reported():
    pc = PointCloud(positions=np.array([[1.0, 1.0], [1.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(DegenerateCloud):
        persistence_loss(pc)


def mst_is_unique(pos, tol=1e-9):
    """Crude uniqueness check: all pairwise distances distinct."""
    d = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=2)
    iu = np.triu_indices(len(pos), k=1)
    vals = np.sort(d[iu])
    return np.all(np.diff(vals) > tol)


def test_loss_gradient_fd_oracle():
    rng = np.random.default_rng(3)
    pos = rng.uniform(-1.5, 1.5, (50, 2))
    assert mst_is_unique(pos)
    pc = PointCloud(positions=pos, range_r=2.0)
    problem = PersistenceProblem(50, 2.0)
    _, grad = problem.evaluate(pos)
    step = 1e-6
    fd = np.zeros_like(pos)
    for i in range(50):
        for k in range(2):
            up, dn = pos.copy(), pos.copy()
            up[i, k] += step
            dn[i, k] -= step
            fd[i, k] = (problem.evaluate(up)[0] - problem.evaluate(dn)[0]) / (2 * step)
    scale = np.abs(fd).max()
    assert np.abs(grad - fd).max() / scale < 1e-5


def test_loss_decreases_under_small_step():
    rng = np.random.default_rng(4)
    for trial in range(20):
        pos = rng.uniform(-1, 1, (25, 2))
        if not mst_is_unique(pos):
            continue
        pc = PointCloud(positions=pos, range_r=1.5)
        loss, grad = persistence_loss(pc)
        loss2, _ = persistence_loss(PointCloud(pos - 1e-4 * grad, range_r=1.5))
        assert loss2 < loss + 1e-12


def test_rips_adjacency():
    pts = np.array([[0.0, 0.0], [1.0, 0.0]])
    assert rips_adjacency(PointCloud(pts), 2.0).n_edges == 1
    assert rips_adjacency(PointCloud(pts), 0.5).n_edges == 0


def test_rips_brute_force_oracle():
    rng = np.random.default_rng(5)
    pc = PointCloud(positions=rng.uniform(-1, 1, (100, 2)), range_r=1.0)
    eps = default_filtration(pc)
    g = rips_adjacency(pc, eps)
    dense = np.zeros((100, 100))
    for i in range(100):
        for j in range(i + 1, 100):
            if np.linalg.norm(pc.positions[i] - pc.positions[j]) <= eps:
                dense[i, j] = dense[j, i] = 1.0
    assert np.array_equal(g.adjacency.to_dense(), dense)
    d = np.linalg.norm(pc.positions[:, None] - pc.positions[None], axis=2)
    nz = d[np.triu_indices(100, k=1)]
    assert eps == pytest.approx(0.5 * (nz.min() + nz.max()))


def test_cloud_csv_roundtrip(tmp_path):
    cloud = sample_cloud(30, 2.0, seed=6)
    path = tmp_path / "cloud.csv"
    write_cloud_csv(cloud, path)
    loaded = read_cloud_csv(path, range_r=2.0)
    assert np.allclose(loaded.positions, cloud.positions)
    assert path.read_text(encoding="utf-8").splitlines()[0] == "x,y"
