import numpy as np
import pytest

from graphflow.errors import DimensionMismatch, SingularSystem, UnsupportedProblem
from graphflow.graphs import SBM, Circle, Lattice2D, Tree, from_edge_list, generate
from graphflow.losses import (
    BoundaryCondition,
    HeatProblem,
    HopfKuramotoProblem,
    HopfParams,
    KuramotoProblem,
    heat_direct_solve,
    heat_eval,
    hessian_at_zero,
    hopf_kuramoto_eval,
    kuramoto_eval,
    order_parameter,
)
from graphflow.persistence import PersistenceProblem


def fd_gradient(f, w, step=1e-6):
    """Central finite differences of a scalar function of a flat array."""
    w = np.asarray(w, dtype=np.float64)
    grad = np.zeros_like(w)
    for i in range(len(w)):
        wp, wm = w.copy(), w.copy()
        wp[i] += step
        wm[i] -= step
        grad[i] = (f(wp) - f(wm)) / (2 * step)
    return grad


def fd_hessian(f, w, step=1e-4):
    n = len(w)
    h = np.zeros((n, n))
    for i in range(n):
        wp, wm = w.copy(), w.copy()
        wp[i] += step
        wm[i] -= step
        h[i] = (fd_gradient(f, wp, step) + -fd_gradient(f, wm, step)) / (2 * step)
    return (h + h.T) / 2


def rel_err(a, b):
    scale = max(np.abs(b).max(), 1e-12)
    return np.abs(a - b).max() / scale


EDGE = from_edge_list(2, [(0, 1, 1.0)])


# -- heat ---------------------------------------------------------------


def test_heat_trivial():
    loss, grad = heat_eval(EDGE, np.array([1.0, 0.0]), BoundaryCondition(()))
    assert loss == pytest.approx(0.5)
    assert np.allclose(grad, [1.0, -1.0])


def test_heat_constant_state_in_kernel():
    g = generate(Lattice2D(4, 4))
    loss, grad = heat_eval(g, np.full(g.n, 3.7), BoundaryCondition(()))
    assert abs(loss) < 1e-12
    assert np.abs(grad).max() < 1e-12


@pytest.mark.parametrize("exponent", [2, 4])
def test_heat_gradient_fd(exponent):
    g = generate(Lattice2D(5, 5))
    bc = BoundaryCondition(pinned=((0, 1.0), (7, -0.5), (24, 2.0)),
                           strength=10.0, exponent=exponent)
    problem = HeatProblem(g, bc)
    rng = np.random.default_rng(0)
    w = rng.standard_normal(g.n)
    _, grad = problem.evaluate(w)
    fd = fd_gradient(lambda x: problem.evaluate(x)[0], w)
    assert rel_err(grad, fd) < 1e-6


def test_heat_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        heat_eval(EDGE, np.ones(3), BoundaryCondition(()))


# -- kuramoto -----------------------------------------------------------


def test_kuramoto_trivial():
    loss, grad = kuramoto_eval(EDGE, np.zeros(2))
    assert loss == pytest.approx(-2.0)
    assert np.allclose(grad, 0.0)
    loss, grad = kuramoto_eval(EDGE, np.array([0.0, np.pi / 2]))
    assert loss == pytest.approx(0.0)
    assert np.allclose(grad, [-2.0, 2.0])


def test_kuramoto_gradient_fd():
    g = generate(Lattice2D(5, 5))
    problem = KuramotoProblem(g)
    rng = np.random.default_rng(1)
    w = rng.uniform(0, 2 * np.pi, g.n)
    _, grad = problem.evaluate(w)
    fd = fd_gradient(lambda x: problem.evaluate(x)[0], w)
    assert rel_err(grad, fd) < 1e-6


def test_kuramoto_phase_shift_invariance():
    g = generate(SBM((15, 15), 0.4, 0.1), seed=2)
    problem = KuramotoProblem(g)
    rng = np.random.default_rng(3)
    w = rng.uniform(0, 2 * np.pi, g.n)
    l1, g1 = problem.evaluate(w)
    l2, g2 = problem.evaluate(w + 11.3)
    assert abs(l1 - l2) < 1e-10
    assert np.allclose(g1, g2, atol=1e-9)


def test_kuramoto_loss_bounds():
    g = generate(Circle(10))
    problem = KuramotoProblem(g)
    total = g.adjacency.values.sum()
    rng = np.random.default_rng(4)
    for _ in range(20):
        loss, _ = problem.evaluate(rng.uniform(0, 2 * np.pi, g.n))
        assert -total - 1e-9 <= loss <= total + 1e-9


# -- hopf-kuramoto ------------------------------------------------------


def test_hopf_trivial():
    loss, _ = hopf_kuramoto_eval(EDGE, np.zeros(2), HopfParams(c=1, s1=1, s2=0))
    assert loss == pytest.approx(2.0)


def test_hopf_constant_state_zero_when_s1_s2_zero():
    g = generate(Lattice2D(4, 4))
    loss, _ = hopf_kuramoto_eval(g, np.full(g.n, 0.9), HopfParams(c=1, s1=0, s2=0))
    assert abs(loss) < 1e-12


def test_hopf_gradient_fd():
    g = generate(Lattice2D(6, 6))
    problem = HopfKuramotoProblem(g, HopfParams(c=1.0, s1=0.5, s2=0.3))
    rng = np.random.default_rng(5)
    w = rng.uniform(0, 2 * np.pi, g.n)
    _, grad = problem.evaluate(w)
    fd = fd_gradient(lambda x: problem.evaluate(x)[0], w)
    assert rel_err(grad, fd) < 1e-6


def test_hopf_triple_sum_identity_small():
    # brute-force evaluation of the literal triple sum on a small graph
    g = generate(Circle(6))
    a = g.adjacency.to_dense()
    hp = HopfParams(c=0.7, s1=0.4, s2=0.9)
    rng = np.random.default_rng(6)
    w = rng.uniform(0, 2 * np.pi, g.n)
    loss, _ = hopf_kuramoto_eval(g, w, hp)
    brute = 0.0
    for i in range(g.n):
        for j in range(g.n):
            d = w[i] - w[j]
            brute += hp.c * a[j, i] * (np.sin(d) + hp.s1 * np.cos(d))
    for i in range(g.n):
        for j in range(g.n):
            for k in range(g.n):
                dji, djk = w[j] - w[i], w[j] - w[k]
                brute += hp.s2 / 2 * a[i, j] * a[j, k] * (
                    np.cos(dji + djk) + np.cos(dji - djk))
    assert loss == pytest.approx(brute, rel=1e-10)


# -- hessians -----------------------------------------------------------


def test_heat_hessian_trivial():
    problem = HeatProblem(EDGE, BoundaryCondition(()))
    assert np.allclose(hessian_at_zero(problem).to_dense(), [[1, -1], [-1, 1]])


def test_heat_hessian_with_pins_fd():
    g = generate(Circle(8))
    for exponent in (2, 4):
        bc = BoundaryCondition(pinned=((1, 0.7), (5, -0.4)), strength=3.0,
                               exponent=exponent)
        problem = HeatProblem(g, bc)
        h = hessian_at_zero(problem).to_dense()
        fd = fd_hessian(lambda x: problem.evaluate(x)[0], np.zeros(g.n))
        assert rel_err(h, fd) < 1e-5
        assert np.allclose(h, h.T)


def test_kuramoto_hessian_is_2L():
    problem = KuramotoProblem(EDGE)
    h = hessian_at_zero(problem).to_dense()
    assert np.allclose(h, [[2, -2], [-2, 2]])
    fd = fd_hessian(lambda x: problem.evaluate(x)[0], np.zeros(2))
    assert rel_err(h, fd) < 1e-5


def test_hopf_hessian_fd():
    g = generate(Circle(6))
    problem = HopfKuramotoProblem(g, HopfParams(c=1.0, s1=1.0, s2=0.5))
    h = hessian_at_zero(problem).to_dense()
    fd = fd_hessian(lambda x: problem.evaluate(x)[0], np.zeros(g.n))
    assert rel_err(h, fd) < 1e-5
    assert np.allclose(h, h.T)


def test_hessian_unsupported_for_persistence():
    problem = PersistenceProblem(10, 1.0)
    with pytest.raises(UnsupportedProblem):
        hessian_at_zero(problem)


# -- order parameter ----------------------------------------------------


def test_order_parameter_values():
    assert order_parameter(np.full(7, 1.7)) == pytest.approx(1.0)
    assert order_parameter(np.array([0.0, np.pi])) == pytest.approx(0.0, abs=1e-12)
    assert order_parameter(np.array([0.0, np.pi / 2])) == pytest.approx(
        np.sqrt(2) / 2)


def test_order_parameter_range_and_wrap_invariance():
    rng = np.random.default_rng(7)
    for _ in range(50):
        w = rng.uniform(-10, 10, size=rng.integers(1, 40))
        rho = order_parameter(w)
        assert 0.0 <= rho <= 1.0
        assert order_parameter(w + 2 * np.pi) == pytest.approx(rho, abs=1e-12)


# -- direct solve -------------------------------------------------------


def test_direct_solve_both_pinned_same():
    bc = BoundaryCondition(pinned=((0, 5.0), (1, 5.0)), strength=1.0)
    w = heat_direct_solve(EDGE, bc)
    assert np.allclose(w, 5.0)


def test_direct_solve_hand_system():
    bc = BoundaryCondition(pinned=((0, 1.0),), strength=1.0)
    w = heat_direct_solve(EDGE, bc)
    assert np.allclose(w, 1.0)


def test_direct_solve_is_gradient_fixed_point():
    g = generate(Lattice2D(10, 10))
    rng = np.random.default_rng(8)
    nodes = rng.permutation(g.n)[:20]
    pins = tuple((int(i), 1.0) for i in nodes[:10]) + tuple(
        (int(i), 0.0) for i in nodes[10:])
    bc = BoundaryCondition(pinned=pins, strength=2.0)
    w = heat_direct_solve(g, bc)
    problem = HeatProblem(g, bc)
    _, grad = problem.evaluate(w)
    assert np.abs(grad).max() < 1e-7


def test_direct_solve_unpinned_component_rejected():
    g = from_edge_list(4, [(0, 1, 1.0), (2, 3, 1.0)])  # two components
    bc = BoundaryCondition(pinned=((0, 1.0),), strength=1.0)
    with pytest.raises(SingularSystem):
        heat_direct_solve(g, bc)


# -- descent property ---------------------------------------------------


def test_small_step_descent_non_increasing():
    rng = np.random.default_rng(9)
    g = generate(Lattice2D(5, 5))
    problems = [
        HeatProblem(g, BoundaryCondition(pinned=((0, 1.0), (24, 0.0)), strength=1.0)),
        KuramotoProblem(g),
        HopfKuramotoProblem(g, HopfParams(c=1.0, s1=0.5, s2=0.3)),
    ]
    for problem in problems:
        w = rng.uniform(0, 2 * np.pi, g.n)
        prev, grad = problem.evaluate(w)
        for _ in range(100):
            w = w - 1e-3 * grad
            loss, grad = problem.evaluate(w)
            assert loss <= prev + 1e-9
            prev = loss
