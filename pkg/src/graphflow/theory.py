"""Dense diagnostics for the reparametrization theory.

These routines verify, at small scale, the identities that motivate the
GCN construction: the fourth-root-inverse Jacobian, the induced kernel
K = J eps J^T, the loss-drop rate -Tr[M K^T], and the Gaussian-init
estimate of the gradient outer-product G ~ sigma^2 H^2 (the usual
H^2 / n when sigma = n^{-1/2}). Everything here is O(n^3) dense and
capped at n = 500; the production path never calls it.
"""

import numpy as np

from .errors import (
    InsufficientSamples,
    NotPSD,
    ShapeMismatch,
    SizeLimit,
    UnsupportedProblem,
)

_DENSE_CAP = 500


def ideal_jacobian_dense(g_mat, clamp=1e-8) -> np.ndarray:
    """Canonical symmetric PSD fourth-root inverse J = (G / lam_max)^{-1/4}.

    Eigenvalues of G / lam_max below `clamp` are clamped to it, so J is
    finite on the null space; on the rest J^T J = (G / lam_max)^{-1/2}.
    """
    g_mat = np.asarray(g_mat, dtype=np.float64)
    n = g_mat.shape[0]
    if g_mat.shape != (n, n):
        raise ShapeMismatch(f"G must be square, got {g_mat.shape}")
    if n > _DENSE_CAP:
        raise SizeLimit(f"dense diagnostics capped at n = {_DENSE_CAP}")
    if not np.allclose(g_mat, g_mat.T, atol=1e-10):
        raise ShapeMismatch("G must be symmetric")
    vals, vecs = np.linalg.eigh((g_mat + g_mat.T) / 2.0)
    if vals.min() < -1e-8:
        raise NotPSD(f"min eigenvalue {vals.min():.3e}")
    lam_max = vals.max()
    if lam_max <= 0:
        raise NotPSD("G has no positive eigenvalue")
    normalized = np.maximum(vals / lam_max, clamp)
    return (vecs * normalized**-0.25) @ vecs.T


def ntk_linear(jac, eps_hat) -> np.ndarray:
    """Linear-reparametrization tangent kernel K = J diag(eps) J^T.

    `jac` is dw/dtheta with rows indexed by the state entries (n x m);
    `eps_hat` the per-parameter learning rates (length m, nonnegative).
    """
    jac = np.asarray(jac, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64).ravel()
    if jac.ndim != 2 or jac.shape[1] != len(eps_hat):
        raise ShapeMismatch(f"J {jac.shape} vs eps_hat {eps_hat.shape}")
    if np.any(eps_hat < 0):
        raise ShapeMismatch("eps_hat must be nonnegative")
    return (jac * eps_hat) @ jac.T


def rate_of_loss_drop(m_mat, k_mat) -> float:
    """dL/dt = -Tr[M K^T] for square gradients M and kernel K."""
    m_mat = np.asarray(m_mat, dtype=np.float64)
    k_mat = np.asarray(k_mat, dtype=np.float64)
    if m_mat.shape != k_mat.shape or m_mat.ndim != 2 or m_mat.shape[0] != m_mat.shape[1]:
        raise ShapeMismatch(f"M {m_mat.shape} vs K {k_mat.shape}")
    return -float(np.sum(m_mat * k_mat))


def estimate_G_at_init(problem, samples, sigma=None, seed=0):
    """Monte-Carlo estimate of G = E[grad grad^T] at a Gaussian init.

    Draws `samples` states with i.i.d. N(0, sigma) entries (sigma
    defaults to n^{-1/2}, the normalized-vector initialization) and
    averages the gradient outer products. Returns (G_mc, prediction)
    where prediction = sigma^2 H^2 from the analytic Hessian at zero;
    at the default sigma this is the H^2 / n early-stage estimate. The
    prediction drops higher-order terms, so it is accurate in the
    quadratic regime (sigma small against the loss curvature scale).
    """
    if samples <= 0:
        raise InsufficientSamples("need at least one sample")
    if getattr(problem, "d", 1) != 1:
        raise UnsupportedProblem("G estimate requires a scalar per-node state")
    try:
        hess = problem.hessian_at_zero()
    except (AttributeError, UnsupportedProblem) as exc:
        raise UnsupportedProblem(f"no Hessian at zero: {exc}") from exc
    n = problem.n
    if n > _DENSE_CAP:
        raise SizeLimit(f"dense diagnostics capped at n = {_DENSE_CAP}")
    if sigma is None:
        sigma = n**-0.5
    rng = np.random.default_rng(seed)
    grads = np.empty((samples, n))
    for s in range(samples):
        w = rng.normal(0.0, sigma, size=n)
        _, grad = problem.evaluate(w)
        grads[s] = grad.reshape(-1)
    g_mc = grads.T @ grads / samples
    h_dense = hess.to_dense()
    prediction = sigma**2 * (h_dense @ h_dense)
    return g_mc, prediction
