"""Parameter-update rules for tensor bundles.

A bundle is a dict of named float arrays (a raw state is a one-entry
bundle); the same `step` drives both plain states and GCN parameter
sets. The full-matrix kind keeps the discounted gradient outer-product
G and preconditions with (G + xi I)^{-1/2}; it is a dense diagnostics
path capped at 500 parameters.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatch, SizeLimit, UninitializedState

_KINDS = ("sgd", "adam", "rmsprop", "adagrad", "full_matrix")
_FULL_MATRIX_CAP = 500


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "adam"
    learning_rate: float = 0.01
    epsilon: float = 1e-8
    beta1: float = 0.9
    beta2: float = 0.999
    decay: float = 0.9
    gamma: float = 1.0          # discount for the full-matrix accumulator
    window: int | None = None   # normalization window for read_G diagnostics

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ShapeMismatch(f"unknown optimizer kind {self.kind!r}")
        if self.learning_rate <= 0:
            raise ShapeMismatch("learning rate must be positive")
        if not 0 < self.epsilon < 1:
            raise ShapeMismatch("epsilon must be in (0, 1)")
        for name in ("beta1", "beta2", "decay"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ShapeMismatch(f"{name} must be in (0, 1)")
        if not 0 < self.gamma <= 1:
            raise ShapeMismatch("gamma must be in (0, 1]")


@dataclass
class OptimizerState:
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    g_mat: np.ndarray | None = None
    g_steps: int = 0
    g_version: int = 0
    _precond: np.ndarray | None = None
    _precond_version: int = -1
    _precond_xi: float | None = None


def init_state(cfg: OptimizerConfig, params: dict) -> OptimizerState:
    state = OptimizerState()
    if cfg.kind == "adam":
        state.m = {k: np.zeros_like(p) for k, p in params.items()}
    if cfg.kind in ("adam", "rmsprop", "adagrad"):
        state.v = {k: np.zeros_like(p) for k, p in params.items()}
    if cfg.kind == "full_matrix":
        size = sum(p.size for p in params.values())
        if size > _FULL_MATRIX_CAP:
            raise SizeLimit(f"full-matrix optimizer capped at {_FULL_MATRIX_CAP} parameters")
        state.g_mat = np.zeros((size, size))
    return state


def _check(state, params, grads, need):
    if set(params) != set(grads):
        raise ShapeMismatch("params and grads have different keys")
    for k in params:
        if params[k].shape != grads[k].shape:
            raise ShapeMismatch(f"shape mismatch for {k}")
    for attr in need:
        slot = getattr(state, attr)
        if set(slot) != set(params):
            raise UninitializedState(f"state not initialized for this bundle ({attr})")
        for k in params:
            if slot[k].shape != params[k].shape:
                raise UninitializedState(f"state shape mismatch for {k}")


def step(cfg: OptimizerConfig, state: OptimizerState, params: dict, grads: dict):
    """One in-place update of the bundle; returns (state, params)."""
    eta, xi = cfg.learning_rate, cfg.epsilon
    if cfg.kind == "sgd":
        _check(state, params, grads, ())
        state.t += 1
        for k in params:
            params[k] -= eta * grads[k]
        return state, params
    if cfg.kind == "adam":
        _check(state, params, grads, ("m", "v"))
        state.t += 1
        b1, b2, t = cfg.beta1, cfg.beta2, state.t
        for k in params:
            g = grads[k]
            state.m[k] = b1 * state.m[k] + (1 - b1) * g
            state.v[k] = b2 * state.v[k] + (1 - b2) * g * g
            m_hat = state.m[k] / (1 - b1**t)
            v_hat = state.v[k] / (1 - b2**t)
            params[k] -= eta * m_hat / (np.sqrt(v_hat) + xi)
        return state, params
    if cfg.kind == "rmsprop":
        _check(state, params, grads, ("v",))
        state.t += 1
        for k in params:
            g = grads[k]
            state.v[k] = cfg.decay * state.v[k] + (1 - cfg.decay) * g * g
            params[k] -= eta * g / (np.sqrt(state.v[k]) + xi)
        return state, params
    if cfg.kind == "adagrad":
        _check(state, params, grads, ("v",))
        state.t += 1
        for k in params:
            g = grads[k]
            state.v[k] = state.v[k] + g * g
            params[k] -= eta * g / (np.sqrt(state.v[k]) + xi)
        return state, params
    # full matrix: accumulate then precondition; single flat vector only
    if state.g_mat is None:
        raise UninitializedState("full-matrix state not initialized")
    keys = sorted(params)
    flat_g = np.concatenate([grads[k].ravel() for k in keys])
    flat_p = np.concatenate([params[k].ravel() for k in keys])
    if flat_g.size != state.g_mat.shape[0]:
        raise ShapeMismatch("bundle size does not match accumulator")
    state.t += 1
    accumulate_G(state, flat_g, cfg.gamma)
    flat_p = full_matrix_step(state, flat_p, flat_g, eta, xi)
    off = 0
    for k in keys:
        size = params[k].size
        params[k][...] = flat_p[off:off + size].reshape(params[k].shape)
        off += size
    return state, params


def accumulate_G(state: OptimizerState, g, gamma) -> OptimizerState:
    """G <- gamma * G + g g^T (window normalization applied at read time)."""
    g = np.asarray(g, dtype=np.float64).ravel()
    if len(g) > _FULL_MATRIX_CAP:
        raise SizeLimit(f"full-matrix accumulator capped at {_FULL_MATRIX_CAP}")
    if state.g_mat is None:
        state.g_mat = np.zeros((len(g), len(g)))
    if state.g_mat.shape[0] != len(g):
        raise ShapeMismatch("gradient size does not match accumulator")
    state.g_mat = gamma * state.g_mat + np.outer(g, g)
    state.g_steps += 1
    state.g_version += 1
    return state


def read_G(state: OptimizerState, window=None) -> np.ndarray:
    """The E[gg^T] estimate: the accumulated G with its window
    normalization (all steps by default) applied at read time."""
    if state.g_mat is None or state.g_steps == 0:
        raise UninitializedState("no gradients accumulated")
    norm = state.g_steps if window is None else min(state.g_steps, window)
    return state.g_mat / norm


def full_matrix_step(state: OptimizerState, params, g, eta, xi):
    """p <- p - eta (G + xi I)^{-1/2} g via a cached eigendecomposition.

    G here is the raw accumulated sum, matching the unnormalized sum the
    diagonal AdaGrad rule uses, so step sizes anneal as history grows.
    xi > 0 makes G + xi I positive definite; xi = 0 degrades to the
    pseudo-inverse root on the accumulated subspace.
    """
    if state.g_mat is None or state.g_steps == 0:
        raise UninitializedState("no gradients accumulated")
    if state._precond_version != state.g_version or state._precond_xi != xi:
        vals, vecs = np.linalg.eigh(state.g_mat)
        vals = np.maximum(vals, 0.0) + xi
        cutoff = 1e-12 * max(vals.max(), 1.0)
        inv_sqrt = np.zeros_like(vals)
        ok = vals > cutoff
        inv_sqrt[ok] = vals[ok] ** -0.5
        state._precond = (vecs * inv_sqrt) @ vecs.T
        state._precond_version = state.g_version
        state._precond_xi = xi
    params = np.asarray(params, dtype=np.float64)
    return params - eta * (state._precond @ g)
