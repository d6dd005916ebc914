"""Graph-convolutional reparametrization of the optimization state.

The model maps trainable parameters theta = {G_0, W^(k), W, b} to a
state w of shape (n, d):

    G_k = act(f(A) G_{k-1} W^(k))   (+ G_{k-1} with residual connections)
    w   = squash(concat(G_0, ..., G_l) W + b)

where f(A) is a fixed propagation operator built from the graph. Forward
caches activations; backward computes exact reverse-mode gradients of
all trainables given dL/dw.
"""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FileError, NoCachedForward, ShapeMismatch, ZeroMatrix
from .graphs import SparseGraph, estimate_top_eigenvalue, normalized_adjacency
from .sparse import SparseMatrix

# Maclaurin coefficients of (1 - u)^(-1/2)
_BINOM_COEFFS = (1.0, 0.5, 0.375, 0.3125)


# ---------------------------------------------------------------------
# propagation rules
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class NormAdj:
    """Symmetric normalized adjacency of A + I (the standard GCN rule)."""


@dataclass(frozen=True)
class IMinusAs:
    """I - A_s: the degree-normalized Hessian surrogate."""


@dataclass(frozen=True)
class AsSquared:
    """Two-hop rule A_s^2 (or raw A^2 when raw is set)."""

    raw: bool = False


@dataclass(frozen=True)
class BinomialInvSqrt:
    """Truncated binomial series for H^{-1/2}, applied matrix-free."""

    q: int = 2
    xi: float = 0.01

    def __post_init__(self):
        if self.q not in (1, 2, 3):
            raise ShapeMismatch("binomial order q must be 1, 2 or 3")
        if not 0 < self.xi < 0.1:
            raise ShapeMismatch("xi must be in (0, 0.1)")


PropagationRule = NormAdj | IMinusAs | AsSquared | BinomialInvSqrt


def propagation_matrix(g: SparseGraph, rule) -> SparseMatrix:
    """Materialize the propagation matrix for a rule.

    BinomialInvSqrt is never materialized (it is applied as chained
    sparse products at forward time); ask for its operator via
    build_propagation instead.
    """
    if isinstance(rule, NormAdj):
        return normalized_adjacency(g, add_self_loops=True)
    if isinstance(rule, IMinusAs):
        a_s = normalized_adjacency(g, add_self_loops=False)
        return SparseMatrix.identity(g.n).add(a_s, beta=-1.0)
    if isinstance(rule, AsSquared):
        base = g.adjacency if rule.raw else normalized_adjacency(g, add_self_loops=False)
        return base.matmul_sparse(base)
    if isinstance(rule, BinomialInvSqrt):
        raise ValueError("BinomialInvSqrt is matrix-free; use build_propagation")
    raise TypeError(f"unknown propagation rule {rule!r}")


def binomial_inv_sqrt_apply(h_norm: SparseMatrix, x, q) -> np.ndarray:
    """Apply the q-term binomial approximation of h_norm^{-1/2} to x.

    Computes sum_{m=0}^{q} c_m (I - h_norm)^m x with c = (1, 1/2, 3/8,
    5/16), as q chained sparse products; h_norm must be symmetric with
    spectrum in (0, 1] for the series to make sense (caller-checked).
    """
    if q < 0 or q > 3:
        raise ShapeMismatch("binomial order q must be in 0..3")
    x = np.asarray(x, dtype=np.float64)
    acc = _BINOM_COEFFS[0] * x
    term = x
    for m in range(1, q + 1):
        term = term - h_norm @ term  # (I - H) term
        acc = acc + _BINOM_COEFFS[m] * term
    return acc


class _MatrixOp:
    def __init__(self, matrix: SparseMatrix):
        self.matrix = matrix
        self._t = matrix if matrix.is_symmetric() else matrix.transpose()

    def apply(self, x):
        return self.matrix @ x

    def apply_t(self, x):
        return self._t @ x


class _BinomialOp:
    """q-term series in (I - H) with H = (1 - xi) (I - A_s) / lam_est."""

    def __init__(self, g: SparseGraph, rule: BinomialInvSqrt):
        a_s = normalized_adjacency(g, add_self_loops=False)
        base = SparseMatrix.identity(g.n).add(a_s, beta=-1.0)
        try:
            lam = estimate_top_eigenvalue(base, iters=50, seed=0)
        except ZeroMatrix:
            lam = 1.0
        lam = max(lam, 1e-12)
        self.h_norm = base.scale((1.0 - rule.xi) / lam)
        self.q = rule.q

    def apply(self, x):
        return binomial_inv_sqrt_apply(self.h_norm, x, self.q)

    apply_t = apply  # symmetric


def build_propagation(g: SparseGraph, rule):
    """Propagation operator with apply / apply_t for forward and backward."""
    if isinstance(rule, BinomialInvSqrt):
        return _BinomialOp(g, rule)
    return _MatrixOp(propagation_matrix(g, rule))


# ---------------------------------------------------------------------
# output squashes
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class PhaseSigmoid:
    """w = 2 pi * sigmoid(y): keeps phases inside (0, 2 pi)."""

    def apply(self, y):
        s = 1.0 / (1.0 + np.exp(-y))
        return 2.0 * np.pi * s, s

    def derivative(self, aux):
        return 2.0 * np.pi * aux * (1.0 - aux)


@dataclass(frozen=True)
class Identity:
    def apply(self, y):
        return y, None

    def derivative(self, aux):
        return 1.0


@dataclass(frozen=True)
class Affine:
    scale: float = 1.0
    offset: float = 0.0

    def apply(self, y):
        return self.scale * y + self.offset, None

    def derivative(self, aux):
        return self.scale


Squash = PhaseSigmoid | Identity | Affine


# ---------------------------------------------------------------------
# the model
# ---------------------------------------------------------------------


class GcnModel:
    """Trainable reparametrization w(theta) for a fixed graph.

    Parameters live in ``params``: "g0" (n, h), "w1".."wl" (h, h),
    "proj" ((l+1)h, d) in full-concat mode or (h, d) in last-only mode,
    and "bias" (d,). ``activation_slope`` is the leaky-rectifier slope
    (1.0 makes the activation linear).
    """

    def __init__(self, n, d, hidden, layers, propagation, squash,
                 residual=False, concat="full", activation_slope=0.01):
        if layers not in (1, 2, 3):
            raise ShapeMismatch("layers must be 1, 2 or 3")
        if concat not in ("full", "last"):
            raise ShapeMismatch("concat must be 'full' or 'last'")
        self.n, self.d, self.hidden, self.layers = n, d, hidden, layers
        self.propagation = propagation
        self.squash = squash
        self.residual = residual
        self.concat = concat
        self.activation_slope = activation_slope
        proj_rows = hidden * (layers + 1) if concat == "full" else hidden
        self.params = {
            "g0": np.zeros((n, hidden)),
            **{f"w{k}": np.zeros((hidden, hidden)) for k in range(1, layers + 1)},
            "proj": np.zeros((proj_rows, d)),
            "bias": np.zeros(d),
        }
        self._cache = None

    @property
    def parameter_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def initialize(self, seed, phase_input=False):
        """Seeded init: weights ~ N(0, 1/sqrt(fan_in)); the input
        embedding is Uniform(0, 2 pi) for phase problems."""
        rng = np.random.default_rng(seed)
        h = self.hidden
        if phase_input:
            self.params["g0"][:] = rng.uniform(0.0, 2.0 * np.pi, size=(self.n, h))
        else:
            self.params["g0"][:] = rng.normal(0.0, h**-0.5, size=(self.n, h))
        for k in range(1, self.layers + 1):
            self.params[f"w{k}"][:] = rng.normal(0.0, h**-0.5, size=(h, h))
        proj = self.params["proj"]
        proj[:] = rng.normal(0.0, proj.shape[0] ** -0.5, size=proj.shape)
        self.params["bias"][:] = 0.0
        self._cache = None
        return self

    def _act(self, x):
        return np.where(x > 0, x, self.activation_slope * x)

    def _act_grad(self, x):
        return np.where(x > 0, 1.0, self.activation_slope)

    def forward(self) -> np.ndarray:
        p = self.params
        gs = [p["g0"]]
        ms, ss = [], []
        for k in range(1, self.layers + 1):
            m = self.propagation.apply(gs[-1])
            s = m @ p[f"w{k}"]
            g = self._act(s)
            if self.residual:
                g = g + gs[-1]
            ms.append(m)
            ss.append(s)
            gs.append(g)
        z = np.concatenate(gs, axis=1) if self.concat == "full" else gs[-1]
        y = z @ p["proj"] + p["bias"]
        w, aux = self.squash.apply(y)
        self._cache = {"gs": gs, "ms": ms, "ss": ss, "z": z, "y": y, "aux": aux}
        return w

    def backward(self, grad_w) -> dict:
        """Exact gradients of all trainables given dL/dw of the last forward."""
        if self._cache is None:
            raise NoCachedForward("backward called before forward")
        grad_w = np.asarray(grad_w, dtype=np.float64)
        if grad_w.shape != (self.n, self.d):
            raise ShapeMismatch(f"grad_w shape {grad_w.shape}, expected {(self.n, self.d)}")
        c = self._cache
        p = self.params
        h = self.hidden
        dy = grad_w * self.squash.derivative(c["aux"])
        grads = {
            "proj": c["z"].T @ dy,
            "bias": dy.sum(axis=0),
        }
        dz = dy @ p["proj"].T
        if self.concat == "full":
            dgc = [dz[:, k * h:(k + 1) * h] for k in range(self.layers + 1)]
        else:
            dgc = [np.zeros((self.n, h)) for _ in range(self.layers)] + [dz]
        dg = dgc[self.layers]
        for k in range(self.layers, 0, -1):
            ds = dg * self._act_grad(c["ss"][k - 1])
            grads[f"w{k}"] = c["ms"][k - 1].T @ ds
            dm = ds @ p[f"w{k}"].T
            dg_prev = self.propagation.apply_t(dm)
            if self.residual:
                dg_prev = dg_prev + dg
            dg = dgc[k - 1] + dg_prev
        grads["g0"] = dg
        return grads

    def set_params(self, bundle):
        for key, value in bundle.items():
            if key not in self.params or self.params[key].shape != value.shape:
                raise ShapeMismatch(f"bad parameter {key}")
            self.params[key][:] = value
        self._cache = None


# ---------------------------------------------------------------------
# checkpoints: little-endian binary key/value tensors with shape headers
# ---------------------------------------------------------------------

_MAGIC = b"GCNPARAM"


def save_checkpoint(model: GcnModel, path):
    """Write all tensors as `name / ndim / dims / float64 LE data` records."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(model.params)))
        for name in sorted(model.params):
            arr = np.ascontiguousarray(model.params[name], dtype="<f8")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}q", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(model: GcnModel, path):
    """Load a checkpoint written by save_checkpoint into the model."""
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise FileError(f"cannot read checkpoint {path}: {exc}") from exc
    if blob[: len(_MAGIC)] != _MAGIC:
        raise FileError(f"{path}: not a checkpoint file")
    off = len(_MAGIC)
    (count,) = struct.unpack_from("<I", blob, off)
    off += 4
    bundle = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<I", blob, off)
        off += 4
        name = blob[off:off + nlen].decode("utf-8")
        off += nlen
        (ndim,) = struct.unpack_from("<I", blob, off)
        off += 4
        shape = struct.unpack_from(f"<{ndim}q", blob, off)
        off += 8 * ndim
        size = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(blob, dtype="<f8", count=size, offset=off).reshape(shape)
        off += 8 * size
        bundle[name] = arr.astype(np.float64)
    model.set_params(bundle)
    return model


def build_gcn(graph, d, hidden=10, layers=1, rule=None, squash=None,
              residual=False, concat="full", activation_slope=0.01,
              seed=0, phase_input=False) -> GcnModel:
    """Construct and initialize a model for a graph."""
    rule = rule if rule is not None else NormAdj()
    squash = squash if squash is not None else Identity()
    prop = build_propagation(graph, rule)
    model = GcnModel(
        n=graph.n, d=d, hidden=hidden, layers=layers, propagation=prop,
        squash=squash, residual=residual, concat=concat,
        activation_slope=activation_slope,
    )
    return model.initialize(seed, phase_input=phase_input)
