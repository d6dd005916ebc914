"""Run configuration: one JSON document fully determines a run.

Defaults follow the reference experiment settings: hidden width 10,
Adam at learning rate 0.01, switch after 100 iterations, patience 10
with a 1e-10 loss-fluctuation limit. Unknown keys are errors, not
warnings, so stale configs fail loudly. String shorthands are accepted
for problems and graphs (e.g. "kuramoto", "lattice2d 25 25");
serialization always emits the explicit object forms, and
parse(serialize(cfg)) is the identity.
"""

import json
import zlib
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ParseError, ValidationError
from .graphs import SBM, RGG, Circle, EdgeListFile, Lattice2D, Lattice3D, Tree
from .runner_types import StoppingRule

PROBLEM_KINDS = ("heat", "kuramoto", "hopf_kuramoto", "persistence_h0")
MODES = ("linear", "gcn", "hybrid")
PROPAGATIONS = ("norm_adj", "i_minus_as", "as_squared", "a_squared", "binomial")
SQUASHES = ("auto", "identity", "phase_sigmoid", "affine")


@dataclass(frozen=True)
class PinSpec:
    """Seeded hot/cold boundary pins for the heat problem."""

    hot_frac: float = 0.1
    cold_frac: float = 0.1
    hot: float = 1.0
    cold: float = 0.0
    strength: float = 1.0
    exponent: int = 2


@dataclass(frozen=True)
class ProblemSpec:
    kind: str
    pins: PinSpec | None = None       # heat
    c: float = 1.0                    # hopf_kuramoto
    s1: float = 1.0
    s2: float = 0.0
    range_r: float = 1.0              # persistence_h0
    box_weight: float = 1.0


@dataclass(frozen=True)
class CloudSpec:
    n: int = 100
    range_r: float = 1.0
    path: str | None = None           # load instead of sampling


@dataclass(frozen=True)
class ModelSpec:
    hidden: int = 10
    layers: int = 1
    residual: bool = False
    propagation: str = "norm_adj"
    binomial_q: int = 2
    binomial_xi: float = 0.01
    squash: str = "auto"
    affine_scale: float = 1.0
    affine_offset: float = 0.0
    concat: str = "full"
    activation_slope: float = 0.01


@dataclass(frozen=True)
class OptimizerSpec:
    kind: str = "adam"
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    decay: float = 0.9
    gamma: float = 1.0
    epsilon: float = 1e-8


@dataclass(frozen=True)
class PrefitSpec:
    tol: float = 1e-4
    max_iters: int = 5000
    lr: float = 0.01


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemSpec
    graph: object = None              # a GraphSpec dataclass, or None
    cloud: CloudSpec | None = None
    mode: str = "hybrid"
    model: ModelSpec = field(default_factory=ModelSpec)
    optimizer: OptimizerSpec = field(default_factory=OptimizerSpec)
    stop: StoppingRule = field(default_factory=StoppingRule)
    switch_at: int | None = None
    prefit: PrefitSpec = field(default_factory=PrefitSpec)
    seed: int = 0
    out_dir: str | None = None

    @property
    def effective_switch_at(self) -> int:
        return 100 if self.switch_at is None else self.switch_at


def seed_for(master_seed, name) -> int:
    """Named deterministic substream seed derived from one master seed."""
    mix = np.random.SeedSequence([int(master_seed), zlib.crc32(name.encode())])
    return int(mix.generate_state(1)[0])


# ---------------------------------------------------------------------
# parsing helpers
# ---------------------------------------------------------------------


def _require_keys(obj, allowed, where):
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ParseError(f"unknown key(s) {sorted(unknown)} in {where}")


def _take(obj, key, default, where, kind=None):
    value = obj.get(key, default)
    if kind is not None and value is not None and not isinstance(value, kind):
        raise ParseError(f"{where}.{key}: expected {kind}, got {type(value).__name__}")
    return value


def parse_graph_spec(spec):
    """Graph spec from the object form or the string shorthand.

    Shorthand examples: "lattice2d 3 3", "lattice2d 3 3 periodic",
    "circle 625", "tree 2 9", "sbm 60+60+60+60 0.2 0.01",
    "rgg 100 0.2 2", "file edges.txt". Separators ':' and ',' are
    treated as spaces, so "circle:5" works too.
    """
    if isinstance(spec, str):
        tokens = spec.replace(":", " ").replace(",", " ").split()
        if not tokens:
            raise ParseError("empty graph spec")
        kind, args = tokens[0].lower(), tokens[1:]
        try:
            if kind == "lattice2d":
                periodic = args[-1] == "periodic" if args else False
                nums = args[:-1] if periodic else args
                return Lattice2D(int(nums[0]), int(nums[1]), periodic)
            if kind == "lattice3d":
                periodic = args[-1] == "periodic" if args else False
                nums = args[:-1] if periodic else args
                return Lattice3D(int(nums[0]), int(nums[1]), int(nums[2]), periodic)
            if kind == "circle":
                return Circle(int(args[0]))
            if kind == "tree":
                return Tree(int(args[0]), int(args[1]))
            if kind == "sbm":
                sizes = tuple(int(s) for s in args[0].split("+"))
                return SBM(sizes, float(args[1]), float(args[2]))
            if kind == "rgg":
                dim = int(args[2]) if len(args) > 2 else 2
                return RGG(int(args[0]), float(args[1]), dim)
            if kind == "file":
                return EdgeListFile(args[0])
        except (IndexError, ValueError) as exc:
            raise ParseError(f"bad graph spec {spec!r}: {exc}") from exc
        raise ParseError(f"unknown graph kind {kind!r}")
    if not isinstance(spec, dict):
        raise ParseError(f"graph spec must be a string or object, got {type(spec).__name__}")
    kind = _take(spec, "kind", None, "graph", str)
    if kind is None:
        raise ParseError("graph object needs a 'kind'")
    try:
        if kind == "lattice2d":
            _require_keys(spec, ("kind", "rows", "cols", "periodic"), "graph")
            return Lattice2D(spec["rows"], spec["cols"], spec.get("periodic", False))
        if kind == "lattice3d":
            _require_keys(spec, ("kind", "nx", "ny", "nz", "periodic"), "graph")
            return Lattice3D(spec["nx"], spec["ny"], spec["nz"], spec.get("periodic", False))
        if kind == "circle":
            _require_keys(spec, ("kind", "n"), "graph")
            return Circle(spec["n"])
        if kind == "tree":
            _require_keys(spec, ("kind", "branching", "depth"), "graph")
            return Tree(spec["branching"], spec["depth"])
        if kind == "sbm":
            _require_keys(spec, ("kind", "block_sizes", "p_in", "p_out"), "graph")
            return SBM(tuple(spec["block_sizes"]), spec["p_in"], spec["p_out"])
        if kind == "rgg":
            _require_keys(spec, ("kind", "n", "radius", "dim"), "graph")
            return RGG(spec["n"], spec["radius"], spec.get("dim", 2))
        if kind == "file":
            _require_keys(spec, ("kind", "path"), "graph")
            return EdgeListFile(spec["path"])
    except KeyError as exc:
        raise ParseError(f"graph spec missing key {exc}") from exc
    raise ParseError(f"unknown graph kind {kind!r}")


def graph_spec_to_obj(spec):
    if isinstance(spec, Lattice2D):
        return {"kind": "lattice2d", "rows": spec.rows, "cols": spec.cols,
                "periodic": spec.periodic}
    if isinstance(spec, Lattice3D):
        return {"kind": "lattice3d", "nx": spec.nx, "ny": spec.ny, "nz": spec.nz,
                "periodic": spec.periodic}
    if isinstance(spec, Circle):
        return {"kind": "circle", "n": spec.n}
    if isinstance(spec, Tree):
        return {"kind": "tree", "branching": spec.branching, "depth": spec.depth}
    if isinstance(spec, SBM):
        return {"kind": "sbm", "block_sizes": list(spec.block_sizes),
                "p_in": spec.p_in, "p_out": spec.p_out}
    if isinstance(spec, RGG):
        return {"kind": "rgg", "n": spec.n, "radius": spec.radius, "dim": spec.dim}
    if isinstance(spec, EdgeListFile):
        return {"kind": "file", "path": spec.path}
    raise ValidationError(f"unknown graph spec {spec!r}")


def _parse_problem(obj):
    if isinstance(obj, str):
        obj = {"kind": obj}
    if not isinstance(obj, dict):
        raise ParseError("problem must be a string or object")
    kind = _take(obj, "kind", None, "problem", str)
    if kind not in PROBLEM_KINDS:
        raise ParseError(f"problem kind must be one of {PROBLEM_KINDS}, got {kind!r}")
    if kind == "heat":
        _require_keys(obj, ("kind", "pins"), "problem")
        pins_obj = obj.get("pins", {})
        _require_keys(pins_obj, ("hot_frac", "cold_frac", "hot", "cold",
                                 "strength", "exponent"), "problem.pins")
        pins = PinSpec(
            hot_frac=float(pins_obj.get("hot_frac", 0.1)),
            cold_frac=float(pins_obj.get("cold_frac", 0.1)),
            hot=float(pins_obj.get("hot", 1.0)),
            cold=float(pins_obj.get("cold", 0.0)),
            strength=float(pins_obj.get("strength", 1.0)),
            exponent=int(pins_obj.get("exponent", 2)),
        )
        return ProblemSpec(kind="heat", pins=pins)
    if kind == "kuramoto":
        _require_keys(obj, ("kind",), "problem")
        return ProblemSpec(kind="kuramoto")
    if kind == "hopf_kuramoto":
        _require_keys(obj, ("kind", "c", "s1", "s2"), "problem")
        return ProblemSpec(kind="hopf_kuramoto", c=float(obj.get("c", 1.0)),
                           s1=float(obj.get("s1", 1.0)), s2=float(obj.get("s2", 0.0)))
    _require_keys(obj, ("kind", "range", "box_weight"), "problem")
    return ProblemSpec(kind="persistence_h0", range_r=float(obj.get("range", 1.0)),
                       box_weight=float(obj.get("box_weight", 1.0)))


def _parse_model(obj):
    _require_keys(obj, ("hidden", "layers", "residual", "propagation",
                        "binomial_q", "binomial_xi", "squash", "affine_scale",
                        "affine_offset", "concat", "activation_slope"), "model")
    spec = ModelSpec(
        hidden=int(obj.get("hidden", 10)),
        layers=int(obj.get("layers", 1)),
        residual=bool(obj.get("residual", False)),
        propagation=_take(obj, "propagation", "norm_adj", "model", str),
        binomial_q=int(obj.get("binomial_q", 2)),
        binomial_xi=float(obj.get("binomial_xi", 0.01)),
        squash=_take(obj, "squash", "auto", "model", str),
        affine_scale=float(obj.get("affine_scale", 1.0)),
        affine_offset=float(obj.get("affine_offset", 0.0)),
        concat=_take(obj, "concat", "full", "model", str),
        activation_slope=float(obj.get("activation_slope", 0.01)),
    )
    if spec.propagation not in PROPAGATIONS:
        raise ParseError(f"model.propagation must be one of {PROPAGATIONS}")
    if spec.squash not in SQUASHES:
        raise ParseError(f"model.squash must be one of {SQUASHES}")
    if spec.concat not in ("full", "last"):
        raise ParseError("model.concat must be 'full' or 'last'")
    return spec


def _parse_optimizer(obj):
    _require_keys(obj, ("kind", "lr", "beta1", "beta2", "decay", "gamma",
                        "epsilon"), "optimizer")
    return OptimizerSpec(
        kind=_take(obj, "kind", "adam", "optimizer", str),
        lr=float(obj.get("lr", 0.01)),
        beta1=float(obj.get("beta1", 0.9)),
        beta2=float(obj.get("beta2", 0.999)),
        decay=float(obj.get("decay", 0.9)),
        gamma=float(obj.get("gamma", 1.0)),
        epsilon=float(obj.get("epsilon", 1e-8)),
    )


def _parse_stop(obj):
    _require_keys(obj, ("max_iters", "patience", "fluctuation_tol"), "stop")
    return StoppingRule(
        max_iters=int(obj.get("max_iters", 5000)),
        patience=int(obj.get("patience", 10)),
        fluctuation_tol=float(obj.get("fluctuation_tol", 1e-10)),
    )


def _parse_cloud(obj):
    if isinstance(obj, str):
        return CloudSpec(path=obj)
    _require_keys(obj, ("n", "range", "path"), "cloud")
    return CloudSpec(n=int(obj.get("n", 100)), range_r=float(obj.get("range", 1.0)),
                     path=obj.get("path"))


def parse_config(text) -> RunConfig:
    """Parse and validate a JSON run configuration."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ParseError("config must be a JSON object")
    _require_keys(doc, ("problem", "graph", "cloud", "mode", "model", "optimizer",
                        "stop", "switch_at", "prefit", "seed", "out_dir"), "config")
    if "problem" not in doc:
        raise ParseError("missing required key 'problem'")
    problem = _parse_problem(doc["problem"])
    graph = parse_graph_spec(doc["graph"]) if "graph" in doc else None
    cloud = _parse_cloud(doc["cloud"]) if "cloud" in doc else None
    mode = _take(doc, "mode", "hybrid", "config", str)
    if mode not in MODES:
        raise ParseError(f"mode must be one of {MODES}, got {mode!r}")
    prefit_obj = doc.get("prefit", {})
    _require_keys(prefit_obj, ("tol", "max_iters", "lr"), "prefit")
    cfg = RunConfig(
        problem=problem,
        graph=graph,
        cloud=cloud,
        mode=mode,
        model=_parse_model(doc.get("model", {})),
        optimizer=_parse_optimizer(doc.get("optimizer", {})),
        stop=_parse_stop(doc.get("stop", {})),
        switch_at=int(doc["switch_at"]) if "switch_at" in doc else None,
        prefit=PrefitSpec(tol=float(prefit_obj.get("tol", 1e-4)),
                          max_iters=int(prefit_obj.get("max_iters", 5000)),
                          lr=float(prefit_obj.get("lr", 0.01))),
        seed=int(doc.get("seed", 0)),
        out_dir=_take(doc, "out_dir", None, "config", str),
    )
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig):
    """Cross-field consistency checks (each error names the pair)."""
    if cfg.switch_at is not None and cfg.mode != "hybrid":
        raise ValidationError(f"switch_at is set but mode is {cfg.mode!r} "
                              "(switch_at / mode)")
    if cfg.switch_at is not None and cfg.switch_at > cfg.stop.max_iters:
        raise ValidationError("switch_at exceeds stop.max_iters "
                              "(switch_at / stop.max_iters)")
    if cfg.problem.kind == "persistence_h0":
        if cfg.cloud is None:
            raise ValidationError("persistence_h0 needs a cloud "
                                  "(problem.kind / cloud)")
        if cfg.graph is not None:
            raise ValidationError("persistence_h0 derives its graph from the "
                                  "cloud; remove 'graph' (problem.kind / graph)")
    else:
        if cfg.graph is None:
            raise ValidationError(f"problem {cfg.problem.kind!r} needs a graph "
                                  "(problem.kind / graph)")
        if cfg.cloud is not None:
            raise ValidationError("cloud is only valid for persistence_h0 "
                                  "(problem.kind / cloud)")
    phase = cfg.problem.kind in ("kuramoto", "hopf_kuramoto")
    if cfg.model.squash == "phase_sigmoid" and not phase:
        raise ValidationError("phase_sigmoid squash on a non-phase problem "
                              "(problem.kind / model.squash)")
    if cfg.optimizer.kind == "full_matrix" and cfg.mode != "linear":
        raise ValidationError("the full-matrix optimizer is a dense diagnostic "
                              "for linear runs only (optimizer.kind / mode)")


def serialize_config(cfg: RunConfig) -> str:
    """Canonical JSON for a RunConfig; parse_config inverts it."""
    doc = {
        "problem": _problem_to_obj(cfg.problem),
        "mode": cfg.mode,
        "model": asdict(cfg.model),
        "optimizer": asdict(cfg.optimizer),
        "stop": {"max_iters": cfg.stop.max_iters, "patience": cfg.stop.patience,
                 "fluctuation_tol": cfg.stop.fluctuation_tol},
        "prefit": {"tol": cfg.prefit.tol, "max_iters": cfg.prefit.max_iters,
                   "lr": cfg.prefit.lr},
        "seed": cfg.seed,
    }
    if cfg.graph is not None:
        doc["graph"] = graph_spec_to_obj(cfg.graph)
    if cfg.cloud is not None:
        doc["cloud"] = {"n": cfg.cloud.n, "range": cfg.cloud.range_r,
                        "path": cfg.cloud.path}
    if cfg.switch_at is not None:
        doc["switch_at"] = cfg.switch_at
    if cfg.out_dir is not None:
        doc["out_dir"] = cfg.out_dir
    return json.dumps(doc, indent=2, sort_keys=True)


def _problem_to_obj(p: ProblemSpec):
    if p.kind == "heat":
        pins = p.pins if p.pins is not None else PinSpec()
        return {"kind": "heat", "pins": asdict(pins)}
    if p.kind == "kuramoto":
        return {"kind": "kuramoto"}
    if p.kind == "hopf_kuramoto":
        return {"kind": "hopf_kuramoto", "c": p.c, "s1": p.s1, "s2": p.s2}
    return {"kind": "persistence_h0", "range": p.range_r, "box_weight": p.box_weight}
