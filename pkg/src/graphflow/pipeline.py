"""From a RunConfig to problems, models, runs and emitted files.

All randomness flows from the run's master seed through named
substreams (graph, pins, init, model, cloud), so the graph sample, the
boundary pins, the baseline initialization and the model weights can be
varied independently. A bench sweep derives per-run master seeds as
seed + k.
"""

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import RunConfig, seed_for, serialize_config
from .errors import ValidationError
from .gcn import (
    Affine,
    AsSquared,
    BinomialInvSqrt,
    IMinusAs,
    Identity,
    NormAdj,
    PhaseSigmoid,
    build_gcn,
)
from .graphs import generate
from .losses import (
    BoundaryCondition,
    HeatProblem,
    HopfKuramotoProblem,
    HopfParams,
    KuramotoProblem,
)
from .optimizers import OptimizerConfig
from .persistence import (
    PersistenceProblem,
    default_filtration,
    read_cloud_csv,
    rips_adjacency,
    sample_cloud,
)
from .runner import (
    RunRecord,
    prefit,
    run_hybrid,
    run_linear,
    run_reparam,
    speedup,
    write_summary_json,
    write_trajectory_csv,
)


@dataclass
class PreparedRun:
    problem: object
    graph: object
    w0: np.ndarray            # baseline initial state
    cloud: object = None      # PointCloud for persistence problems


def _heat_bc(graph, pins, seed):
    rng = np.random.default_rng(seed_for(seed, "pins"))
    n = graph.n
    n_hot = max(1, round(pins.hot_frac * n))
    n_cold = max(1, round(pins.cold_frac * n))
    perm = rng.permutation(n)
    hot_nodes = perm[:n_hot]
    cold_nodes = perm[n_hot:n_hot + n_cold]
    pinned = [(int(i), pins.hot) for i in hot_nodes]
    pinned += [(int(i), pins.cold) for i in cold_nodes]
    return BoundaryCondition(pinned=tuple(pinned), strength=pins.strength,
                             exponent=pins.exponent)


def prepare(cfg: RunConfig, seed=None) -> PreparedRun:
    """Build the problem, graph, and baseline initial state for a seed."""
    seed = cfg.seed if seed is None else seed
    kind = cfg.problem.kind
    if kind == "persistence_h0":
        if cfg.cloud.path is not None:
            cloud = read_cloud_csv(cfg.cloud.path, range_r=cfg.problem.range_r)
        else:
            cloud = sample_cloud(cfg.cloud.n, cfg.cloud.range_r,
                                 seed_for(seed, "cloud"))
            cloud = replace(cloud, range_r=cfg.problem.range_r)
        problem = PersistenceProblem(cloud.n, cfg.problem.range_r,
                                     box_weight=cfg.problem.box_weight)
        graph = rips_adjacency(cloud, default_filtration(cloud))
        return PreparedRun(problem=problem, graph=graph,
                           w0=np.array(cloud.positions), cloud=cloud)
    graph = generate(cfg.graph, seed=seed_for(seed, "graph"))
    rng = np.random.default_rng(seed_for(seed, "init"))
    if kind == "heat":
        pins = cfg.problem.pins
        bc = _heat_bc(graph, pins, seed) if pins is not None else BoundaryCondition(())
        problem = HeatProblem(graph, bc)
        if len(bc.pinned):
            lo = min(bc.targets.min(), 0.0)
            hi = max(bc.targets.max(), lo + 1.0)
            w0 = rng.uniform(lo, hi, size=(graph.n, 1))
        else:
            w0 = rng.standard_normal((graph.n, 1))
    elif kind == "kuramoto":
        problem = KuramotoProblem(graph)
        w0 = rng.uniform(0.0, 2.0 * np.pi, size=(graph.n, 1))
    elif kind == "hopf_kuramoto":
        problem = HopfKuramotoProblem(
            graph, HopfParams(c=cfg.problem.c, s1=cfg.problem.s1, s2=cfg.problem.s2))
        w0 = rng.uniform(0.0, 2.0 * np.pi, size=(graph.n, 1))
    else:
        raise ValidationError(f"unknown problem kind {kind!r}")
    return PreparedRun(problem=problem, graph=graph, w0=w0)


def _rule_from_spec(model_spec):
    name = model_spec.propagation
    if name == "norm_adj":
        return NormAdj()
    if name == "i_minus_as":
        return IMinusAs()
    if name == "as_squared":
        return AsSquared(raw=False)
    if name == "a_squared":
        return AsSquared(raw=True)
    return BinomialInvSqrt(q=model_spec.binomial_q, xi=model_spec.binomial_xi)


def _squash_from_spec(cfg: RunConfig, problem):
    name = cfg.model.squash
    if name == "auto":
        if problem.is_phase:
            return PhaseSigmoid()
        if cfg.problem.kind == "persistence_h0":
            return Affine(scale=cfg.model.affine_scale, offset=cfg.model.affine_offset)
        return Identity()
    if name == "identity":
        return Identity()
    if name == "phase_sigmoid":
        return PhaseSigmoid()
    return Affine(scale=cfg.model.affine_scale, offset=cfg.model.affine_offset)


def build_model(cfg: RunConfig, prepared: PreparedRun, seed=None):
    seed = cfg.seed if seed is None else seed
    problem = prepared.problem
    return build_gcn(
        prepared.graph,
        d=problem.d,
        hidden=cfg.model.hidden,
        layers=cfg.model.layers,
        rule=_rule_from_spec(cfg.model),
        squash=_squash_from_spec(cfg, problem),
        residual=cfg.model.residual,
        concat=cfg.model.concat,
        activation_slope=cfg.model.activation_slope,
        seed=seed_for(seed, "model"),
        phase_input=problem.is_phase,
    )


def optimizer_config(spec, lr=None) -> OptimizerConfig:
    return OptimizerConfig(
        kind=spec.kind,
        learning_rate=spec.lr if lr is None else lr,
        epsilon=spec.epsilon,
        beta1=spec.beta1,
        beta2=spec.beta2,
        decay=spec.decay,
        gamma=spec.gamma,
    )


def execute_run(cfg: RunConfig, seed=None, mode=None) -> RunRecord:
    """Run one trajectory in the requested mode (defaults to cfg.mode)."""
    seed = cfg.seed if seed is None else seed
    mode = cfg.mode if mode is None else mode
    prepared = prepare(cfg, seed=seed)
    opt = optimizer_config(cfg.optimizer)
    if mode == "linear":
        return run_linear(prepared.problem, prepared.w0, opt, cfg.stop)
    model = build_model(cfg, prepared, seed=seed)
    prefit_ms = 0.0
    if cfg.problem.kind == "persistence_h0":
        fit = prefit(model, prepared.w0, optimizer_config(cfg.optimizer, lr=cfg.prefit.lr),
                     tol=cfg.prefit.tol, max_iters=cfg.prefit.max_iters)
        prefit_ms = fit.wall_ms
    if mode == "gcn":
        record = run_reparam(prepared.problem, model, opt, cfg.stop)
    else:
        record = run_hybrid(prepared.problem, model, opt, opt,
                            cfg.effective_switch_at, cfg.stop)
    record.prefit_ms = prefit_ms
    return record


def write_run_outputs(cfg: RunConfig, record: RunRecord, out_dir, seed,
                      figures=True):
    """Trajectory CSV, summary JSON and (optionally) figures for a run."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "trajectory.csv"
    write_trajectory_csv(record, csv_path)
    write_summary_json(
        record, out / "summary.json",
        config_echo=serialize_config(replace(cfg, seed=seed)),
        extra={"seed": seed, "mode": cfg.mode},
    )
    paths = [csv_path, out / "summary.json"]
    if figures:
        from . import plots
        paths.append(plots.save_run_figure(record, out / "trajectory.png"))
    return paths


# ---------------------------------------------------------------------
# bench harness
# ---------------------------------------------------------------------


def _bench_one(args):
    cfg, seed, quantile = args
    baseline = execute_run(cfg, seed=seed, mode="linear")
    candidate = execute_run(cfg, seed=seed)
    report = speedup(baseline, candidate, threshold_quantile=quantile)
    return seed, baseline, candidate, report


def harness_workers() -> int:
    """Worker count for bench sweeps (REPARAM_THREADS, default 1)."""
    try:
        return max(1, int(os.environ.get("REPARAM_THREADS", "1")))
    except ValueError:
        return 1


def run_bench(cfg: RunConfig, seeds, quantile=0.01):
    """Baseline (linear) vs candidate (cfg.mode) across seeds.

    Returns a list of (seed, baseline_record, candidate_record,
    SpeedupReport). Runs are independent; with REPARAM_THREADS > 1 they
    execute in parallel worker processes (wall-clock numbers are then
    only comparable to sweeps at the same parallelism).
    """
    seed_list = [cfg.seed + k for k in range(seeds)]
    jobs = [(cfg, s, quantile) for s in seed_list]
    workers = harness_workers()
    if workers == 1:
        return [_bench_one(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_bench_one, jobs))


def median_speedups(results):
    """Median iteration/wall-clock speedups over the runs that reached
    the threshold; returns (iter_median, wall_median, n_reached)."""
    iters = [r.iter_speedup_to_threshold for _, _, _, r in results
             if r.iter_speedup_to_threshold is not None]
    walls = [r.wallclock_speedup for _, _, _, r in results
             if r.wallclock_speedup is not None]
    iter_median = float(np.median(iters)) if iters else None
    wall_median = float(np.median(walls)) if walls else None
    return iter_median, wall_median, len(iters)
