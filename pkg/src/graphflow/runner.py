"""Trajectory execution and speedup measurement.

All runs share one protocol: at iteration t the current state is
evaluated and recorded, then the stopping rule is checked, then the
parameters are updated (the final update is skipped so the recorded
trajectory ends at the returned state). The hybrid run concatenates a
reparametrized stage with a plain stage started from the GCN output;
the state does not change at the switch, so the loss recorded at
switch_iter equals stage one's final recorded loss exactly.
"""

import csv
import json
import math
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NonFiniteLoss, ShapeMismatch
from .losses import order_parameter
from .optimizers import OptimizerConfig, init_state, step
from .runner_types import RunRecord, SpeedupReport, StoppingRule  # noqa: F401  (re-export)


def convergence_check(history, stop: StoppingRule) -> bool:
    """True iff the last `patience` successive |differences| are all
    below the fluctuation tolerance."""
    if len(history) < stop.patience + 1:
        return False
    tail = np.asarray(history[-(stop.patience + 1):])
    return bool(np.all(np.abs(np.diff(tail)) < stop.fluctuation_tol))


def _rho(problem, w):
    return order_parameter(w) if problem.is_phase else None


def run_linear(problem, w0, cfg: OptimizerConfig, stop: StoppingRule,
               wall_offset_ms=0.0, iter_offset=0) -> RunRecord:
    """Plain descent on the state itself."""
    w = np.array(w0, dtype=np.float64)
    if w.shape != (problem.n, problem.d):
        raise ShapeMismatch(f"w0 shape {w.shape}, expected {(problem.n, problem.d)}")
    params = {"w": w}
    state = init_state(cfg, params)
    rows, losses = [], []
    start = time.perf_counter()
    converged = False
    aborted = False
    for t in range(stop.max_iters):
        loss, grad = problem.evaluate(params["w"])
        wall = wall_offset_ms + (time.perf_counter() - start) * 1e3
        rows.append((iter_offset + t, wall, loss, _rho(problem, params["w"])))
        losses.append(loss)
        if not math.isfinite(loss):
            aborted = True
            break
        if convergence_check(losses, stop):
            converged = True
            break
        if t == stop.max_iters - 1:
            break
        step(cfg, state, params, {"w": grad})
    return RunRecord(
        rows=rows,
        final_state=params["w"],
        iterations_run=len(rows),
        converged=converged,
        aborted=aborted,
        switch_iter=None,
    )


def run_reparam(problem, model, cfg: OptimizerConfig, stop: StoppingRule) -> RunRecord:
    """Descent on the GCN parameters; the state is the model output."""
    if model.n != problem.n or model.d != problem.d:
        raise ShapeMismatch("model output does not match the problem state")
    state = init_state(cfg, model.params)
    rows, losses = [], []
    start = time.perf_counter()
    converged = False
    aborted = False
    w = model.forward()
    for t in range(stop.max_iters):
        loss, grad_w = problem.evaluate(w)
        wall = (time.perf_counter() - start) * 1e3
        rows.append((t, wall, loss, _rho(problem, w)))
        losses.append(loss)
        if not math.isfinite(loss):
            aborted = True
            break
        if convergence_check(losses, stop):
            converged = True
            break
        if t == stop.max_iters - 1:
            break
        grads = model.backward(grad_w)
        step(cfg, state, model.params, grads)
        w = model.forward()
    return RunRecord(
        rows=rows,
        final_state=w,
        iterations_run=len(rows),
        converged=converged,
        aborted=aborted,
        switch_iter=None,
    )


def run_hybrid(problem, model, cfg_stage1: OptimizerConfig, cfg_stage2: OptimizerConfig,
               switch_at, stop: StoppingRule) -> RunRecord:
    """Two-stage scheme: reparametrized descent for `switch_at`
    iterations (or until the patience rule sees a plateau, whichever
    first), then plain descent started from the reparametrized output
    with the remaining iteration budget."""
    if switch_at > stop.max_iters:
        raise ShapeMismatch("switch_at exceeds the iteration budget")
    stage1_stop = StoppingRule(
        max_iters=switch_at,
        patience=stop.patience,
        fluctuation_tol=stop.fluctuation_tol,
    )
    stage1 = run_reparam(problem, model, cfg_stage1, stage1_stop)
    if stage1.aborted:
        stage1.switch_iter = stage1.iterations_run
        return stage1
    w_handoff = model.forward()
    switch_iter = stage1.iterations_run
    stage2_stop = StoppingRule(
        max_iters=stop.max_iters - switch_iter,
        patience=stop.patience,
        fluctuation_tol=stop.fluctuation_tol,
    )
    wall_offset = stage1.rows[-1][1] if stage1.rows else 0.0
    stage2 = run_linear(
        problem, w_handoff, cfg_stage2, stage2_stop,
        wall_offset_ms=wall_offset, iter_offset=switch_iter,
    )
    has_stage2 = bool(stage2.rows)
    return RunRecord(
        rows=stage1.rows + stage2.rows,
        final_state=stage2.final_state if has_stage2 else w_handoff,
        iterations_run=stage1.iterations_run + stage2.iterations_run,
        converged=stage2.converged if has_stage2 else stage1.converged,
        aborted=stage2.aborted,
        switch_iter=switch_iter,
    )


@dataclass
class PrefitResult:
    mse: float
    iterations: int
    wall_ms: float
    reached_tol: bool


def prefit(model, target, cfg: OptimizerConfig, tol, max_iters) -> PrefitResult:
    """Fit the model output to a target state by MSE descent.

    Used for point clouds, where the reparametrized run must start from
    the same configuration as the baseline. The wall time is returned
    separately; it counts against the candidate in total-speedup
    reports.
    """
    target = np.asarray(target, dtype=np.float64)
    if target.shape != (model.n, model.d):
        raise ShapeMismatch(f"target shape {target.shape}, expected {(model.n, model.d)}")
    state = init_state(cfg, model.params)
    start = time.perf_counter()
    scale = 1.0 / target.size
    iters = 0
    w = model.forward()
    mse = float(np.sum((w - target) ** 2) * scale)
    for t in range(max_iters):
        if not math.isfinite(mse):
            raise NonFiniteLoss(f"prefit diverged at iteration {t}")
        if mse <= tol:
            break
        grads = model.backward(2.0 * scale * (w - target))
        step(cfg, state, model.params, grads)
        iters = t + 1
        w = model.forward()
        mse = float(np.sum((w - target) ** 2) * scale)
    wall = (time.perf_counter() - start) * 1e3
    return PrefitResult(mse=mse, iterations=iters, wall_ms=wall, reached_tol=mse <= tol)


# ---------------------------------------------------------------------
# speedup
# ---------------------------------------------------------------------


def _iters_to_threshold(record: RunRecord, threshold):
    hit = np.flatnonzero(record.losses() <= threshold)
    return int(hit[0]) if len(hit) else None


def _ratio(base_cost, cand_cost):
    if cand_cost == 0:
        return 1.0 if base_cost == 0 else math.inf
    return base_cost / cand_cost


def speedup(baseline: RunRecord, candidate: RunRecord,
            threshold_quantile=0.01) -> SpeedupReport:
    """Iteration and wall-clock speedup of candidate over baseline.

    The threshold is the baseline's final loss plus a relative margin
    (`threshold_quantile` of its magnitude); each side's cost is its
    first record at or below the threshold. Candidate prefit time is
    charged to the candidate's wall clock.
    """
    if not baseline.rows or not candidate.rows:
        raise ShapeMismatch("speedup needs non-empty records")
    base_final = baseline.rows[-1][2]
    threshold = base_final + threshold_quantile * abs(base_final)
    bi = _iters_to_threshold(baseline, threshold)
    ci = _iters_to_threshold(candidate, threshold)
    iter_speedup = wall_speedup = None
    if bi is not None and ci is not None:
        iter_speedup = _ratio(bi, ci)
        bw = baseline.rows[bi][1] + baseline.prefit_ms
        cw = candidate.rows[ci][1] + candidate.prefit_ms
        wall_speedup = _ratio(bw, cw)
    return SpeedupReport(
        iter_speedup_to_threshold=iter_speedup,
        wallclock_speedup=wall_speedup,
        threshold_loss=threshold,
        baseline_final_loss=base_final,
        candidate_final_loss=candidate.rows[-1][2],
        baseline_reached=bi is not None,
        candidate_reached=ci is not None,
    )


# ---------------------------------------------------------------------
# trajectory and summary files
# ---------------------------------------------------------------------


def write_trajectory_csv(record: RunRecord, path):
    """CSV with header iter,wall_ms,loss,order_param (atomic write)."""
    tmp = str(path) + ".tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "wall_ms", "loss", "order_param"])
        for it, wall, loss, rho in record.rows:
            writer.writerow([it, f"{wall:.6f}", f"{loss:.17g}",
                             "" if rho is None else f"{rho:.17g}"])
    os.replace(tmp, path)


def read_trajectory_csv(path):
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["iter", "wall_ms", "loss", "order_param"]:
            raise ShapeMismatch(f"{path}: unexpected header {header}")
        for it, wall, loss, rho in reader:
            rows.append((int(it), float(wall), float(loss),
                         None if rho == "" else float(rho)))
    return rows


def write_summary_json(record: RunRecord, path, config_echo=None, extra=None):
    summary = {
        "config": config_echo,
        "iterations": record.iterations_run,
        "converged": record.converged,
        "aborted": record.aborted,
        "final_loss": record.rows[-1][2] if record.rows else None,
        "switch_iter": record.switch_iter,
        "prefit_ms": record.prefit_ms,
    }
    if extra:
        summary.update(extra)
    tmp = str(path) + ".tmp"
    Path(tmp).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                         encoding="utf-8")
    os.replace(tmp, path)
