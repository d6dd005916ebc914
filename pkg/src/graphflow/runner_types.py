"""Record types shared by the runner and the harness."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatch


@dataclass(frozen=True)
class StoppingRule:
    max_iters: int = 5000
    patience: int = 10
    fluctuation_tol: float = 1e-10

    def __post_init__(self):
        if self.max_iters < 0:
            raise ShapeMismatch("max_iters must be nonnegative")
        if self.patience < 1:
            raise ShapeMismatch("patience must be at least 1")
        if self.fluctuation_tol <= 0:
            raise ShapeMismatch("fluctuation_tol must be positive")


@dataclass
class RunRecord:
    """One optimization trajectory.

    rows holds (iter, wall_ms, loss, order_param-or-None) per recorded
    iteration; wall_ms is cumulative and non-decreasing. prefit_ms is
    nonzero only when a point-cloud prefit preceded the run.
    """

    rows: list
    final_state: np.ndarray
    iterations_run: int
    converged: bool
    aborted: bool = False
    switch_iter: int | None = None
    prefit_ms: float = 0.0

    def losses(self) -> np.ndarray:
        return np.array([r[2] for r in self.rows])

    def wall_ms(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows])

    def order_params(self):
        return [r[3] for r in self.rows]


@dataclass(frozen=True)
class SpeedupReport:
    """Candidate-vs-baseline cost ratio at a shared loss threshold."""

    iter_speedup_to_threshold: float | None
    wallclock_speedup: float | None
    threshold_loss: float
    baseline_final_loss: float
    candidate_final_loss: float
    baseline_reached: bool = True
    candidate_reached: bool = True
