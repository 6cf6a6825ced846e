"""Gradient ascent with backtracking and a seeded multistart harness."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from .landscape import gradient_discrete, gradient_kernel
from .propagator import objective_from_unitary, propagate
from .system import ControlField, ControlTask, kinematic_bounds

MAX_HALVINGS = 60


@dataclass(frozen=True)
class AscentConfig:
    max_iters: int = 2000
    initial_step: float = 10.0
    backtrack_factor: float = 0.5
    sufficient_increase: float = 1e-4
    grad_stop: float = 1e-10
    J_stop: float | None = None
    seed: int = 0
    direction: str = "kernel"
    step_growth: float = 2.0

    def __post_init__(self):
        if self.max_iters < 0 or self.initial_step <= 0:
            raise ValueError("max_iters must be >= 0 and initial_step > 0")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError(f"backtrack_factor must lie in (0, 1), got {self.backtrack_factor}")
        if self.direction not in ("kernel", "discrete"):
            raise ValueError(f"direction must be 'kernel' or 'discrete', got {self.direction!r}")


@dataclass
class Trajectory:
    iterates: list
    final_field: ControlField
    termination: str

    @property
    def final_J(self) -> float:
        return self.iterates[-1][1]

    @property
    def iterations(self) -> int:
        return self.iterates[-1][0]

    def csv_rows(self):
        yield ("iter", "J", "grad_norm", "step")
        for row in self.iterates:
            yield row


def _evaluate(task, field, direction):
    prop = propagate(task, field)
    J = objective_from_unitary(task, prop.U_final)
    g = gradient_kernel(task, field, prop)
    d = g.discrete() if direction == "kernel" else gradient_discrete(task, field)
    return J, g.sup_norm, d


def gradient_ascent(task: ControlTask, init: ControlField, config: AscentConfig = AscentConfig()) -> Trajectory:
    """Steepest ascent on the grid amplitudes with Armijo backtracking.

    Each iterate row is (iteration, J, sup-norm of the gradient kernel,
    step accepted to reach it). A successful step lets the next trial step
    grow by ``step_growth``.
    """
    field = init
    J, gnorm, d = _evaluate(task, field, config.direction)
    iterates = [(0, J, gnorm, 0.0)]
    step = config.initial_step
    it = 0
    while True:
        if gnorm <= config.grad_stop:
            return Trajectory(iterates, field, "GRAD_STOP")
        if config.J_stop is not None and J >= config.J_stop:
            return Trajectory(iterates, field, "TARGET_REACHED")
        if it >= config.max_iters:
            return Trajectory(iterates, field, "MAX_ITERS")
        slope = float(d @ d)
        trial_step = step
        for _ in range(MAX_HALVINGS):
            trial = field.with_values(field.values + trial_step * d)
            prop = propagate(task, trial)
            J_new = objective_from_unitary(task, prop.U_final)
            if J_new >= J + config.sufficient_increase * trial_step * slope and J_new >= J:
                break
            trial_step *= config.backtrack_factor
        else:
            return Trajectory(iterates, field, "LINE_SEARCH_FAILED")
        it += 1
        field = trial
        J, gnorm, d = _evaluate(task, field, config.direction)
        iterates.append((it, J, gnorm, trial_step))
        step = trial_step * config.step_growth


@dataclass
class MultistartSummary:
    seeds: list
    final_J: list
    iterations: list
    terminations: list
    threshold: float
    success_fraction: float
    best_index: int
    best_field: ControlField = dc_field(repr=False)

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "success_fraction": self.success_fraction,
            "best_index": self.best_index,
            "best_J": self.final_J[self.best_index],
            "runs": [
                {"seed": s, "final_J": j, "iterations": i, "termination": t}
                for s, j, i, t in zip(self.seeds, self.final_J, self.iterations, self.terminations)
            ],
        }

    def csv_rows(self):
        yield ("seed", "final_J", "iterations", "termination")
        yield from zip(self.seeds, self.final_J, self.iterations, self.terminations)


def _run_start(args):
    task, M, amplitude, config = args
    init = ControlField.random_uniform(task.T, M, amplitude, config.seed)
    return gradient_ascent(task, init, config)


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get("PROBE_THREADS", "1")))
    except ValueError:
        return 1


def multistart(
    task: ControlTask,
    n_starts: int,
    amplitude: float,
    config: AscentConfig = AscentConfig(),
    M: int = 128,
    delta: float = 0.05,
) -> MultistartSummary:
    """Run ascent from ``n_starts`` uniform random fields.

    Start s uses seed ``config.seed + s`` for its initial field, so a single
    start reproduces ``gradient_ascent`` with ``config.seed``. Parallelism is
    capped by the PROBE_THREADS environment variable; results are ordered by
    start index regardless of schedule.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    seeds = [config.seed + s for s in range(n_starts)]
    jobs = [(task, M, amplitude, replace(config, seed=s)) for s in seeds]
    workers = min(_worker_count(), n_starts)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_run_start, jobs))
    else:
        runs = [_run_start(job) for job in jobs]

    threshold = kinematic_bounds(task).Jmax - delta
    final = [r.final_J for r in runs]
    best = int(np.argmax(final))
    return MultistartSummary(
        seeds=seeds,
        final_J=final,
        iterations=[r.iterations for r in runs],
        terminations=[r.termination for r in runs],
        threshold=threshold,
        success_fraction=sum(j >= threshold for j in final) / n_starts,
        best_index=best,
        best_field=runs[best].final_field,
    )
