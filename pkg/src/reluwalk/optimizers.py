"""Walk algorithms over the piecewise-linear landscape of a ReLU network.

Four local searches, all maximizing f over a box:

* pga: plain projected gradient ascent, x <- P(x + gamma * grad f(x)).
* ppga: pga plus a perturbed restart rule. Improvements over the best value
  since the last reset that are small relative to the current value increment
  a counter; after k such improvements the iterate jumps to a Gaussian
  perturbation of the best point found so far.
* ppga_lr: ppga with a valve step. A ratio test measures the distance u to
  the next region boundary along the gradient; when V * u >= gamma the step
  is replaced by a rescaled move of length c along the gradient direction.
  In adaptive mode V = 1 / ||grad f|| and c = u, so small gradients trigger
  longer region-spanning moves.
* lp_walk: repeatedly solves the LP restricted to the current linear region
  and steps slightly past its optimum, stopping at the first region whose LP
  brings no strict improvement.

Every run owns a np.random.default_rng(seed); with an iteration limit and no
time limit the produced iterates and trace rows (ignoring wall-clock fields)
are fully reproducible.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .lp import LinearProgram, LpSolverFailure, LpStatus, solve_lp
from .network import (
    activation_pattern,
    forward,
    gradient_for_pattern,
    pattern_from_trace,
    project_box,
    sample_uniform,
)
from .region import RatioTest, _ratio_for_step, region_affine, region_halfspaces

__all__ = [
    "OptimizerConfig",
    "ValveParams",
    "TraceRow",
    "RunResult",
    "pga_step",
    "valve_step",
    "pga",
    "ppga",
    "ppga_lr",
    "lp_walk",
    "run_algorithm",
    "write_trace_csv",
    "ALGORITHMS",
    "LP_WALK_IMPROVE_TOL",
    "TRACE_ITERATION_CAP",
]

log = logging.getLogger("reluwalk.optimizers")

# Strict-improvement margin for accepting an LP optimum during lp_walk.
LP_WALK_IMPROVE_TOL = 1e-9
# Fraction of the box diagonal used to nudge past an accepted LP optimum.
LP_WALK_PAST_FRACTION = 1e-4
# Iteration-limited runs record every iteration until this many rows exist;
# improvements and the final row are always recorded.
TRACE_ITERATION_CAP = 20_000


@dataclass(frozen=True)
class OptimizerConfig:
    """Shared hyperparameters and budgets.

    gamma: learning rate. xi: restart noise coefficient; each reset draws
    per-coordinate Gaussian noise with standard deviation xi / sqrt(n0).
    epsilon: relative improvement threshold. k: tolerance window (number of
    small improvements before a reset). At least one of time_limit (seconds)
    and iteration_limit must be set. stall_reset additionally resets after k
    consecutive non-improving iterations (off by default).
    """

    gamma: float
    xi: float = 2.0
    epsilon: float = 1e-3
    k: int = 100
    time_limit: float | None = None
    iteration_limit: int | None = None
    seed: int = 0
    stall_reset: bool = False

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.xi < 0:
            raise ValueError("xi must be nonnegative")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.k < 1:
            raise ValueError("k must be a positive integer")
        if self.time_limit is None and self.iteration_limit is None:
            raise ValueError("set a time_limit, an iteration_limit, or both")
        if self.time_limit is not None and not self.time_limit > 0:
            raise ValueError("time_limit must be positive")
        if self.iteration_limit is not None and self.iteration_limit < 1:
            raise ValueError("iteration_limit must be a positive integer")


@dataclass(frozen=True)
class ValveParams:
    """Valve configuration: adaptive (per-step V = 1/||grad||, c = u) or
    fixed positive V and c."""

    mode: str = "adaptive"
    V: float | None = None
    c: float | None = None

    def __post_init__(self):
        if self.mode not in ("adaptive", "fixed"):
            raise ValueError("mode must be 'adaptive' or 'fixed'")
        if self.mode == "fixed":
            if self.V is None or not self.V > 0:
                raise ValueError("fixed mode needs a positive V")
            if self.c is None or not self.c > 0:
                raise ValueError("fixed mode needs a positive c")


class TraceRow(NamedTuple):
    elapsed_s: float
    iteration: int
    best_value: float
    step_size: float


@dataclass
class RunResult:
    best_point: np.ndarray
    best_value: float
    trace: list
    iterations: int
    resets: int


class _Tracer:
    """Collects trace rows: one per incumbent improvement, one per second of
    wall time, and (in iteration-limited runs) every iteration up to a cap."""

    def __init__(self, every_iteration):
        self.rows = []
        self.every_iteration = every_iteration
        self._last_emit = -math.inf

    def record(self, elapsed, iteration, best_value, step_size, improved):
        emit = (
            improved
            or (self.every_iteration and len(self.rows) < TRACE_ITERATION_CAP)
            or elapsed - self._last_emit >= 1.0
        )
        if emit:
            self.rows.append(TraceRow(elapsed, iteration, best_value, step_size))
            self._last_emit = elapsed

    def finalize(self, elapsed, iteration, best_value):
        last = self.rows[-1] if self.rows else None
        if last is None or last.iteration != iteration or last.best_value != best_value:
            self.rows.append(TraceRow(elapsed, iteration, best_value, 0.0))


class _Budget:
    def __init__(self, cfg):
        self.start = time.monotonic()
        self.time_limit = cfg.time_limit
        self.iteration_limit = cfg.iteration_limit

    def elapsed(self):
        return time.monotonic() - self.start

    def exhausted(self, iteration):
        if self.iteration_limit is not None and iteration >= self.iteration_limit:
            return True
        if self.time_limit is not None and self.elapsed() >= self.time_limit:
            return True
        return False


def pga_step(net, box, x, gamma):
    """One projected gradient step: P(x + gamma * grad f(x))."""
    x = np.asarray(x, dtype=np.float64)
    return project_box(box, x + gamma * gradient_for_pattern(
        net, pattern_from_trace(forward(net, x))))


def _limit_step(box, x, direction):
    """Limit of P(x + c * direction) as c grows without bound."""
    return np.where(
        direction > 0, box.upper, np.where(direction < 0, box.lower, x)
    )


def _valve_move(net, box, x, gamma, valve, base_trace, grad):
    """Valve decision given a precomputed forward trace and gradient at x."""
    norm = math.sqrt(float(grad @ grad))
    if norm == 0.0:
        return np.asarray(x, dtype=np.float64).copy(), RatioTest(np.inf, None), False
    rt = _ratio_for_step(net, x, base_trace, grad)
    if valve.mode == "adaptive":
        V, c = 1.0 / norm, rt.u
    else:
        V, c = valve.V, valve.c
    if V * rt.u >= gamma and c > 0:
        if math.isinf(c):
            x_new = _limit_step(box, x, grad)
        else:
            x_new = project_box(box, x + (c / norm) * grad)
        return x_new, rt, True
    return project_box(box, x + gamma * grad), rt, False


def valve_step(net, box, x, gamma, valve):
    """One valve step; returns (new point, boundary distance u, used_valve).

    used_valve is True exactly when V * u >= gamma (with the adaptive choices
    substituted in adaptive mode); a zero-gradient point is returned unchanged
    with used_valve False, and u = 0 falls back to the plain gradient step.
    """
    x = np.asarray(x, dtype=np.float64)
    base = forward(net, x)
    grad = gradient_for_pattern(net, pattern_from_trace(base))
    x_new, rt, used = _valve_move(net, box, x, gamma, valve, base, grad)
    return x_new, rt.u, used


def _gradient_walk(net, box, cfg, valve=None, perturbed=True, x0=None, observer=None):
    """Shared driver for pga (perturbed=False), ppga, and ppga_lr (valve set).

    observer, when given, is called as observer(event, info) with event
    "improve" (best-since-reset improved) or "reset" (perturbation applied);
    info carries the iteration and, for resets, the counter value after the
    reset. Intended for tests and diagnostics only.
    """
    rng = np.random.default_rng(cfg.seed)
    if x0 is None:
        x = sample_uniform(box, rng)
    else:
        x = project_box(box, x0)
    n0 = box.dim
    delta = cfg.xi / math.sqrt(n0)
    budget = _Budget(cfg)
    tracer = _Tracer(every_iteration=cfg.time_limit is None)

    fwd = forward(net, x)
    best_x, best_f = x.copy(), fwd.output
    reset_f = fwd.output  # value of the best solution since the last reset
    r = 0
    stall = 0
    resets = 0
    iteration = 0
    tracer.record(0.0, 0, best_f, 0.0, improved=True)

    def do_reset():
        nonlocal x, fwd, reset_f, r, stall, resets
        noise = rng.normal(0.0, delta, size=n0)
        x = project_box(box, best_x + noise)
        fwd = forward(net, x)
        reset_f = fwd.output
        r = 0
        stall = 0
        resets += 1
        if observer is not None:
            observer("reset", {"iteration": iteration, "r": r})

    while not budget.exhausted(iteration):
        if valve is None:
            grad = gradient_for_pattern(net, pattern_from_trace(fwd))
            x_new = project_box(box, x + cfg.gamma * grad)
        else:
            x_new, _, _ = _valve_move(net, box, x, cfg.gamma, valve, fwd,
                                      gradient_for_pattern(net, pattern_from_trace(fwd)))
        diff = x_new - x
        step_size = math.sqrt(float(diff @ diff))
        x = x_new
        fwd = forward(net, x)
        fx = fwd.output
        iteration += 1

        improved_best = False
        if fx > reset_f:
            local_gain = fx - reset_f
            reset_f = fx
            stall = 0
            if observer is not None:
                observer("improve", {"iteration": iteration, "value": fx})
            if fx > best_f:
                best_x, best_f = x.copy(), fx
                improved_best = True
            if perturbed:
                if local_gain < fx * cfg.epsilon:
                    r += 1
                    if r == cfg.k:
                        do_reset()
                else:
                    if fx == best_f:
                        r = 0
        else:
            stall += 1
            if perturbed and cfg.stall_reset and stall >= cfg.k:
                do_reset()

        tracer.record(budget.elapsed(), iteration, best_f, step_size, improved_best)

    tracer.finalize(budget.elapsed(), iteration, best_f)
    return RunResult(best_x, best_f, tracer.rows, iteration, resets)


def pga(net, box, cfg, x0=None):
    """Projected gradient ascent; tracks the best point visited."""
    return _gradient_walk(net, box, cfg, perturbed=False, x0=x0)


def ppga(net, box, cfg, x0=None, observer=None):
    """Perturbed projected gradient ascent."""
    return _gradient_walk(net, box, cfg, x0=x0, observer=observer)


def ppga_lr(net, box, cfg, valve=None, x0=None, observer=None):
    """ppga with the linear-region valve step (adaptive valve by default)."""
    if valve is None:
        valve = ValveParams()
    return _gradient_walk(net, box, cfg, valve=valve, x0=x0, observer=observer)


def lp_walk(net, box, cfg, x0=None):
    """Region-LP local search.

    Each iteration maximizes the current region's affine objective over the
    region intersected with the box. A strict improvement moves the iterate
    slightly past the LP optimum along the incoming line; otherwise the walk
    stops. A solver failure restarts from a fresh uniform sample.
    """
    rng = np.random.default_rng(cfg.seed)
    if x0 is None:
        x = sample_uniform(box, rng)
    else:
        x = project_box(box, x0)
    budget = _Budget(cfg)
    tracer = _Tracer(every_iteration=cfg.time_limit is None)
    past = LP_WALK_PAST_FRACTION * box.diagonal()

    f_cur = forward(net, x).output
    best_x, best_f = x.copy(), f_cur
    iteration = 0
    tracer.record(0.0, 0, best_f, 0.0, improved=True)

    while not budget.exhausted(iteration):
        pattern = activation_pattern(net, x)
        affine = region_affine(net, pattern)
        program = LinearProgram(affine.T, region_halfspaces(net, pattern), box)
        try:
            outcome = solve_lp(program)
        except LpSolverFailure as exc:
            log.warning("region LP failed (%s); restarting from a fresh sample", exc)
            iteration += 1
            x = sample_uniform(box, rng)
            f_cur = forward(net, x).output
            if f_cur > best_f:
                best_x, best_f = x.copy(), f_cur
            tracer.record(budget.elapsed(), iteration, best_f, 0.0, False)
            continue
        iteration += 1
        if outcome.status is not LpStatus.OPTIMAL:
            # the iterate's own region cannot be empty; treat as a failure
            log.warning("region LP reported infeasible at a feasible point; restarting")
            x = sample_uniform(box, rng)
            f_cur = forward(net, x).output
            if f_cur > best_f:
                best_x, best_f = x.copy(), f_cur
            tracer.record(budget.elapsed(), iteration, best_f, 0.0, False)
            continue
        x_opt = outcome.point
        f_opt = forward(net, x_opt).output
        improved_best = False
        if f_opt > best_f:
            best_x, best_f = x_opt.copy(), f_opt
            improved_best = True
        if f_opt > f_cur + LP_WALK_IMPROVE_TOL:
            move = x_opt - x
            dist = math.sqrt(float(move @ move))
            if dist == 0.0:
                break
            x = project_box(box, x_opt + (past / dist) * move)
            f_cur = forward(net, x).output
            if f_cur > best_f:
                best_x, best_f = x.copy(), f_cur
                improved_best = True
            tracer.record(budget.elapsed(), iteration, best_f, dist, improved_best)
        else:
            tracer.record(budget.elapsed(), iteration, best_f, 0.0, improved_best)
            break

    tracer.finalize(budget.elapsed(), iteration, best_f)
    return RunResult(best_x, best_f, tracer.rows, iteration, resets=0)


ALGORITHMS = {
    "pga": pga,
    "ppga": ppga,
    "ppga-lr": ppga_lr,
    "lp-walk": lp_walk,
}


def run_algorithm(name, net, box, cfg, x0=None):
    """Dispatch by algorithm name ('pga', 'ppga', 'ppga-lr', 'lp-walk')."""
    try:
        fn = ALGORITHMS[name]
    except KeyError:
        raise ValueError(
            f"unknown algorithm {name!r}; expected one of {sorted(ALGORITHMS)}"
        ) from None
    return fn(net, box, cfg, x0=x0)


def write_trace_csv(trace, path):
    """Write trace rows as CSV with header elapsed_s,iteration,best_value,step_size."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["elapsed_s", "iteration", "best_value", "step_size"])
        for row in trace:
            writer.writerow([f"{row.elapsed_s:.6f}", row.iteration,
                             repr(row.best_value), repr(row.step_size)])
