"""The tuning objective: timed solves, ARFE accuracy gating, and penalties.

An evaluation runs the solver pipeline ``num_repeats`` times with explicit
consecutive seeds and averages wall-clock time and ARFE.  A configuration
fails when its mean ARFE exceeds ``allowance_factor`` times the reference
ARFE (or when any repeat errors out); failed configurations keep a finite
objective, ``penalty_factor * mean_wall_clock``, so the surrogate search is
repelled rather than interrupted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .history import EvaluationRecord
from .params import Configuration, ConstantParams
from .problems import LsProblem, direct_solve, task_descriptor
from .solvers import SolveFailure, solve_sap


class DegenerateResidualError(ValueError):
    """ARFE is undefined: the candidate solution has exactly zero residual."""


class ReferenceRunError(RuntimeError):
    """The reference configuration failed; the session cannot proceed."""


@dataclass(frozen=True)
class ReferenceResult:
    arfe_ref: float
    wall_clock_ref: float


def compute_arfe(x, problem: LsProblem) -> float:
    """Approximate relative forward error ||A x - A x*|| / ||A x - b||."""
    if problem.x_star is None:
        raise ValueError("problem has no cached direct solution; call direct_solve first")
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    Ax = problem.A @ x
    denom = float(np.linalg.norm(Ax - problem.b))
    if denom == 0.0:
        raise DegenerateResidualError("zero residual: ARFE denominator vanishes")
    num = float(np.linalg.norm(Ax - problem.A @ problem.x_star))
    return num / denom


def evaluate(problem: LsProblem, config: Configuration, constants: ConstantParams,
             arfe_ref: float | None, seed_base: int,
             wall_clock_floor: float | None = None) -> EvaluationRecord:
    """Evaluate one configuration with repeats.

    Runs seeds ``seed_base .. seed_base + num_repeats - 1``.  With
    ``arfe_ref=None`` (the reference run itself) the allowance test is
    skipped and only hard solver errors mark the record failed.  Hard
    errors contribute their elapsed time to the mean and never propagate.

    A hard error usually aborts within milliseconds, so penalizing its raw
    elapsed time would make crashing configurations the cheapest points in
    the search space.  ``wall_clock_floor`` (sessions pass the reference
    run's mean wall clock) bounds a hard-errored evaluation's objective
    from below at ``penalty_factor * floor``; allowance failures of
    completed runs are penalized on their true mean wall clock.
    """
    wall_clocks = []
    arfes = []
    hard_error = False
    seeds = [int(seed_base) + r for r in range(constants.num_repeats)]
    for seed in seeds:
        try:
            report = solve_sap(problem, config, seed)
            wall_clocks.append(report.wall_clock_seconds)
            arfes.append(compute_arfe(report.x, problem))
        except SolveFailure as exc:
            hard_error = True
            wall_clocks.append(max(exc.elapsed_seconds, 1e-9))
        except DegenerateResidualError:
            hard_error = True
            arfes.append(float("nan"))
    mean_wall = float(np.mean(wall_clocks))
    mean_arfe = float(np.mean(arfes)) if arfes else float("nan")
    failed = hard_error
    if arfe_ref is not None and not failed:
        failed = not (mean_arfe <= constants.allowance_factor * arfe_ref)
    if hard_error and wall_clock_floor is not None:
        objective = constants.penalty_factor * max(mean_wall, wall_clock_floor)
    else:
        objective = constants.penalty_factor * mean_wall if failed else mean_wall
    return EvaluationRecord(
        task=task_descriptor(problem),
        config=config,
        seeds=seeds,
        mean_wall_clock=mean_wall,
        mean_arfe=mean_arfe,
        failed=failed,
        objective_value=objective,
        per_repeat_wall_clock=[float(t) for t in wall_clocks],
        per_repeat_arfe=[float(a) for a in arfes],
    )


def run_reference(problem: LsProblem, constants: ConstantParams,
                  seed_base: int = 0) -> tuple[ReferenceResult, EvaluationRecord]:
    """Evaluate ref_config to establish the reference ARFE and time.

    Ensures the direct solution is cached first.  A hard failure or a
    degenerate/nonpositive reference ARFE aborts the session.
    """
    if problem.x_star is None:
        direct_solve(problem)
    record = evaluate(problem, constants.ref_config, constants, None, seed_base)
    if record.failed or not np.isfinite(record.mean_arfe):
        raise ReferenceRunError("reference configuration failed to produce a usable ARFE")
    if record.mean_arfe <= 0.0:
        raise ReferenceRunError("reference ARFE is not positive")
    return ReferenceResult(arfe_ref=record.mean_arfe, wall_clock_ref=record.mean_wall_clock), record
