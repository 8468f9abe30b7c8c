"""Command-line sessions binding the library into end-to-end runs.

One command with a ``--mode`` switch: generate, solve, tune, random, tla,
grid, sensitivity.  Option precedence is flags > config file > defaults;
every session derives all randomness from a single seed and leaves its
artifacts (history JSONL, per-iteration CSV, summary JSON) in the output
directory.  Exit codes: 0 ok, 1 user error, 2 runtime failure.

The default output root comes from the SKETCHTUNE_OUT environment variable
(falling back to the working directory).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .gridsearch import GridSpec, run_grid, write_landscape_csv
from .history import HistoryStore, load_history
from .objective import ReferenceRunError, run_reference
from .params import (
    Configuration,
    ConstantParams,
    TuningSpace,
    with_overrides,
)
from .problems import (
    GENERATOR_KINDS,
    direct_solve,
    generate_problem,
    load_problem,
    problem_from_text,
    save_problem,
)
from .sensitivity import analyze_tuning
from .solvers import solve_sap
from .surrogate import random_search, tune, write_session_csv
from .transfer import tla_tune

MODES = ("generate", "solve", "tune", "random", "tla", "grid", "sensitivity")

EXIT_OK = 0
EXIT_USER_ERROR = 1
EXIT_RUNTIME_FAILURE = 2


class UserError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); user errors are exit 1
        raise UserError(message)


def build_parser() -> _Parser:
    p = _Parser(prog="sketchtune", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"sketchtune {__version__}")
    p.add_argument("--mode", required=True, choices=MODES)
    p.add_argument("--config", help="JSON session config file")
    p.add_argument("--m", type=int, help="rows of the synthetic problem")
    p.add_argument("--n", type=int, help="columns of the synthetic problem")
    p.add_argument("--kind", choices=GENERATOR_KINDS, help="synthetic generator kind")
    p.add_argument("--problem", help="load a problem container instead of generating")
    p.add_argument("--matrix", help="import a dense matrix from text/CSV")
    p.add_argument("--rhs", help="right-hand side text/CSV for --matrix")
    p.add_argument("--budget", type=int, help="total evaluations for tuning modes")
    p.add_argument("--seed", type=int, help="session seed")
    p.add_argument("--source", nargs="+", help="source history file(s) for tla/sensitivity")
    p.add_argument("--out", help="output directory (default under SKETCHTUNE_OUT)")
    return p


def _load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise UserError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise UserError(f"config file {path} is not valid JSON: {exc}") from exc


class Session:
    """Resolved session options (flags > file > defaults)."""

    def __init__(self, args):
        cfg = _load_config_file(args.config) if args.config else {}
        task = cfg.get("task", {})
        self.mode = args.mode
        self.kind = args.kind or task.get("kind")
        self.m = args.m if args.m is not None else task.get("m")
        self.n = args.n if args.n is not None else task.get("n")
        self.problem_path = args.problem or cfg.get("problem")
        self.matrix_path = args.matrix or cfg.get("matrix")
        self.rhs_path = args.rhs or cfg.get("rhs")
        self.seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        self.task_seed = task.get("seed", self.seed)
        self.budget = args.budget if args.budget is not None else cfg.get("budget", 50)
        self.sources = args.source or cfg.get("source") or []
        if isinstance(self.sources, str):
            self.sources = [self.sources]
        self.space = TuningSpace.from_dict(cfg.get("space", {}))
        self.constants = ConstantParams.from_dict(cfg.get("constants", {}))
        self.solve_config = (
            Configuration.from_dict(cfg["config"]) if "config" in cfg else None
        )
        self.grid = cfg.get("grid", {})
        self.base_n = int(cfg.get("base_n", 512))
        self.pilot_records = int(cfg.get("pilot_records", 100))

        out_root = os.environ.get("SKETCHTUNE_OUT", ".")
        self.out = args.out or cfg.get("out") or os.path.join(out_root, f"sketchtune-{self.mode}")
        os.makedirs(self.out, exist_ok=True)

    def load_or_generate_problem(self):
        if self.problem_path:
            return load_problem(self.problem_path)
        if self.matrix_path:
            return problem_from_text(self.matrix_path, self.rhs_path)
        if self.kind is None or self.m is None or self.n is None:
            raise UserError("need --kind/--m/--n, --problem, or --matrix to define the task")
        if self.m < self.n or self.n < 1:
            raise UserError(f"invalid problem shape m={self.m}, n={self.n}")
        return generate_problem(self.kind, self.m, self.n, self.task_seed)

    def path(self, name):
        return os.path.join(self.out, name)


def _write_summary(session, payload):
    with open(session.path("summary.json"), "w") as fh:
        json.dump(payload, fh, indent=2, default=str)
        fh.write("\n")


def _session_summary(session, records, arfe_ref=None):
    best_i = int(np.argmin([r.objective_value for r in records]))
    best = records[best_i]
    return {
        "mode": session.mode,
        "seed": session.seed,
        "task": records[0].task.to_dict(),
        "n_records": len(records),
        "n_failed": sum(r.failed for r in records),
        "arfe_ref": arfe_ref,
        "cumulative_evaluation_seconds": float(sum(r.mean_wall_clock for r in records)),
        "best": {
            "index": best_i + 1,
            "config": best.config.to_dict(),
            "objective_value": best.objective_value,
            "mean_arfe": best.mean_arfe,
        },
    }


def cmd_generate(session: Session) -> int:
    problem = session.load_or_generate_problem()
    name = f"problem_{problem.label}_{problem.m}x{problem.n}_seed{session.task_seed}.slsq"
    save_problem(session.path(name), problem)
    _write_summary(session, {
        "mode": "generate", "file": name,
        "task": {"kind": problem.label, "m": problem.m, "n": problem.n, "seed": problem.seed},
    })
    print(f"wrote {session.path(name)}")
    return EXIT_OK


def cmd_solve(session: Session) -> int:
    problem = session.load_or_generate_problem()
    config = session.solve_config or session.constants.ref_config
    direct_solve(problem)
    report = solve_sap(problem, config, session.seed)
    from .objective import compute_arfe

    arfe = compute_arfe(report.x, problem)
    payload = {
        "mode": "solve",
        "config": config.to_dict(),
        "wall_clock_seconds": report.wall_clock_seconds,
        "iterations": report.iterations,
        "termination": report.termination.value,
        "arfe": arfe,
    }
    _write_summary(session, payload)
    np.save(session.path("solution.npy"), report.x)
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def _run_tuning_session(session, runner):
    problem = session.load_or_generate_problem()
    store = HistoryStore(session.path("history.jsonl"))
    best, records = runner(problem, store)
    write_session_csv(records, session.path("session.csv"))
    ref_arfe = records[0].mean_arfe
    _write_summary(session, _session_summary(session, records, arfe_ref=ref_arfe))
    print(
        f"{session.mode}: {len(records)} evaluations, best objective "
        f"{best.objective_value:.6g}s with {best.config.to_dict()}"
    )
    return EXIT_OK


def cmd_tune(session: Session) -> int:
    return _run_tuning_session(
        session,
        lambda problem, store: tune(
            problem, session.space, session.constants, session.budget, session.seed, store=store
        ),
    )


def cmd_random(session: Session) -> int:
    return _run_tuning_session(
        session,
        lambda problem, store: random_search(
            problem, session.space, session.constants, session.budget, session.seed, store=store
        ),
    )


def cmd_tla(session: Session) -> int:
    if not session.sources:
        raise UserError("tla mode requires --source history file(s)")
    for path in session.sources:
        if not os.path.exists(path):
            raise UserError(f"source history not found: {path}")
    source = load_history(session.sources)
    if not source:
        raise UserError("source history is empty")
    return _run_tuning_session(
        session,
        lambda problem, store: tla_tune(
            problem, source, session.space, session.constants,
            session.budget, session.seed, store=store,
        ),
    )


def cmd_grid(session: Session) -> int:
    problem = session.load_or_generate_problem()
    spec = GridSpec(
        sampling_factors=tuple(session.grid.get("sampling_factors", tuple(float(v) for v in range(1, 11)))),
        vec_nnz_levels=tuple(session.grid.get("vec_nnz_levels", tuple(range(1, 11)) + tuple(range(20, 101, 10)))),
        safety_factors=tuple(session.grid.get("safety_factors", (0, 2, 4))),
        space=session.space,
    )
    store = HistoryStore(session.path("history.jsonl"))
    result = run_grid(problem, spec, session.constants, session.seed, store=store)
    write_landscape_csv(result.landscape, session.path("landscape.csv"))
    write_session_csv(result.records, session.path("session.csv"))
    summary = _session_summary(session, result.records)
    summary["n_evaluated_now"] = result.n_evaluated
    summary["grid_cells"] = spec.total
    _write_summary(session, summary)
    print(
        f"grid: {spec.total} cells ({result.n_evaluated} evaluated now), best objective "
        f"{result.best.objective_value:.6g}s with {result.best.config.to_dict()}"
    )
    return EXIT_OK


def cmd_sensitivity(session: Session) -> int:
    if session.sources:
        records = load_history(session.sources)
        report = analyze_tuning(records, session.space, base_n=session.base_n, seed=session.seed)
    else:
        problem = session.load_or_generate_problem()
        report = analyze_tuning(
            problem, session.space, constants=session.constants,
            base_n=session.base_n, seed=session.seed, pilot_records=session.pilot_records,
        )
    report.to_csv(session.path("sensitivity.csv"))
    _write_summary(session, {
        "mode": "sensitivity",
        "parameters": list(report.parameters),
        "S1": [float(v) for v in report.s1],
        "ST": [float(v) for v in report.st],
        "sample_count": report.sample_count,
        "degenerate": report.degenerate,
    })
    for name, s1, st in zip(report.parameters, report.s1, report.st):
        print(f"{name:20s} S1={s1:+.3f} ST={st:+.3f}")
    return EXIT_OK


_COMMANDS = {
    "generate": cmd_generate,
    "solve": cmd_solve,
    "tune": cmd_tune,
    "random": cmd_random,
    "tla": cmd_tla,
    "grid": cmd_grid,
    "sensitivity": cmd_sensitivity,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        session = Session(args)
        return _COMMANDS[session.mode](session)
    except (UserError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER_ERROR
    except (ReferenceRunError, RuntimeError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME_FAILURE
    except SystemExit as exc:  # --version / --help
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
