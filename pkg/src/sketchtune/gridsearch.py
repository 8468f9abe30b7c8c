"""Semi-exhaustive grid sweep: ground-truth optima and landscape tables.

The default grid crosses 10 sampling factors, 19 nonzero counts, 3 safety
factors, and all 6 categorical cells (3420 evaluations).  Sweeps are
resumable through the history store, keyed by a (task, configuration) hash;
landscape rows report, per (cell, sampling_factor, vec_nnz) point, the best
outcome across the safety levels.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

from .history import EvaluationRecord, HistoryStore, record_key
from .objective import evaluate, run_reference
from .params import Configuration, ConstantParams, TuningSpace
from .problems import task_descriptor


def _default_vec_nnz_levels():
    return tuple(range(1, 11)) + tuple(range(20, 101, 10))


@dataclass(frozen=True)
class GridSpec:
    """Grid levels; defaults give the full 3420-cell sweep."""

    sampling_factors: tuple = tuple(float(v) for v in range(1, 11))
    vec_nnz_levels: tuple = field(default_factory=_default_vec_nnz_levels)
    safety_factors: tuple = (0, 2, 4)
    space: TuningSpace = field(default_factory=TuningSpace)

    @property
    def total(self) -> int:
        return (
            len(self.sampling_factors)
            * len(self.vec_nnz_levels)
            * len(self.safety_factors)
            * len(self.space.categorical_cells())
        )

    def configurations(self):
        """All grid configurations in a fixed deterministic order."""
        for alg, op in self.space.categorical_cells():
            for sf in self.sampling_factors:
                for nnz in self.vec_nnz_levels:
                    for safety in self.safety_factors:
                        yield Configuration(alg, op, float(sf), int(nnz), int(safety))


@dataclass
class LandscapeRow:
    """Best-over-safety outcome at one (cell, sampling_factor, vec_nnz) point."""

    cell_id: str
    sampling_factor: float
    vec_nnz: int
    objective: float
    arfe: float
    failed: bool


@dataclass
class GridResult:
    records: list
    landscape: list
    best: EvaluationRecord
    n_evaluated: int  # evaluations actually run (excludes resumed cells)


def _cell_seed_base(seed: int, index: int, num_repeats: int) -> int:
    # Stable per-cell seeds, independent of evaluation order so resumed
    # sweeps reproduce the skipped cells' records exactly.
    return int((seed * 1_000_003 + index * num_repeats) % (2**31 - num_repeats))


def run_grid(problem, spec: GridSpec, constants: ConstantParams, seed: int,
             store: HistoryStore | None = None, resume: bool = True,
             arfe_ref: float | None = None,
             wall_clock_floor: float | None = None) -> GridResult:
    """Evaluate every grid cell; failures are recorded, never fatal.

    With a store and ``resume=True``, cells whose (task, config) key already
    appears in the store are loaded instead of re-run.
    """
    if problem.m * problem.n > 1_000_000:
        warnings.warn(
            f"grid sweep on a {problem.m} x {problem.n} matrix will be expensive; "
            "desk-scale problems are recommended",
            stacklevel=2,
        )
    if arfe_ref is None:
        ref, _ = run_reference(problem, constants, seed_base=_cell_seed_base(seed, spec.total, constants.num_repeats))
        arfe_ref = ref.arfe_ref
        if wall_clock_floor is None:
            wall_clock_floor = ref.wall_clock_ref

    existing = {}
    if store is not None and resume:
        for rec in store.load():
            existing[rec.key()] = rec

    task = task_descriptor(problem)
    records = []
    n_evaluated = 0
    for index, config in enumerate(spec.configurations()):
        key = record_key(task, config)
        if key in existing:
            records.append(existing[key])
            continue
        rec = evaluate(problem, config, constants, arfe_ref,
                       _cell_seed_base(seed, index, constants.num_repeats),
                       wall_clock_floor=wall_clock_floor)
        records.append(rec)
        n_evaluated += 1
        if store is not None:
            store.append(rec)

    landscape = build_landscape(spec, records)
    best = min(records, key=lambda r: r.objective_value)
    return GridResult(records=records, landscape=landscape, best=best, n_evaluated=n_evaluated)


def build_landscape(spec: GridSpec, records) -> list[LandscapeRow]:
    """Reduce records to one row per (cell, sampling_factor, vec_nnz) point,
    keeping the best objective across the safety levels."""
    by_point = {}
    for r in records:
        c = r.config
        point = ((c.sap_algorithm, c.sketching_operator), c.sampling_factor, c.vec_nnz)
        cur = by_point.get(point)
        if cur is None or r.objective_value < cur.objective_value:
            by_point[point] = r
    rows = []
    for (cell, sf, nnz), r in sorted(
        by_point.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2])
    ):
        rows.append(
            LandscapeRow(
                cell_id=f"{cell[0]}/{cell[1]}",
                sampling_factor=sf,
                vec_nnz=nnz,
                objective=r.objective_value,
                arfe=r.mean_arfe,
                failed=r.failed,
            )
        )
    return rows


def write_landscape_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell_id", "sampling_factor", "vec_nnz", "objective", "arfe", "failed"])
        for row in rows:
            writer.writerow(
                [row.cell_id, repr(float(row.sampling_factor)), row.vec_nnz,
                 repr(float(row.objective)), repr(float(row.arfe)), int(row.failed)]
            )
