"""Transfer-learning autotuning: UCB over categorical cells, LCM over ordinals.

A session warm-starts by evaluating the reference configuration (the target
ARFE allowance is always recomputed, never transferred) and the historical
best configuration from the source task(s).  Each remaining iteration picks
one of the six (algorithm, operator) cells with a UCB bandit rule, fits a
multitask GP over the three ordinal parameters using only records from that
cell, and evaluates the acquisition winner.

Reward policy (deliberately isolated in ``ucb_scores``/``cell_rewards`` so it
can be swapped): the reward of a cell is the negative mean of per-task
standardized log objectives of its evaluations, min-max normalized to [0,1]
across cells with data each round, so the exploration bonus scale stays
meaningful for a minimized objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .history import EvaluationRecord, HistoryStore
from .params import (
    ConstantParams,
    TuningSpace,
    decode_ordinals,
    encode,
    encode_ordinals,
    lhs_unit_design,
)
from .surrogate import (
    _Evaluator,
    _run_reference_step,
    _seed_stream,
    _next_seed_base,
    expected_improvement,
    gp_fit,
    lcm_fit,
    lcm_predict,
    maximize_ei,
    decode,
)

DEFAULT_UCB_C = 4.0


@dataclass
class CategoryCell:
    """One (sap_algorithm, sketching_operator) bandit arm."""

    sap_algorithm: str
    sketching_operator: str
    pulls: int = 0
    reward: float = 0.0

    @property
    def pair(self):
        return (self.sap_algorithm, self.sketching_operator)


@dataclass
class TlaState:
    """Bandit state built from source + target evaluation records."""

    space: TuningSpace
    source_records: list = field(default_factory=list)
    target_records: list = field(default_factory=list)
    c: float = DEFAULT_UCB_C

    @property
    def t(self) -> int:
        return len(self.source_records) + len(self.target_records)

    def cells(self) -> list[CategoryCell]:
        cells = [CategoryCell(alg, op) for alg, op in self.space.categorical_cells()]
        rewards, counts = cell_rewards(
            self.space, self.source_records + self.target_records
        )
        for cell, r, n in zip(cells, rewards, counts):
            cell.reward, cell.pulls = float(r), int(n)
        return cells


def ucb_scores(rewards, counts, t: int, c: float) -> np.ndarray:
    """UCB score per cell: reward + c * sqrt(log t / N); infinite when N = 0."""
    rewards = np.asarray(rewards, dtype=float)
    counts = np.asarray(counts, dtype=float)
    scores = np.full(rewards.shape, np.inf)
    seen = counts > 0
    if t >= 1:
        scores[seen] = rewards[seen] + c * np.sqrt(math.log(t) / counts[seen])
    return scores


def _standardized_log_objectives(records):
    """log objective per record, standardized within each task."""
    by_task = {}
    for r in records:
        by_task.setdefault(r.task.key(), []).append(r)
    out = {}
    for key, recs in by_task.items():
        vals = np.log([r.objective_value for r in recs])
        mu = float(np.mean(vals))
        sd = float(np.std(vals))
        sd = sd if sd > 0 else 1.0
        for r, v in zip(recs, vals):
            out[id(r)] = (v - mu) / sd
    return out


def cell_rewards(space: TuningSpace, records):
    """Per-cell (reward, count); rewards min-max normalized over seen cells."""
    cells = space.categorical_cells()
    std_vals = _standardized_log_objectives(records)
    sums = np.zeros(len(cells))
    counts = np.zeros(len(cells), dtype=int)
    index = {cell: i for i, cell in enumerate(cells)}
    for r in records:
        key = (r.config.sap_algorithm, r.config.sketching_operator)
        if key in index:
            i = index[key]
            sums[i] += std_vals[id(r)]
            counts[i] += 1
    rewards = np.zeros(len(cells))
    seen = counts > 0
    if np.any(seen):
        raw = -(sums[seen] / counts[seen])  # lower time -> higher reward
        lo, hi = raw.min(), raw.max()
        rewards[seen] = (raw - lo) / (hi - lo) if hi > lo else 0.0
    return rewards, counts


def ucb_select(state: TlaState) -> CategoryCell:
    """Pick the cell maximizing the UCB score; ties break by declared order."""
    if state.t < 1:
        raise ValueError("UCB selection requires at least one sample")
    cells = state.cells()
    scores = ucb_scores(
        [c.reward for c in cells], [c.pulls for c in cells], state.t, state.c
    )
    return cells[int(np.argmax(scores))]


def source_best_config(source_records):
    """Configuration of the minimum-objective source record (earliest on ties)."""
    if not source_records:
        raise ValueError("source history is empty")
    best = source_records[0]
    for r in source_records[1:]:
        if r.objective_value < best.objective_value or (
            r.objective_value == best.objective_value and r.timestamp < best.timestamp
        ):
            best = r
    return best.config


def _cell_records(records, cell_pair):
    return [
        r
        for r in records
        if (r.config.sap_algorithm, r.config.sketching_operator) == cell_pair
    ]


def _propose_ordinals(space, cell_pair, source_records, target_records, target_key, rng):
    """LCM-guided ordinal triple for the chosen cell; LHS draw when no data."""
    cell_source = _cell_records(source_records, cell_pair)
    cell_target = _cell_records(target_records, cell_pair)
    if not cell_source and not cell_target:
        return lhs_unit_design(1, 3, rng)[0]

    # Group by task, target last; source records that belong to the target
    # task (warm start from its own prior history) merge into the target group.
    groups = {}
    for r in cell_source:
        groups.setdefault(r.task.key(), []).append(r)
    target_group = groups.pop(target_key, []) + cell_target
    points, values = [], []
    for k in groups:
        points.append(np.array([encode_ordinals(space, r.config) for r in groups[k]]))
        values.append(np.log([r.objective_value for r in groups[k]]))
    points.append(
        np.array([encode_ordinals(space, r.config) for r in target_group]).reshape(-1, 3)
    )
    values.append(np.log([r.objective_value for r in target_group]))
    target_index = len(points) - 1

    total = sum(len(v) for v in values)
    if total < 2 or len(points) == 1:
        # Too little for a joint model: single-task GP on whatever exists.
        xs = np.vstack([p for p in points if p.shape[0]])
        ys = np.concatenate([v for v in values if v.size])
        model = gp_fit(xs, ys, noise_floor=1e-6)
        return maximize_ei(model, 3, rng)

    model = lcm_fit(points, values, noise_floor=1e-6)

    def predict(U):
        return lcm_predict(model, target_index, U)

    if values[target_index].size:
        f_best = float(np.min(values[target_index]))
    else:
        source_x = np.vstack([p for p in points[:target_index] if p.shape[0]])
        means, _ = predict(source_x)
        f_best = float(np.min(means))

    cands = lhs_unit_design(96, 3, rng)
    if points[target_index].shape[0]:
        cands = np.vstack([cands, points[target_index]])
    means, variances = predict(cands)
    ei = expected_improvement(means, np.sqrt(variances), f_best)
    if np.max(ei) <= 1e-15:
        return cands[int(np.argmin(means))]
    return cands[int(np.argmax(ei))]


def tla_tune(target_problem, source_history, space: TuningSpace, constants: ConstantParams,
             budget: int, seed: int, store: HistoryStore | None = None,
             c: float = DEFAULT_UCB_C, strategy: str = "ucb_lcm", replay=None):
    """Transfer-learning tuning session on the target problem.

    ``source_history`` is a list of EvaluationRecords (one or more source
    tasks).  Returns (best record, target history).  ``strategy="lcm_all"``
    is an optional comparison mode that skips the bandit and fits the
    multitask model over all five encoded dimensions.  ``replay`` re-runs
    the decision logic deterministically against a prior session's records.
    """
    if not source_history:
        raise ValueError("source history is empty")
    if budget < 2:
        raise ValueError("budget must be >= 2 (reference + source best)")
    if strategy not in ("ucb_lcm", "lcm_all"):
        raise ValueError(f"unknown strategy {strategy!r}")
    _, rng_acq, rng_seed = _seed_stream(seed)
    evaluator = _Evaluator(target_problem, constants, replay)
    records: list[EvaluationRecord] = []

    def _append(rec):
        records.append(rec)
        if store is not None:
            store.append(rec)

    arfe_ref, ref_record = _run_reference_step(
        target_problem, constants, evaluator, _next_seed_base(rng_seed, constants)
    )
    _append(ref_record)
    target_key = ref_record.task.key()

    best_source = source_best_config(source_history)
    _append(evaluator(best_source, arfe_ref, _next_seed_base(rng_seed, constants)))

    state = TlaState(space=space, source_records=list(source_history),
                     target_records=records, c=c)

    while len(records) < budget:
        if strategy == "ucb_lcm":
            cell = ucb_select(state)
            u3 = _propose_ordinals(
                space, cell.pair, state.source_records, records, target_key, rng_acq
            )
            config = decode_ordinals(space, cell.pair, u3)
        else:
            config = _propose_full_lcm(space, state.source_records, records, target_key, rng_acq)
        _append(evaluator(config, arfe_ref, _next_seed_base(rng_seed, constants)))

    best = min(records, key=lambda r: r.objective_value)
    return best, records


def _propose_full_lcm(space, source_records, target_records, target_key, rng):
    # Comparison mode: joint LCM over all 5 encoded dimensions, no bandit.
    groups = {}
    for r in source_records:
        groups.setdefault(r.task.key(), []).append(r)
    target_group = groups.pop(target_key, []) + list(target_records)
    points = [np.array([encode(space, r.config) for r in groups[k]]) for k in groups]
    values = [np.log([r.objective_value for r in groups[k]]) for k in groups]
    points.append(np.array([encode(space, r.config) for r in target_group]).reshape(-1, 5))
    values.append(np.log([r.objective_value for r in target_group]))
    target_index = len(points) - 1
    model = lcm_fit(points, values, noise_floor=1e-6)
    f_best = float(np.min(values[target_index]))
    cands = np.vstack([lhs_unit_design(128, 5, rng), points[target_index]])
    means, variances = lcm_predict(model, target_index, cands)
    ei = expected_improvement(means, np.sqrt(variances), f_best)
    u = cands[int(np.argmin(means))] if np.max(ei) <= 1e-15 else cands[int(np.argmax(ei))]
    return decode(space, u)
