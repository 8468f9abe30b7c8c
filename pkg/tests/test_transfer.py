import math

import numpy as np
import pytest

from sketchtune import (
    Configuration,
    ConstantParams,
    EvaluationRecord,
    TaskDescriptor,
    TlaState,
    TuningSpace,
    cell_rewards,
    generate_problem,
    random_search,
    source_best_config,
    tla_tune,
    ucb_scores,
    ucb_select,
)

SPACE = TuningSpace()
FAST = ConstantParams(num_pilots=2, num_repeats=1)
CELLS = SPACE.categorical_cells()


def make_record(cell, objective, task=None, sf=3.0, nnz=10, safety=0, ts=0.0):
    return EvaluationRecord(
        task=task or TaskDescriptor(m=100, n=10, label="GA"),
        config=Configuration(cell[0], cell[1], sf, nnz, safety),
        seeds=[0],
        mean_wall_clock=objective,
        mean_arfe=1e-7,
        failed=False,
        objective_value=objective,
        timestamp=ts,
    )


# ---------------------------------------------------------------------------
# ucb_scores: the pure scoring rule

def test_ucb_worked_arithmetic():
    # Direct formula evaluation: 0.8 + 4 sqrt(ln 10 / 8) = 2.9460 and
    # 0.6 + 4 sqrt(ln 10 / 2) = 4.8919; cell 2 wins.
    scores = ucb_scores([0.8, 0.6], [8, 2], t=10, c=4.0)
    assert scores[0] == pytest.approx(0.8 + 4 * math.sqrt(math.log(10) / 8), abs=1e-12)
    assert scores[1] == pytest.approx(0.6 + 4 * math.sqrt(math.log(10) / 2), abs=1e-12)
    assert scores[0] == pytest.approx(2.947, abs=2e-3)
    assert scores[1] == pytest.approx(4.893, abs=2e-3)
    assert np.argmax(scores) == 1


def test_ucb_c_zero_pure_exploitation():
    scores = ucb_scores([-0.5, -0.6], [4, 4], t=8, c=0.0)
    assert np.argmax(scores) == 0


def test_ucb_bonus_prefers_less_pulled():
    scores = ucb_scores([0.7, 0.7], [5, 1], t=6, c=1.0)
    assert np.argmax(scores) == 1


def test_ucb_unseen_cell_priority():
    scores = ucb_scores([0.9, 0.1], [3, 0], t=3, c=1.0)
    assert math.isinf(scores[1]) and np.argmax(scores) == 1


def test_ucb_shift_invariance():
    r = np.array([0.2, 0.5, 0.9])
    n = [3, 2, 4]
    s1 = ucb_scores(r, n, t=9, c=2.0)
    s2 = ucb_scores(r + 10.0, n, t=9, c=2.0)
    assert np.argmax(s1) == np.argmax(s2)


# ---------------------------------------------------------------------------
# cell rewards and selection

def test_cell_rewards_normalized_and_ordered():
    records = (
        [make_record(CELLS[0], 0.001) for _ in range(3)]
        + [make_record(CELLS[1], 1.0) for _ in range(3)]
        + [make_record(CELLS[2], 0.1) for _ in range(3)]
    )
    rewards, counts = cell_rewards(SPACE, records)
    assert counts.tolist() == [3, 3, 3, 0, 0, 0]
    # Fast cell gets reward 1, slow cell 0.
    assert rewards[0] == pytest.approx(1.0)
    assert rewards[1] == pytest.approx(0.0)
    assert 0.0 < rewards[2] < 1.0


def test_ucb_select_unseen_first_in_declared_order():
    state = TlaState(space=SPACE, source_records=[make_record(CELLS[0], 0.5)],
                     target_records=[], c=4.0)
    cell = ucb_select(state)
    assert cell.pair == CELLS[1]  # first never-pulled cell in declared order


def test_ucb_select_c_zero_returns_reward_argmax():
    source = []
    for i, cell in enumerate(CELLS):
        source += [make_record(cell, 0.1 * (i + 1)) for _ in range(2)]
    state = TlaState(space=SPACE, source_records=source, target_records=[], c=0.0)
    assert ucb_select(state).pair == CELLS[0]


# ---------------------------------------------------------------------------
# source best

def test_source_best_min_objective_tie_by_timestamp():
    recs = [
        make_record(CELLS[0], 0.5, ts=1.0, nnz=5),
        make_record(CELLS[1], 0.2, ts=3.0, nnz=7),
        make_record(CELLS[2], 0.2, ts=2.0, nnz=9),
        make_record(CELLS[3], 0.9, ts=0.0, nnz=11),
    ]
    best = source_best_config(recs)
    assert best.vec_nnz == 9  # the earlier of the two 0.2s


def test_source_best_empty_raises():
    with pytest.raises(ValueError):
        source_best_config([])


# ---------------------------------------------------------------------------
# tla_tune sessions

@pytest.fixture(scope="module")
def target_problem():
    return generate_problem("GA", 500, 12, seed=30)


@pytest.fixture(scope="module")
def source_records():
    src_problem = generate_problem("GA", 250, 12, seed=31)
    _, records = random_search(src_problem, SPACE, FAST, budget=14, seed=32)
    return records


def test_tla_budget_two_is_reference_plus_source_best(target_problem, source_records):
    best, records = tla_tune(target_problem, source_records, SPACE, FAST, budget=2, seed=33)
    assert len(records) == 2
    assert records[0].config == FAST.ref_config
    assert records[1].config == source_best_config(source_records)


def test_tla_validations(target_problem, source_records):
    with pytest.raises(ValueError):
        tla_tune(target_problem, [], SPACE, FAST, budget=5, seed=0)
    with pytest.raises(ValueError):
        tla_tune(target_problem, source_records, SPACE, FAST, budget=1, seed=0)
    with pytest.raises(ValueError):
        tla_tune(target_problem, source_records, SPACE, FAST, budget=5, seed=0,
                 strategy="bogus")


def test_tla_unseen_cells_explored_first(target_problem):
    # Source concentrated in one cell: the five empty cells carry infinite
    # UCB bonus and must all be visited among the first post-warm-start picks.
    src_problem = generate_problem("GA", 250, 12, seed=34)
    src = []
    _, base = random_search(src_problem, SPACE, FAST, budget=3, seed=35)
    for r in base:
        r.config = Configuration(CELLS[0][0], CELLS[0][1], 3.0, 10, 0)
        src.append(r)
    best, records = tla_tune(target_problem, src, SPACE, FAST, budget=8, seed=36)
    post = records[2:]
    visited = {(r.config.sap_algorithm, r.config.sketching_operator) for r in post}
    empty_cells = set(CELLS[1:])
    assert empty_cells <= visited | {CELLS[0]}
    # all six post-warm-start picks cover the five empty cells
    assert len(empty_cells - visited) == 0


def test_tla_warm_start_never_worse_than_source_best(target_problem, source_records):
    best, records = tla_tune(target_problem, source_records, SPACE, FAST, budget=4, seed=37)
    assert best.objective_value <= records[1].objective_value


def test_tla_replay(target_problem, source_records):
    _, r1 = tla_tune(target_problem, source_records, SPACE, FAST, budget=6, seed=38)
    _, r2 = tla_tune(target_problem, source_records, SPACE, FAST, budget=6, seed=38,
                     replay=r1)
    assert [r.config for r in r1] == [r.config for r in r2]
    assert [r.mean_arfe for r in r1] == [r.mean_arfe for r in r2]


def test_tla_lcm_all_comparison_mode(target_problem, source_records):
    best, records = tla_tune(target_problem, source_records, SPACE, FAST, budget=5,
                             seed=39, strategy="lcm_all")
    assert len(records) == 5
    assert records[0].config == FAST.ref_config


def test_tla_cell_restriction_is_structural():
    # The model for a cell consumes only that cell's records: rewards/counts
    # for untouched cells stay empty even with rich other-cell data.
    records = [make_record(CELLS[0], 0.5), make_record(CELLS[0], 0.4)]
    rewards, counts = cell_rewards(SPACE, records)
    assert counts[1:].sum() == 0
    from sketchtune.transfer import _cell_records

    assert _cell_records(records, CELLS[1]) == []
    assert len(_cell_records(records, CELLS[0])) == 2
