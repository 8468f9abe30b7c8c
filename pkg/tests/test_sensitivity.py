import numpy as np
import pytest
from scipy.stats import qmc

from sketchtune import (
    Configuration,
    EvaluationRecord,
    TaskDescriptor,
    TuningSpace,
    analyze_tuning,
    lhs_sample,
    saltelli_sample,
    sobol_indices,
)

SPACE = TuningSpace()


def mc_variance_decomposition(f, dim, n_outer=400, n_inner=400, seed=0):
    """Brute-force S1/ST oracle: conditional-variance estimates by nested
    Monte Carlo.  S1_i = Var(E[f|u_i])/V, ST_i = E[Var(f|u_~i)]/V."""
    rng = np.random.default_rng(seed)
    base = rng.random((n_outer * n_inner, dim))
    V = np.var(f(base))
    s1 = np.empty(dim)
    st = np.empty(dim)
    for i in range(dim):
        # Var of conditional mean over u_i
        outer = rng.random(n_outer)
        cond_means = np.empty(n_outer)
        for j, ui in enumerate(outer):
            pts = rng.random((n_inner, dim))
            pts[:, i] = ui
            cond_means[j] = np.mean(f(pts))
        s1[i] = np.var(cond_means) / V
        # E of conditional variance over u_{~i}
        cond_vars = np.empty(n_outer)
        for j in range(n_outer):
            rest = rng.random(dim)
            pts = np.tile(rest, (n_inner, 1))
            pts[:, i] = rng.random(n_inner)
            cond_vars[j] = np.var(f(pts))
        st[i] = np.mean(cond_vars) / V
    return s1, st


def test_saltelli_counts_and_bounds():
    design = saltelli_sample(dim=2, base_n=4, seed=0)
    pts = design.all_points()
    assert pts.shape == (24, 2)  # base_n * (2 dim + 2)
    assert np.all(pts >= 0.0) and np.all(pts <= 1.0)


def test_saltelli_requires_power_of_two():
    with pytest.raises(ValueError):
        saltelli_sample(dim=2, base_n=5, seed=0)
    with pytest.raises(ValueError):
        saltelli_sample(dim=0, base_n=4, seed=0)


def test_saltelli_cross_blocks_structure():
    d = saltelli_sample(dim=3, base_n=8, seed=1)
    for i in range(3):
        for j in range(3):
            col_ab = d.ab[i][:, j]
            want = d.b[:, i] if j == i else d.a[:, j]
            np.testing.assert_array_equal(col_ab, want)
            col_ba = d.ba[i][:, j]
            want = d.a[:, i] if j == i else d.b[:, j]
            np.testing.assert_array_equal(col_ba, want)


def test_saltelli_discrepancy_near_reference_generator():
    # The A block must be genuinely low-discrepancy: within 2x of a fresh
    # scipy Sobol sample's star discrepancy (and far below iid uniform).
    design = saltelli_sample(dim=3, base_n=128, seed=2)
    ours = qmc.discrepancy(design.a)
    reference = qmc.discrepancy(qmc.Sobol(d=3, scramble=True, seed=99).random_base2(7))
    assert ours <= 2 * reference


def test_single_variable_function():
    rep = sobol_indices(lambda u: u[:, 0], dim=5, base_n=512, seed=3)
    assert rep.s1[0] == pytest.approx(1.0, abs=0.05)
    assert rep.st[0] == pytest.approx(1.0, abs=0.05)
    np.testing.assert_allclose(rep.s1[1:], 0.0, atol=0.05)
    np.testing.assert_allclose(rep.st[1:], 0.0, atol=0.05)


def test_additive_equal_variance():
    rep = sobol_indices(lambda u: u[:, 0] + u[:, 1], dim=4, base_n=512, seed=4)
    assert rep.s1[0] == pytest.approx(0.5, abs=0.05)
    assert rep.s1[1] == pytest.approx(0.5, abs=0.05)
    assert rep.s1.sum() == pytest.approx(1.0, abs=0.05)
    np.testing.assert_allclose(rep.st[:2] - rep.s1[:2], 0.0, atol=0.05)


def test_interaction_function_matches_oracles():
    # f = u1 * u2: analytically V = 7/144, S1 = 3/7, ST = 4/7.
    f = lambda u: u[:, 0] * u[:, 1]
    rep = sobol_indices(f, dim=3, base_n=1024, seed=5)
    assert rep.st[0] - rep.s1[0] > 0
    assert rep.s1[0] == pytest.approx(3 / 7, abs=0.05)
    assert rep.st[0] == pytest.approx(4 / 7, abs=0.05)
    mc_s1, mc_st = mc_variance_decomposition(f, dim=3, seed=6)
    assert rep.s1[0] == pytest.approx(mc_s1[0], abs=0.05)
    assert rep.st[0] == pytest.approx(mc_st[0], abs=0.05)


def test_st_at_least_s1_minus_noise():
    rep = sobol_indices(lambda u: np.sin(3 * u[:, 0]) + u[:, 1] * u[:, 2], dim=3,
                        base_n=512, seed=7)
    assert np.all(rep.st >= rep.s1 - 0.02)


def test_affine_invariance():
    f = lambda u: u[:, 0] + 0.5 * u[:, 1] * u[:, 2]
    r1 = sobol_indices(f, dim=3, base_n=256, seed=8)
    r2 = sobol_indices(lambda u: -3.0 + 7.5 * f(u), dim=3, base_n=256, seed=8)
    np.testing.assert_allclose(r1.s1, r2.s1, atol=1e-10)
    np.testing.assert_allclose(r1.st, r2.st, atol=1e-10)


def test_zero_variance_flagged():
    rep = sobol_indices(lambda u: np.full(u.shape[0], 3.0), dim=4, base_n=64, seed=9)
    assert rep.degenerate
    np.testing.assert_array_equal(rep.s1, 0.0)
    np.testing.assert_array_equal(rep.st, 0.0)


def test_scalar_function_accepted():
    rep = sobol_indices(lambda u: float(u[0]), dim=2, base_n=64, seed=10)
    assert rep.s1[0] == pytest.approx(1.0, abs=0.1)


# ---------------------------------------------------------------------------
# analyze_tuning on synthetic records (no solver runs)

def synthetic_records(f, count, seed):
    rng = np.random.default_rng(seed)
    records = []
    task = TaskDescriptor(m=100, n=10, label="GA")
    from sketchtune import encode

    for config in lhs_sample(SPACE, count, seed):
        u = encode(SPACE, config)
        obj = float(np.exp(f(u)))
        records.append(
            EvaluationRecord(
                task=task, config=config, seeds=[0], mean_wall_clock=obj,
                mean_arfe=1e-7, failed=False, objective_value=obj,
            )
        )
    return records


def test_analyze_tuning_recovers_dominant_parameter():
    # Objective depends strongly on sampling_factor (dim 2), weakly elsewhere.
    records = synthetic_records(lambda u: 2.0 * u[2] + 0.05 * u[3], 60, seed=11)
    rep = analyze_tuning(records, SPACE, base_n=256, seed=12)
    assert rep.parameters[int(np.argmax(rep.st))] == "sampling_factor"
    assert rep.parameters == (
        "sap_algorithm", "sketching_operator", "sampling_factor", "vec_nnz",
        "safety_factor",
    )


def test_analyze_tuning_constant_function_near_zero():
    records = synthetic_records(lambda u: 0.0, 40, seed=13)
    rep = analyze_tuning(records, SPACE, base_n=128, seed=14)
    assert np.all(np.abs(rep.s1) <= 0.05) and np.all(np.abs(rep.st) <= 0.05)


def test_analyze_tuning_stability_across_seeds():
    records = synthetic_records(lambda u: 1.5 * u[2] + 0.5 * u[0], 80, seed=15)
    reports = [analyze_tuning(records, SPACE, base_n=256, seed=s) for s in (1, 2, 3)]
    # Index estimates agree within their confidence bands.
    for a in reports:
        for b in reports:
            assert np.all(np.abs(a.st - b.st) <= a.st_conf + b.st_conf + 0.05)


def test_analyze_tuning_insufficient_records():
    records = synthetic_records(lambda u: u[2], 10, seed=16)
    with pytest.raises(ValueError):
        analyze_tuning(records, SPACE)


def test_report_csv(tmp_path):
    rep = sobol_indices(lambda u: u[:, 0], dim=2, base_n=64, seed=17)
    path = tmp_path / "sens.csv"
    rep.to_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "parameter,S1,S1_conf,ST,ST_conf"
    assert len(lines) == 3
