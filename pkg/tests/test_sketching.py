import numpy as np
import pytest

from sketchtune import apply, apply_vector, sample_operator


def densify_multiply_oracle(S, A):
    return S.densify() @ A


def check_invariants(S):
    if S.kind == "SJLT":
        ngroups, axis_len = S.m, S.d
        scale = 1.0 / np.sqrt(S.k)
    else:
        ngroups, axis_len = S.d, S.m
        scale = np.sqrt(S.m / (S.k * S.d))
    assert S.indices.shape == (ngroups, S.k)
    for g in range(ngroups):
        row = S.indices[g]
        assert len(set(row.tolist())) == S.k
        assert row.min() >= 0 and row.max() < axis_len
    np.testing.assert_allclose(np.abs(S.values), scale, rtol=0, atol=0)


@pytest.mark.parametrize("kind", ["SJLT", "LessUniform"])
@pytest.mark.parametrize("k", [1, 3, 7])
def test_sparsity_invariants(kind, k):
    for seed in range(5):
        S = sample_operator(kind, d=7, m=23, k=k, seed=seed)
        check_invariants(S)
        dense = S.densify()
        if kind == "SJLT":
            assert np.all((dense != 0).sum(axis=0) == min(k, 7))
        else:
            assert np.all((dense != 0).sum(axis=1) == min(k, 23))


def test_sjlt_k_equals_d_is_dense_sign_matrix():
    S = sample_operator("SJLT", d=4, m=10, k=4, seed=0)
    dense = S.densify()
    np.testing.assert_allclose(np.abs(dense), 0.5)
    np.testing.assert_allclose(np.linalg.norm(dense, axis=0), 1.0)


def test_lessuniform_k_equals_m_is_dense():
    S = sample_operator("LessUniform", d=3, m=6, k=6, seed=0)
    dense = S.densify()
    np.testing.assert_allclose(np.abs(dense), np.sqrt(1.0 / 3.0))


def test_lessuniform_k1_row_sparsity():
    S = sample_operator("LessUniform", d=5, m=100, k=1, seed=0)
    dense = S.densify()
    assert np.count_nonzero(dense) == 5
    assert np.all((dense != 0).sum(axis=1) == 1)


def test_k_clamped():
    assert sample_operator("SJLT", d=3, m=10, k=50, seed=0).k == 3
    assert sample_operator("LessUniform", d=3, m=10, k=50, seed=0).k == 10


def test_invalid_arguments():
    with pytest.raises(ValueError):
        sample_operator("SJLT", d=0, m=10, k=1, seed=0)
    with pytest.raises(ValueError):
        sample_operator("LessUniform", d=5, m=-1, k=1, seed=0)
    with pytest.raises(ValueError):
        sample_operator("SJLT", d=5, m=10, k=0, seed=0)
    with pytest.raises(ValueError):
        sample_operator("Gaussian", d=5, m=10, k=1, seed=0)


def test_determinism():
    a = sample_operator("SJLT", d=6, m=40, k=3, seed=42)
    b = sample_operator("SJLT", d=6, m=40, k=3, seed=42)
    np.testing.assert_array_equal(a.indices, b.indices)
    np.testing.assert_array_equal(a.values, b.values)
    c = sample_operator("SJLT", d=6, m=40, k=3, seed=43)
    assert not (
        np.array_equal(a.indices, c.indices) and np.array_equal(a.values, c.values)
    )


@pytest.mark.parametrize("kind", ["SJLT", "LessUniform"])
def test_apply_identity_gives_densification(kind):
    S = sample_operator(kind, d=4, m=12, k=2, seed=1)
    np.testing.assert_allclose(apply(S, np.eye(12)), S.densify(), atol=0)


def test_sjlt_columns_unit_norm():
    S = sample_operator("SJLT", d=9, m=15, k=4, seed=2)
    for j in range(15):
        e = np.zeros(15)
        e[j] = 1.0
        assert np.linalg.norm(apply_vector(S, e)) == pytest.approx(1.0)


@pytest.mark.parametrize("kind", ["SJLT", "LessUniform"])
def test_apply_matches_dense_oracle(kind):
    rng = np.random.default_rng(3)
    A = rng.standard_normal((50, 5))
    for seed in range(5):
        S = sample_operator(kind, d=11, m=50, k=4, seed=seed)
        got = apply(S, A)
        want = densify_multiply_oracle(S, A)
        err = np.linalg.norm(got - want, "fro") / np.linalg.norm(want, "fro")
        assert err <= 1e-12


def test_apply_vector_cases():
    S = sample_operator("SJLT", d=6, m=20, k=3, seed=4)
    np.testing.assert_array_equal(apply_vector(S, np.zeros(20)), np.zeros(6))
    e = np.zeros(20)
    e[7] = 1.0
    np.testing.assert_allclose(apply_vector(S, e), S.densify()[:, 7], atol=0)
    rng = np.random.default_rng(5)
    v = rng.standard_normal(20)
    np.testing.assert_allclose(apply_vector(S, v), S.densify() @ v, rtol=1e-12)


def test_apply_shape_mismatch():
    S = sample_operator("SJLT", d=4, m=10, k=2, seed=0)
    with pytest.raises(ValueError):
        apply(S, np.zeros((11, 3)))
    with pytest.raises(ValueError):
        apply_vector(S, np.zeros(11))


@pytest.mark.parametrize("kind", ["SJLT", "LessUniform"])
@pytest.mark.parametrize("k", [1, 4, None])
def test_isometry_in_expectation(kind, k):
    # Sample mean of ||S v||^2 over many operators concentrates at 1 for any
    # fixed unit vector.
    d, m = 8, 30
    k_eff = (d if kind == "SJLT" else m) if k is None else k
    rng = np.random.default_rng(6)
    v = rng.standard_normal(m)
    v /= np.linalg.norm(v)
    n_ops = 400
    vals = np.empty(n_ops)
    for i in range(n_ops):
        vals[i] = np.linalg.norm(apply_vector(sample_operator(kind, d, m, k_eff, seed=i), v)) ** 2
    se = vals.std(ddof=1) / np.sqrt(n_ops)
    assert abs(vals.mean() - 1.0) <= 5 * se


def test_magnitude_equality_sjlt_kd_lessuniform_km():
    d, m = 5, 12
    sj = sample_operator("SJLT", d=d, m=m, k=d, seed=7)
    lu = sample_operator("LessUniform", d=d, m=m, k=m, seed=8)
    # 1/sqrt(k) = 1/sqrt(d) and sqrt(m/(k d)) = sqrt(1/d) coincide.
    assert np.abs(sj.values).flat[0] == pytest.approx(np.abs(lu.values).flat[0])
    np.testing.assert_allclose(np.abs(sj.densify())[np.abs(sj.densify()) > 0],
                               np.abs(lu.densify())[np.abs(lu.densify()) > 0])
