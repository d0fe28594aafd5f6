import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from schreier_expanders import ff_linalg as ff


def cofactor_det(rows, q):
    if len(rows) == 1:
        return rows[0][0] % q
    total = 0
    for j, a in enumerate(rows[0]):
        minor = [r[:j] + r[j + 1:] for r in rows[1:]]
        total += (-1) ** j * a * cofactor_det(minor, q)
    return total % q


def dense_product(a, v, q):
    return tuple(int(x) for x in (np.asarray(a) @ np.asarray(v)) % q)


@st.composite
def square(draw, q=None, k=None):
    q = q or draw(st.sampled_from([2, 3, 5, 7]))
    k = k or draw(st.integers(2, 5))
    flat = draw(st.lists(st.integers(0, q - 1), min_size=k * k, max_size=k * k))
    return ff.FieldMatrix.from_flat(q, k, flat)


def test_params_validation():
    with pytest.raises(ValueError):
        ff.FieldParams(2, 1)
    with pytest.raises(ValueError):
        ff.FieldParams(4, 3)
    assert ff.FieldParams(7, 5).n == 16806


def test_identity_determinant_and_inverse():
    for q, k in [(2, 3), (5, 4), (7, 2)]:
        eye = ff.FieldMatrix.identity(q, k)
        assert ff.determinant(eye) == 1
        assert ff.invert(eye) == eye


def test_repeated_row_is_singular():
    m = ff.FieldMatrix(5, ((1, 2, 3), (1, 2, 3), (0, 4, 1)))
    assert ff.determinant(m) == 0
    with pytest.raises(ff.SingularMatrixError):
        ff.invert(m)


@settings(max_examples=200, deadline=None)
@given(square())
def test_determinant_matches_cofactor(m):
    assert ff.determinant(m) == cofactor_det([list(r) for r in m.entries], m.q)


@settings(max_examples=200, deadline=None)
@given(square())
def test_inverse_roundtrip(m):
    if ff.determinant(m) == 0:
        return
    inv = ff.invert(m)
    assert (m @ inv) == ff.FieldMatrix.identity(m.q, m.k)
    assert ff.invert(inv) == m


def test_inverse_q2_k6():
    params = ff.FieldParams(2, 6)
    rng = np.random.default_rng(3)
    for _ in range(50):
        m = ff.random_invertible_matrix(params, rng)
        assert m @ ff.invert(m) == ff.FieldMatrix.identity(2, 6)


def test_toeplitz_fast_path_matches_dense():
    params = ff.FieldParams(2, 14)
    rng = np.random.default_rng(11)
    for _ in range(1000):
        t = ff.ToeplitzGenerator(2, tuple(rng.integers(0, 2, 27).tolist()))
        v = tuple(rng.integers(0, 2, 14).tolist())
        assert ff.mat_vec(t, v) == dense_product(t.expand().to_array(), v, 2)
    assert params.n == 16383


@settings(max_examples=100, deadline=None)
@given(st.sampled_from([2, 3, 7]), st.integers(2, 6), st.data())
def test_toeplitz_constant_diagonals(q, k, data):
    diags = data.draw(st.lists(st.integers(0, q - 1), min_size=2 * k - 1, max_size=2 * k - 1))
    a = ff.ToeplitzGenerator(q, tuple(diags)).expand().to_array()
    assert np.array_equal(a[:-1, :-1], a[1:, 1:])


def test_vertex_encoding():
    params = ff.FieldParams(3, 3)
    assert ff.vertex_index((1, 0, 0), 3) == 0
    assert ff.vertex_index((2, 2, 2), 3) == 3**3 - 2
    seen = set()
    for v in itertools.product(range(3), repeat=3):
        if any(v):
            i = ff.vertex_index(v, 3)
            assert ff.index_vertex(i, params) == v
            seen.add(i)
    assert seen == set(range(26))
    with pytest.raises(ValueError):
        ff.vertex_index((0, 0, 0), 3)
    with pytest.raises(ValueError):
        ff.index_vertex(26, params)


def test_vertex_encoding_bijective_exhaustive():
    for q, k in [(2, 13), (3, 8), (7, 4)]:
        params = ff.FieldParams(q, k)
        coords = ff.all_vertex_coords(params)
        assert np.array_equal(ff.coords_to_indices(coords, q), np.arange(params.n))


def test_invertible_acceptance_above_quarter():
    params = ff.FieldParams(2, 14)
    rng = np.random.default_rng(5)
    hits = sum(ff.determinant(ff.FieldMatrix.from_flat(2, 14, rng.integers(0, 2, 196).tolist())) != 0
               for _ in range(10_000))
    assert hits / 10_000 > 0.25
    assert params.k == 14


@pytest.mark.parametrize("q,k,lo,hi", [(2, 10, 0.47, 0.53), (7, 5, 0.84, 0.88)])
def test_toeplitz_raw_acceptance(q, k, lo, hi):
    rng = np.random.default_rng(17)
    diags = rng.integers(0, q, size=(10_000, 2 * k - 1))
    _, ok = ff.batch_inverse(ff.toeplitz_expand_batch(diags, k), q)
    assert lo <= ok.mean() <= hi


def test_samplers_deterministic():
    params = ff.FieldParams(2, 3)
    a = ff.random_invertible_matrix(params, np.random.default_rng(9))
    b = ff.random_invertible_matrix(params, np.random.default_rng(9))
    assert a == b
    p7 = ff.FieldParams(7, 5)
    assert ff.random_invertible_toeplitz(p7, np.random.default_rng(2)) == \
        ff.random_invertible_toeplitz(p7, np.random.default_rng(2))


def test_invertible_maps_nonzero_to_nonzero():
    params = ff.FieldParams(3, 4)
    rng = np.random.default_rng(1)
    m = ff.random_invertible_matrix(params, rng)
    inv = ff.invert(m)
    for i in range(params.n):
        v = ff.index_vertex(i, params)
        w = ff.mat_vec(m, v)
        assert any(w)
        assert ff.mat_vec(inv, w) == v


@pytest.mark.parametrize("q,k", [(2, 6), (2, 12), (3, 4), (5, 3)])
def test_action_table_is_permutation_and_matches_mat_vec(q, k):
    params = ff.FieldParams(q, k)
    rng = np.random.default_rng(q * 100 + k)
    for m in (ff.random_invertible_matrix(params, rng), ff.random_invertible_toeplitz(params, rng)):
        table = ff.action_table(m, params)
        assert np.array_equal(np.sort(table), np.arange(params.n))
        for i in rng.integers(0, params.n, 20).tolist():
            assert table[i] == ff.vertex_index(ff.mat_vec(m, ff.index_vertex(i, params)), q)
        assert np.array_equal(table, ff.action_table(m, params, packed=False))


def test_batch_inverse_matches_scalar():
    rng = np.random.default_rng(0)
    for q, k in [(2, 5), (3, 3), (7, 2)]:
        a = rng.integers(0, q, size=(400, k, k))
        inv, ok = ff.batch_inverse(a, q)
        for t in range(400):
            m = ff.FieldMatrix.from_flat(q, k, a[t].ravel().tolist())
            assert bool(ff.determinant(m)) == ok[t]
            if ok[t]:
                assert np.array_equal(ff.invert(m).to_array(), inv[t])


def test_generator_json_roundtrip():
    params = ff.FieldParams(7, 3)
    rng = np.random.default_rng(4)
    for m in (ff.random_invertible_matrix(params, rng), ff.random_invertible_toeplitz(params, rng)):
        assert ff.generator_from_json(ff.generator_to_json(m)) == m
    with pytest.raises(ValueError):
        ff.generator_from_json({"q": 2, "k": 2, "model": "gl", "entries": [0, 1, 2, 1]})
