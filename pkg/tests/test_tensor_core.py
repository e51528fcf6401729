import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdediscovery import tensor_core as tc

dims = st.tuples(st.integers(1, 5), st.integers(1, 5), st.integers(1, 4))


def rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


def mode_unfold_oracle(t, mode):
    """Kolda-Bader unfolding written with explicit loops."""
    shape = t.shape
    axis = mode - 1
    others = [k for k in range(3) if k != axis]
    cols = shape[others[0]] * shape[others[1]]
    out = np.empty((shape[axis], cols))
    for idx in np.ndindex(shape):
        j = idx[others[0]] + shape[others[0]] * idx[others[1]]
        out[idx[axis], j] = t[idx]
    return out


@given(dims, st.integers(0, 2**32 - 1))
def test_flatten_round_trip(d, seed):
    t = np.random.default_rng(seed).standard_normal(d)
    np.testing.assert_array_equal(tc.unflatten(tc.flatten(t), d), t)


def test_flatten_is_space_fastest():
    t = np.arange(2 * 3 * 2).reshape((2, 3, 2), order="F")
    assert list(tc.flatten(t)) == list(range(12))
    assert t[1, 0, 0] == 1 and t[0, 1, 0] == 2 and t[0, 0, 1] == 6


def test_unflatten_wrong_size():
    with pytest.raises(ValueError):
        tc.unflatten(np.zeros(5), (2, 2, 2))


@given(dims, st.integers(0, 2**32 - 1))
def test_mode3_matches_loop_oracle(d, seed):
    t = np.random.default_rng(seed).standard_normal(d)
    m = tc.mode3_matricize(t)
    np.testing.assert_array_equal(m, mode_unfold_oracle(t, 3))
    np.testing.assert_array_equal(tc.mode3_refold(m, d[0], d[1]), t)


def test_mode3_column_order():
    S, T, N = 3, 4, 2
    t = np.random.default_rng(0).standard_normal((S, T, N))
    m = tc.mode3_matricize(t)
    for s in range(S):
        for k in range(T):
            np.testing.assert_array_equal(m[:, k * S + s], t[s, k, :])


@settings(max_examples=50)
@given(dims, st.integers(1, 4), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_n_mode_product_oracle(d, rows, mode, seed):
    rng = np.random.default_rng(seed)
    t = rng.standard_normal(d)
    B = rng.standard_normal((rows, d[mode - 1]))
    z = tc.n_mode_product(t, B, mode)
    # Z_(n) = B X_(n)
    assert rel(mode_unfold_oracle(z, mode), B @ mode_unfold_oracle(t, mode)) < 1e-12


def test_n_mode_product_shape_mismatch():
    with pytest.raises(ValueError):
        tc.n_mode_product(np.zeros((2, 3, 4)), np.zeros((5, 2)), 2)
    with pytest.raises(ValueError):
        tc.n_mode_product(np.zeros((2, 3, 4)), np.zeros((5, 2)), 4)


def test_n_mode_identity_is_noop():
    t = np.random.default_rng(1).standard_normal((3, 4, 2))
    for mode in (1, 2, 3):
        np.testing.assert_array_equal(tc.n_mode_product(t, np.eye(t.shape[mode - 1]), mode), t)


@settings(max_examples=50)
@given(
    st.tuples(st.integers(1, 4), st.integers(1, 4), st.integers(1, 3)),
    st.tuples(st.integers(1, 5), st.integers(1, 5), st.integers(1, 3)),
    st.integers(0, 2**32 - 1),
)
def test_tucker_mode3_identity(core_dims, out_dims, seed):
    rng = np.random.default_rng(seed)
    P, Q, R = core_dims
    S, T, N = out_dims
    G = rng.standard_normal(core_dims)
    Psi, Phi, Theta = rng.standard_normal((S, P)), rng.standard_normal((T, Q)), rng.standard_normal((N, R))
    Y = tc.tucker_reconstruct(G, Psi, Phi, Theta)
    rhs = Theta @ tc.mode3_matricize(G) @ tc.kronecker(Phi, Psi).T
    assert rel(tc.mode3_matricize(Y), rhs) < 1e-12
    chained = tc.n_mode_product(tc.n_mode_product(tc.n_mode_product(G, Psi, 1), Phi, 2), Theta, 3)
    assert rel(Y, chained) < 1e-12


def test_kronecker_matches_definition():
    a = np.arange(6.0).reshape(2, 3)
    b = np.arange(4.0).reshape(2, 2) + 1
    k = tc.kronecker(a, b)
    for i in range(2):
        for j in range(3):
            np.testing.assert_array_equal(k[2 * i : 2 * i + 2, 2 * j : 2 * j + 2], a[i, j] * b)


def test_tucker_shape_check():
    with pytest.raises(ValueError):
        tc.tucker_reconstruct(np.zeros((2, 2, 1)), np.zeros((3, 3)), np.zeros((3, 2)), np.zeros((1, 1)))
