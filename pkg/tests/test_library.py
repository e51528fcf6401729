import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdediscovery import basis as B
from pdediscovery import library as L
from pdediscovery.basis import DerivSpec
from pdediscovery.library import Covariate, StateDeriv

BURGERS_TERMS = [
    "u", "u^2", "u^3", "u_x", "u u_x", "u^2 u_x", "u^3 u_x", "u_xx", "u u_xx",
    "u^2 u_xx", "u^3 u_xx", "u_xxx", "u u_xxx", "u^2 u_xxx", "u^3 u_xxx",
]  # fmt: skip
HEAT_TERMS = BURGERS_TERMS[:11] + [
    "u_y", "u u_y", "u^2 u_y", "u^3 u_y", "u_xy", "u u_xy", "u^2 u_xy", "u^3 u_xy",
    "u_yy", "u u_yy", "u^2 u_yy", "u^3 u_yy",
]  # fmt: skip
RD_TERMS = [
    "u", "u^2", "u^3", "v", "v^2", "v^3", "u v", "u^2 v", "u v^2", "u u_x", "u u_y",
    "v v_x", "v v_y", "u_x", "u_y", "u_xx", "u_yy", "u_xy", "v_x", "v_y", "v_xx", "v_yy", "v_xy",
]  # fmt: skip


def rd_library():
    return L.standard_poly_deriv_library(
        2,
        3,
        ["u_x", "u_y", "u_xx", "u_yy", "u_xy", "v_x", "v_y", "v_xx", "v_yy", "v_xy"],
        interaction_power=1,
        interaction_derivs=["u_x", "u_y", "v_x", "v_y"],
        cross_interactions=False,
    )


class TestStandardLibraries:
    def test_burgers(self):
        lib = L.standard_poly_deriv_library(1, 3, ["u_x", "u_xx", "u_xxx"])
        assert lib.names == BURGERS_TERMS

    def test_heat(self):
        lib = L.standard_poly_deriv_library(1, 3, ["u_x", "u_xx", "u_y", "u_xy", "u_yy"])
        assert lib.names == HEAT_TERMS

    def test_predator_prey_set(self):
        lib = rd_library()
        assert lib.D == 23
        assert set(lib.names) == set(RD_TERMS)

    def test_predator_prey_from_grammar(self):
        lib = L.parse_library(RD_TERMS, ("u", "v"))
        assert lib.names == RD_TERMS

    def test_covariate_interactions(self):
        lib = L.standard_poly_deriv_library(1, 1, ["u_x"], covariates=["f_y"])
        assert lib.names == ["u", "u_x", "u u_x", "u_x f_y"]

    def test_bad_power(self):
        with pytest.raises(L.LibraryError):
            L.standard_poly_deriv_library(1, 0, ["u_x"])


class TestGrammar:
    @pytest.mark.parametrize(
        "text,name",
        [
            ("u^2*u_x", "u^2 u_x"),
            ("u_x * u * u", "u^2 u_x"),
            ("u_x u^2", "u^2 u_x"),
            ("v*u", "u v"),
            ("u_yx", "u_xy"),
            ("f_y*u_x", "u_x f_y"),
        ],
    )
    def test_canonical(self, text, name):
        assert L.parse_term(text, ("u", "v"), ("f_y",)).name == name

    @pytest.mark.parametrize(
        "text,pos",
        [("u*", 2), ("*u", 0), ("u^", 1), ("q", 0), ("u_xz", 0), ("u + v", 2), ("^2", 0)],
    )
    def test_errors_carry_position(self, text, pos):
        with pytest.raises(L.LibraryParseError) as info:
            L.parse_term(text, ("u", "v"))
        assert info.value.position == pos

    def test_permuted_factors_collapse(self):
        with pytest.raises(L.LibraryError, match="duplicate"):
            L.parse_library(["u*u_x", "u_x*u"])

    def test_unknown_covariate_index(self):
        with pytest.raises(L.LibraryError):
            L.FeatureLibrary([L.make_term([Covariate(1)])], ("u",), ("a",))


def setup_2d(N=2, seed=0, P=(5, 4), Q=5, degree=3):
    rng = np.random.default_rng(seed)
    xs = np.linspace(0, 1, 7)
    ys = np.linspace(0, 2, 6)
    sb = B.SpatialBasis(B.make_bspline(0, 1, P[0], degree), xs, B.make_bspline(0, 2, P[1], degree), ys)
    tb = B.TemporalBasis(B.make_bspline(0, 1, Q, degree), np.linspace(0, 1, 8))
    derivs = [DerivSpec(a, b, c) for a in range(3) for b in range(3) for c in range(2) if a + b <= 2]
    ev = B.evaluate_bases(sb, tb, N, derivs)
    A = rng.standard_normal((N, ev.P * ev.Q))
    cov = rng.standard_normal((ev.S, ev.T, 1))
    return ev, A, cov


class TestEvaluation:
    def test_zero_field(self):
        ev, A, cov = setup_2d()
        t = L.parse_term("u*u_x", ("u", "v"))
        assert L.eval_term(t, np.zeros_like(A), ev, cov, 3, 2) == 0.0

    def test_matches_reconstructed_fields(self):
        ev, A, cov = setup_2d()
        lib = L.parse_library(["u^2", "u v_xy", "u_t v", "v^3 u_yy", "u_x w0"], ("u", "v"), ("w0",))
        fld = {d: B.reconstruct_field(A, ev, d) for d in [(0, 0, 0), (1, 1, 0), (0, 0, 1), (0, 2, 0), (1, 0, 0)]}
        pts = [(s, t) for s in range(ev.S) for t in range(ev.T)]
        F = L.eval_library(lib, A, ev, cov, pts)
        s_idx, t_idx = np.array(pts).T
        u, v = fld[(0, 0, 0)][s_idx, t_idx, 0], fld[(0, 0, 0)][s_idx, t_idx, 1]
        expect = [
            u**2,
            u * fld[(1, 1, 0)][s_idx, t_idx, 1],
            fld[(0, 0, 1)][s_idx, t_idx, 0] * v,
            v**3 * fld[(0, 2, 0)][s_idx, t_idx, 0],
            fld[(1, 0, 0)][s_idx, t_idx, 0] * cov[s_idx, t_idx, 0],
        ]
        np.testing.assert_allclose(F, np.array(expect), rtol=1e-12, atol=1e-12)

    def test_covariate_pass_through(self):
        ev, A, cov = setup_2d()
        lib = L.parse_library(["w0"], ("u", "v"), ("w0",))
        F = L.eval_library(lib, A, ev, cov, [(4, 3)])
        assert F[0, 0] == cov[4, 3, 0]

    def test_empty_and_duplicate_points(self):
        ev, A, cov = setup_2d()
        lib = L.parse_library(["u", "u v"], ("u", "v"))
        assert L.eval_library(lib, A, ev, cov, []).shape == (2, 0)
        F = L.eval_library(lib, A, ev, cov, [(1, 2), (1, 2)])
        np.testing.assert_array_equal(F[:, 0], F[:, 1])

    @given(st.permutations(list(range(10))))
    @settings(max_examples=20, deadline=None)
    def test_point_permutation(self, perm):
        ev, A, cov = setup_2d()
        lib = L.parse_library(["u v_x", "u^2"], ("u", "v"))
        pts = [(s, s % ev.T) for s in range(10)]
        F = L.eval_library(lib, A, ev, cov, pts)
        Fp = L.eval_library(lib, A, ev, cov, [pts[i] for i in perm])
        np.testing.assert_array_equal(Fp, F[:, perm])

    def test_grid_values_match_pointwise(self):
        ev, A, cov = setup_2d()
        lib = L.parse_library(["u v_x", "u_t", "w0 u"], ("u", "v"), ("w0",))
        Fg = L.library_matrix(lib, L.grid_factor_values(lib, A, ev, cov))
        pts = [(s, t) for t in range(ev.T) for s in range(ev.S)]
        np.testing.assert_allclose(Fg.T, L.eval_library(lib, A, ev, cov, pts), rtol=1e-12)


def fd_grad(term, A, ev, cov, s, t, h=1e-6):
    G = np.zeros_like(A)
    for idx in np.ndindex(A.shape):
        Ap, Am = A.copy(), A.copy()
        Ap[idx] += h
        Am[idx] -= h
        G[idx] = (L.eval_term(term, Ap, ev, cov, s, t) - L.eval_term(term, Am, ev, cov, s, t)) / (2 * h)
    return G


class TestGradient:
    @pytest.mark.parametrize("text", ["u", "u^2", "u v", "u^2 v_xy", "u u_x", "v_t u_yy", "u_x w0", "u^3 v^2"])
    def test_finite_differences(self, text):
        ev, A, cov = setup_2d(P=(4, 4), Q=4)
        A = A * 0.5
        term = L.parse_term(text, ("u", "v"), ("w0",))
        G = L.grad_term(term, A, ev, cov, 3, 4)
        F = fd_grad(term, A, ev, cov, 3, 4)
        assert np.linalg.norm(G - F) / max(np.linalg.norm(F), 1e-12) < 1e-5

    def test_linear_term_is_basis_vector(self):
        ev, A, cov = setup_2d()
        term = L.parse_term("v", ("u", "v"))
        G = L.grad_term(term, A, ev, cov, 5, 2)
        b = np.kron(ev.get_phi(0)[2], ev.get_psi((0, 0, 0))[5])
        np.testing.assert_allclose(G[1], b)
        np.testing.assert_array_equal(G[0], 0.0)
        np.testing.assert_allclose(L.grad_term(term, 3 * A, ev, cov, 5, 2), G)

    def test_square_is_twice_value(self):
        ev, A, cov = setup_2d()
        term = L.parse_term("u^2", ("u", "v"))
        u = L.eval_term(L.parse_term("u"), A, ev, cov, 2, 3)
        b = np.kron(ev.get_phi(0)[3], ev.get_psi((0, 0, 0))[2])
        np.testing.assert_allclose(L.grad_term(term, A, ev, cov, 2, 3)[0], 2 * u * b)

    def test_covariate_has_no_gradient(self):
        ev, A, cov = setup_2d()
        term = L.make_term([Covariate(0)], covariate_names=("w0",))
        np.testing.assert_array_equal(L.grad_term(term, A, ev, cov, 1, 1), 0.0)


class TestConditionNumber:
    def test_orthogonal_design(self):
        # columns orthogonal to each other and to the constant have identity correlation
        X = np.column_stack([np.ones(200), np.random.default_rng(1).standard_normal((200, 4))])
        H = np.linalg.qr(X)[0][:, 1:]
        assert L.correlation_condition_number(H) == pytest.approx(1.0, abs=1e-10)

    def test_duplicate_column(self):
        x = np.random.default_rng(0).standard_normal((50, 1))
        assert L.correlation_condition_number(np.hstack([x, x])) == np.inf

    def test_zero_variance_warns(self):
        with pytest.warns(UserWarning):
            assert L.correlation_condition_number(np.ones((10, 2))) == np.inf

    def test_needs_more_points_than_terms(self):
        ev, A, cov = setup_2d()
        lib = L.parse_library(["u", "v", "u v"], ("u", "v"))
        with pytest.raises(L.LibraryError):
            L.condition_number(lib, A, ev, cov, [(0, 0), (1, 1)])


def test_factor_sort_key_orders_state_before_covariates():
    assert StateDeriv(0).sort_key() < Covariate(0).sort_key()
