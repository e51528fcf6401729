"""Gibbs sampler for the hierarchical equation-discovery model.

Model at grid point ``(s, t)`` with ``B0 = phi(t) (x) psi(s)`` and
``BJ = phi^(J)(t) (x) g(psi)(s)``::

    v(s,t)   ~ N(H A B0', Sigma_V)             data, H drops missing components
    A BJ'    ~ N(M f(A; s,t), Sigma_U)          process
    M_nd     = 0 if gamma_nd == 0, g-slab otherwise
    gamma_nd ~ Bernoulli(pi_n),  pi_n ~ Beta(a, b)
    sigma2_V ~ Half-t (Huang-Wand auxiliary a_V),  sigma2_U ~ 1/sigma2_U
    A        ~ elastic net(lambda1, lambda2)

One sweep updates, in order: minibatch, gamma (on a fresh subsample), pi,
M, sigma2_U, sigma2_V, and finally A with one constant-learning-rate
stochastic gradient step.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg
from scipy.special import expit

from .basis import IDENTITY, apply_operator, field_from_matrices, fit_coefficients
from .library import (
    contract_grad,
    factor_values,
    grid_factor_values,
    library_matrix,
)

log = logging.getLogger(__name__)

VAR_FLOOR = 1e-12


class SamplerError(RuntimeError):
    def __init__(self, message, iteration=None):
        self.iteration = iteration
        prefix = "" if iteration is None else f"iteration {iteration}: "
        super().__init__(prefix + message)


# ---------------------------------------------------------------------------
# containers


@dataclass
class ObservationSet:
    """Gridded observations ``(S, T, N)`` plus a presence mask.

    Missing entries are stored as NaN in ``data`` and never read.
    """

    data: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.data.ndim != 3 or self.data.shape != self.mask.shape:
            raise ValueError("data and mask must be (S, T, N) arrays of equal shape")
        self.data = np.where(self.mask, self.data, np.nan)
        if not np.all(np.isfinite(self.data[self.mask])):
            raise ValueError("observed entries must be finite")

    @classmethod
    def from_array(cls, data, mask=None):
        data = np.asarray(data, dtype=float)
        if mask is None:
            mask = np.isfinite(data)
        return cls(data, mask)

    @property
    def shape(self):
        return self.data.shape

    @property
    def L(self):
        """Number of observed components at each ``(s, t)``."""
        return self.mask.sum(axis=2)

    def filled(self, value=0.0):
        return np.where(self.mask, self.data, value)


@dataclass
class ModelConfig:
    iterations: int = 5000
    burn_in: int = 2500
    minibatch: int = 100
    kappa: object = 1e-4  # scalar or one rate per component
    lambda1: float = 0.01
    lambda2: float = 0.01
    a: float = 1.0
    b: float = 1.0
    g: float | None = None  # None: number of grid points S*T
    beta_rss: float | None = None  # None: chosen from the library condition number
    subsample: int | None = None  # None: derived from g and beta_rss
    nu_V: float = 2.0
    A_V: float = 1e5
    seed: int = 0
    inclusion_threshold: float = 0.5
    lhs_time_order: int = 1
    init_ridge: float | None = None  # None: lambda2
    thin_A: int = 0  # keep A every thin_A iterations; 0 keeps none

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.iterations > 0 and not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.beta_rss is not None and not 0 < self.beta_rss < 1:
            raise ValueError("beta_rss must lie in (0, 1)")
        if np.any(np.asarray(self.kappa, dtype=float) < 0):
            raise ValueError("kappa must be nonnegative")
        if self.minibatch < 1:
            raise ValueError("minibatch must be >= 1")
        if self.a <= 0 or self.b <= 0:
            raise ValueError("Beta hyperparameters must be positive")

    def kappa_vector(self, N):
        k = np.asarray(self.kappa, dtype=float).ravel()
        if k.size == 1:
            return np.full(N, k[0])
        if k.size != N:
            raise ValueError(f"kappa has {k.size} entries for {N} components")
        return k


@dataclass
class ModelState:
    A: np.ndarray
    M: np.ndarray
    gamma: np.ndarray
    pi: np.ndarray
    sigma2_U: np.ndarray
    sigma2_V: np.ndarray
    a_V: np.ndarray

    def copy(self):
        return ModelState(*(np.array(getattr(self, f)) for f in self.__dataclass_fields__))


@dataclass
class ChainSamples:
    M: np.ndarray  # (L, N, D)
    gamma: np.ndarray  # (L, N, D) bool
    pi: np.ndarray  # (L, N)
    sigma2_U: np.ndarray  # (L, N)
    sigma2_V: np.ndarray  # (L, N)
    burn_in: int
    term_names: list = field(default_factory=list)
    component_names: list = field(default_factory=list)
    A: dict = field(default_factory=dict)  # iteration -> A, when thinned
    subsample: int | None = None
    final_state: ModelState | None = None

    def __len__(self):
        return len(self.pi)

    def retained(self):
        """Slice of post-burn-in iterations."""
        return slice(self.burn_in, len(self))


@dataclass
class Problem:
    """Everything fixed during a run."""

    obs: ObservationSet
    ev: object  # BasisEvaluations
    lib: object  # FeatureLibrary
    cov: np.ndarray | None = None
    lhs_time_order: int = 1
    margin: int = 0  # spatial nodes dropped from each edge of the process-model point set

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError("margin must be >= 0")
        self._pool = None
        if self.margin:
            sp = self.ev.spatial
            keep = [np.arange(self.margin, len(ax) - self.margin) for ax in (sp.xs, sp.ys) if ax is not None]
            if any(len(k) == 0 for k in keep):
                raise ValueError("margin leaves no interior points")
            if len(keep) == 1:
                s_keep = keep[0]
            else:
                s_keep = (keep[1][:, None] * len(sp.xs) + keep[0][None, :]).ravel()
            self._pool = (np.arange(self.T)[:, None] * self.S + s_keep[None, :]).ravel()

    @property
    def pool(self):
        """Flat indices ``t*S + s`` of the process-model points, or None for the whole grid."""
        return self._pool

    @property
    def n_points(self):
        return self.S * self.T if self._pool is None else len(self._pool)

    @property
    def S(self):
        return self.obs.shape[0]

    @property
    def T(self):
        return self.obs.shape[1]

    @property
    def N(self):
        return self.obs.shape[2]


# ---------------------------------------------------------------------------
# small linear-algebra helpers


def _quad_form(XtX, Xty, idx):
    """``Xty[idx]' inv(XtX[idx, idx]) Xty[idx]`` with a pseudo-inverse fallback."""
    if len(idx) == 0:
        return 0.0
    A = XtX[np.ix_(idx, idx)]
    b = Xty[idx]
    try:
        c = linalg.cho_factor(A, check_finite=False)
        return float(b @ linalg.cho_solve(c, b, check_finite=False))
    except linalg.LinAlgError:
        warnings.warn("rank-deficient active design; using a pseudo-inverse")
        return float(b @ np.linalg.pinv(A) @ b)


def marginal_rss(XtX, Xty, yty, idx, g):
    """``1/2 (y'y - g_gamma' G_gamma^{-1} g_gamma)`` for active columns ``idx``."""
    q = _quad_form(XtX, Xty, idx)
    return max(0.5 * (yty - g / (g + 1.0) * q), VAR_FLOOR * max(yty, 1.0))


def inclusion_log_ratio(rss_in, rss_out, n_obs, g):
    """``log R`` with ``R = (g+1)^(1/2) (RSS_in / RSS_out)^(n/2 - 1)``."""
    return 0.5 * math.log(g + 1.0) + (n_obs / 2.0 - 1.0) * (math.log(rss_in) - math.log(rss_out))


def inclusion_probability(log_R, pi):
    """``1 / (1 + R (1 - pi) / pi)``, evaluated in log space."""
    if pi <= 0.0:
        return 0.0
    if pi >= 1.0:
        return 1.0
    return float(expit(-(log_R + math.log1p(-pi) - math.log(pi))))


def inv_gamma(rng, shape, scale):
    return scale / rng.gamma(shape)


# ---------------------------------------------------------------------------
# responses and designs


def build_response(A, ev, points, gop=None, time_order=1):
    """Left-hand side ``A (phi^(J)(t) (x) g(psi)(s))'`` at each point, ``N x len(points)``."""
    pts = np.asarray(points, dtype=int).reshape(-1, 2)
    psi = ev.psi_lhs if gop is None else apply_operator(ev.spatial, gop)
    return _lhs_at(A, psi, ev.get_phi(time_order), pts[:, 0], pts[:, 1]).T


def _lhs_at(A, psi, phi, s_idx, t_idx):
    N = A.shape[0]
    C = A.reshape(N, phi.shape[1], psi.shape[1])
    return np.einsum("zp,nqp,zq->zn", psi[s_idx], C, phi[t_idx])


def _kron_contract(psi_rows, phi_rows, c):
    """``sum_z c[z, n] * kron(phi_rows[z], psi_rows[z])`` for each n -> (N, Q*P)."""
    out = np.einsum("zq,zn,zp->nqp", phi_rows, c, psi_rows, optimize=True)
    return out.reshape(c.shape[1], -1)


def design_at(problem, A, s_idx, t_idx):
    """Library matrix ``(Z, D)`` and responses ``(Z, N)`` at the given points."""
    ev, lib = problem.ev, problem.lib
    vals = factor_values(lib, A, ev, problem.cov, s_idx, t_idx)
    F = library_matrix(lib, vals)
    Y = _lhs_at(A, ev.psi_lhs, ev.get_phi(problem.lhs_time_order), s_idx, t_idx)
    return F, Y


def full_design(problem, A):
    """Library matrix and responses at every process-model point (rows ordered ``t*S + s``)."""
    ev, lib = problem.ev, problem.lib
    vals = grid_factor_values(lib, A, ev, problem.cov)
    F = library_matrix(lib, vals)
    lhs = field_from_matrices(A, ev.psi_lhs, ev.get_phi(problem.lhs_time_order))
    Y = lhs.reshape(-1, problem.N, order="F")
    if problem.pool is not None:
        return F[problem.pool], Y[problem.pool]
    return F, Y


# ---------------------------------------------------------------------------
# conditional updates


def update_gamma(gamma, pi, F, Y, g, rng, order=None):
    """Single-site Gibbs sweep over the inclusion indicators.

    ``F`` (n x D) and ``Y`` (n x N) are the (subsampled) design and responses.
    Sites are visited in ``order`` (a sequence of ``(n, d)``) or a fresh
    random permutation.
    """
    gamma = np.array(gamma, dtype=bool)
    N, D = gamma.shape
    XtX, XtY, yty, n_obs = gram(F, Y)
    if order is None:
        order = [divmod(int(k), D) for k in rng.permutation(N * D)]
    for n, d in order:
        gamma[n, d] = True
        idx_in = np.flatnonzero(gamma[n])
        idx_out = idx_in[idx_in != d]
        rss_in = marginal_rss(XtX, XtY[:, n], yty[n], idx_in, g)
        rss_out = marginal_rss(XtX, XtY[:, n], yty[n], idx_out, g)
        p = inclusion_probability(inclusion_log_ratio(rss_in, rss_out, n_obs, g), pi[n])
        gamma[n, d] = rng.random() < p
    return gamma


def update_pi(gamma, a, b, rng):
    k = np.asarray(gamma).sum(axis=1)
    D = np.asarray(gamma).shape[1]
    return rng.beta(a + k, b + D - k)


def gram(F, Y):
    """Sufficient statistics ``(F'F, F'Y, diag(Y'Y), n)`` of a design."""
    return F.T @ F, F.T @ Y, np.einsum("zn,zn->n", Y, Y), F.shape[0]


def update_M(gamma, sigma2_U, F, Y, g, rng, stats=None):
    """Draw active coefficients from ``N(g_gamma, sigma2_U * G_gamma)``."""
    N, D = gamma.shape
    M = np.zeros((N, D))
    XtX, XtY, _, _ = gram(F, Y) if stats is None else stats
    shrink = g / (g + 1.0)
    for n in range(N):
        idx = np.flatnonzero(gamma[n])
        if len(idx) == 0:
            continue
        A = XtX[np.ix_(idx, idx)]
        b = XtY[idx, n]
        z = rng.standard_normal(len(idx))
        try:
            L = linalg.cholesky(A, lower=True, check_finite=False)
            mean = shrink * linalg.cho_solve((L, True), b, check_finite=False)
            dev = linalg.solve_triangular(L.T, z, lower=False, check_finite=False)
        except linalg.LinAlgError:
            warnings.warn("rank-deficient active design in M update; using a pseudo-inverse")
            Ainv = np.linalg.pinv(A)
            mean = shrink * Ainv @ b
            w, V = np.linalg.eigh(Ainv)
            dev = V @ (np.sqrt(np.clip(w, 0, None)) * z)
        M[n, idx] = mean + math.sqrt(shrink * sigma2_U[n]) * dev
    return M


def update_sigma_U(gamma, F, Y, g, rng, stats=None):
    """Inverse-Gamma draw with shape ``n/2`` and the marginal RSS as scale."""
    N = gamma.shape[0]
    XtX, XtY, yty, n_obs = gram(F, Y) if stats is None else stats
    out = np.empty(N)
    for n in range(N):
        q = _quad_form(XtX, XtY[:, n], np.flatnonzero(gamma[n]))
        scale = 0.5 * (yty[n] - g / (g + 1.0) * q)
        if scale <= 0:
            warnings.warn("nonpositive process residual scale; flooring")
            scale = VAR_FLOOR
        out[n] = max(inv_gamma(rng, n_obs / 2.0, scale), VAR_FLOOR)
    return out


def data_residual_ss(A, obs, ev):
    """Per-component sum of squared data residuals over observed entries, and counts."""
    U0 = field_from_matrices(A, ev.get_psi(IDENTITY), ev.get_phi(0))
    R = np.where(obs.mask, obs.filled() - U0, 0.0)
    return np.einsum("stn,stn->n", R, R), obs.mask.sum(axis=(0, 1))


def data_log_likelihood(A, obs, ev, sigma2_V):
    """Gaussian log density of the observed entries given the latent field."""
    ssr, counts = data_residual_ss(A, obs, ev)
    sigma2_V = np.asarray(sigma2_V, dtype=float)
    return float(np.sum(-0.5 * counts * np.log(2 * np.pi * sigma2_V) - 0.5 * ssr / sigma2_V))


def update_sigma_V(A, obs, ev, a_V, nu_V, A_V, rng, ssr=None):
    if ssr is None:
        ssr, counts = data_residual_ss(A, obs, ev)
    else:
        ssr, counts = ssr
    sigma2 = np.empty(len(ssr))
    aux = np.empty(len(ssr))
    for n in range(len(ssr)):
        sigma2[n] = max(inv_gamma(rng, (counts[n] + nu_V) / 2.0, nu_V / a_V[n] + 0.5 * ssr[n]), VAR_FLOOR)
        aux[n] = inv_gamma(rng, (nu_V + 1.0) / 2.0, nu_V / sigma2[n] + 1.0 / A_V**2)
    return sigma2, aux


# ---------------------------------------------------------------------------
# loss and gradient for A


def neg_log_posterior(A, state, problem, s_idx, t_idx, lambda1, lambda2):
    """Sum over points of the per-point negative log posterior terms that depend on ``A``.

    Each point carries ``1/(S*T)`` of the elastic-net prior.
    """
    obs, ev = problem.obs, problem.ev
    ST = problem.S * problem.T
    F, Y = design_at(problem, A, s_idx, t_idx)
    U0 = _lhs_at(A, ev.get_psi(IDENTITY), ev.get_phi(0), s_idx, t_idx)
    mask = obs.mask[s_idx, t_idx]
    V = np.where(mask, obs.filled()[s_idx, t_idx], 0.0)
    data = 0.5 * np.sum(mask * (V - U0) ** 2 / state.sigma2_V)
    R = Y - F @ state.M.T
    proc = 0.5 * np.sum(R**2 / state.sigma2_U)
    prior = len(s_idx) / ST * (lambda1 * np.abs(A).sum() + lambda2 * np.sum(A**2))
    return data + proc + prior


def loss_grad(state, problem, point, lambda1, lambda2):
    """Gradient of the per-point loss, written term by term with an explicit ``H``.

    Reference implementation for a single ``(s, t)``; :func:`minibatch_grad`
    is the vectorised equivalent used by the sampler.
    """
    from .library import grad_term

    obs, ev, lib = problem.obs, problem.ev, problem.lib
    s, t = point
    A, M = state.A, state.M
    N = A.shape[0]
    ST = problem.S * problem.T
    B0 = np.kron(ev.get_phi(0)[t], ev.get_psi(IDENTITY)[s])
    BJ = np.kron(ev.get_phi(problem.lhs_time_order)[t], ev.psi_lhs[s])
    present = np.flatnonzero(obs.mask[s, t])
    H = np.eye(N)[present]
    v = obs.data[s, t, present]
    SV_inv = np.diag(1.0 / state.sigma2_V[present])
    SU_inv = np.diag(1.0 / state.sigma2_U)
    Theta = np.eye(N)
    F = eval_point_library(problem, A, s, t)
    Fdot = [grad_term(term, A, ev, problem.cov, s, t) for term in lib.terms]

    grad = -np.outer(Theta.T @ H.T @ SV_inv @ v, B0)
    grad += np.outer(Theta.T @ H.T @ SV_inv @ H @ Theta @ A @ B0, B0)
    grad += np.outer(Theta.T @ SU_inv @ Theta @ A @ BJ, BJ)
    grad -= np.outer(Theta.T @ SU_inv @ M @ F, BJ)
    w_lhs = (A @ BJ) @ Theta.T @ SU_inv @ M  # length D
    w_rhs = F @ M.T @ SU_inv @ M
    for d in range(lib.D):
        grad += (w_rhs[d] - w_lhs[d]) * Fdot[d]
    grad += (lambda1 * np.sign(A) + 2.0 * lambda2 * A) / ST
    return grad


def eval_point_library(problem, A, s, t):
    vals = factor_values(problem.lib, A, problem.ev, problem.cov, np.array([s]), np.array([t]))
    return library_matrix(problem.lib, vals)[0]


def minibatch_grad(state, problem, s_idx, t_idx, lambda1, lambda2):
    """Mean of the per-point loss gradients over a minibatch."""
    obs, ev, lib = problem.obs, problem.ev, problem.lib
    A, M = state.A, state.M
    N = A.shape[0]
    Z = len(s_idx)
    ST = problem.S * problem.T
    psi0 = ev.get_psi(IDENTITY)[s_idx]
    phi0 = ev.get_phi(0)[t_idx]
    psiJ = ev.psi_lhs[s_idx]
    phiJ = ev.get_phi(problem.lhs_time_order)[t_idx]
    C = A.reshape(N, ev.Q, ev.P)
    U0 = np.einsum("zp,nqp,zq->zn", psi0, C, phi0)
    UJ = np.einsum("zp,nqp,zq->zn", psiJ, C, phiJ)

    vals = factor_values(lib, A, ev, problem.cov, s_idx, t_idx)
    F = library_matrix(lib, vals)
    R = (UJ - F @ M.T) / state.sigma2_U  # (Z, N)
    mask = obs.mask[s_idx, t_idx]
    Wd = np.where(mask, obs.filled()[s_idx, t_idx] - U0, 0.0) / state.sigma2_V

    grad = -_kron_contract(psi0, phi0, Wd)
    grad += _kron_contract(psiJ, phiJ, R)
    grad += contract_grad(lib, vals, -R @ M, ev, s_idx, t_idx, N)
    grad /= Z
    grad += (lambda1 * np.sign(A) + 2.0 * lambda2 * A) / ST
    return grad


def sample_points(rng, S, T, size, pool=None):
    """Uniform draw without replacement of ``size`` space-time points (from ``pool`` if given)."""
    if pool is None:
        flat = rng.choice(S * T, size=min(size, S * T), replace=False)
    else:
        flat = pool[rng.choice(len(pool), size=min(size, len(pool)), replace=False)]
    t_idx, s_idx = np.divmod(flat, S)
    return s_idx, t_idx


def update_A(state, problem, s_idx, t_idx, kappa, lambda1, lambda2):
    grad = minibatch_grad(state, problem, s_idx, t_idx, lambda1, lambda2)
    return state.A - np.asarray(kappa)[:, None] * grad


# ---------------------------------------------------------------------------
# initialisation and the chain driver


def init_state(problem, cfg, rng=None):
    """Ridge fit for ``A``, all-in ``gamma``, one conditional draw of ``M``."""
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    obs, ev, lib = problem.obs, problem.ev, problem.lib
    N, D = problem.N, lib.D
    ridge = cfg.lambda2 if cfg.init_ridge is None else cfg.init_ridge
    A = fit_coefficients(obs.filled(), ev.get_psi(IDENTITY), ev.get_phi(0), ridge=ridge, mask=obs.mask)

    ssr, counts = data_residual_ss(A, obs, ev)
    sigma2_V = np.maximum(ssr / np.maximum(counts, 1), VAR_FLOOR)
    F, Y = full_design(problem, A)
    gamma = np.ones((N, D), dtype=bool)
    coef, *_ = np.linalg.lstsq(F, Y, rcond=None)
    resid = Y - F @ coef
    sigma2_U = np.maximum(np.mean(resid**2, axis=0), VAR_FLOOR)
    g = cfg.g if cfg.g is not None else problem.n_points
    M = update_M(gamma, sigma2_U, F, Y, g, rng)
    pi = np.full(N, cfg.a / (cfg.a + cfg.b))
    a_V = np.array([inv_gamma(rng, (cfg.nu_V + 1) / 2.0, cfg.nu_V / s + 1.0 / cfg.A_V**2) for s in sigma2_V])
    return ModelState(A, M, gamma, pi, sigma2_U, sigma2_V, a_V)


def sweep(state, problem, cfg, rng, subsample, g_full, kappa):
    """One pass of the seven conditional updates; returns a new state."""
    S, T = problem.S, problem.T
    st = state.copy()
    mb_s, mb_t = sample_points(rng, S, T, cfg.minibatch, problem.pool)

    sub_s, sub_t = sample_points(rng, S, T, subsample, problem.pool)
    F_sub, Y_sub = design_at(problem, st.A, sub_s, sub_t)
    st.gamma = update_gamma(st.gamma, st.pi, F_sub, Y_sub, float(len(sub_s)), rng)
    st.pi = update_pi(st.gamma, cfg.a, cfg.b, rng)

    F, Y = full_design(problem, st.A)
    stats = gram(F, Y)
    st.M = update_M(st.gamma, st.sigma2_U, F, Y, g_full, rng, stats)
    st.sigma2_U = update_sigma_U(st.gamma, F, Y, g_full, rng, stats)
    st.sigma2_V, st.a_V = update_sigma_V(st.A, problem.obs, problem.ev, st.a_V, cfg.nu_V, cfg.A_V, rng)
    st.A = update_A(st, problem, mb_s, mb_t, kappa, cfg.lambda1, cfg.lambda2)
    if not np.all(np.isfinite(st.A)):
        raise FloatingPointError("basis coefficients diverged (reduce kappa)")
    return st


def resolve_subsample(problem, cfg, state):
    """Subsample size for the gamma update: explicit, or from the RSS-ratio calculus."""
    from .diagnostics import choose_beta, subsample_size
    from .library import correlation_condition_number

    if cfg.subsample is not None:
        return int(min(cfg.subsample, problem.n_points)), cfg.beta_rss, None
    g = cfg.g if cfg.g is not None else problem.n_points
    cond = None
    beta = cfg.beta_rss
    if beta is None:
        F, _ = full_design(problem, state.A)
        cond = correlation_condition_number(F)
        beta = choose_beta(cond)
    n = subsample_size(g, beta, 1.0, min_size=problem.lib.D + 2)
    return int(min(n, problem.n_points)), beta, cond


def run_chain(problem, cfg, state=None, callback=None):
    """Run ``cfg.iterations`` sweeps and record every iteration."""
    rng = np.random.default_rng(cfg.seed)
    N, D = problem.N, problem.lib.D
    L = cfg.iterations
    if state is None:
        state = init_state(problem, cfg, rng)
    g_full = cfg.g if cfg.g is not None else problem.n_points
    subsample, beta, cond = resolve_subsample(problem, cfg, state)
    log.info("gamma subsample size %d (beta=%s, condition number=%s)", subsample, beta, cond)
    kappa = cfg.kappa_vector(N)

    out = ChainSamples(
        M=np.zeros((L, N, D)),
        gamma=np.zeros((L, N, D), dtype=bool),
        pi=np.zeros((L, N)),
        sigma2_U=np.zeros((L, N)),
        sigma2_V=np.zeros((L, N)),
        burn_in=cfg.burn_in if L else 0,
        term_names=problem.lib.names,
        component_names=list(problem.lib.component_names),
        subsample=subsample,
    )
    for it in range(L):
        try:
            state = sweep(state, problem, cfg, rng, subsample, g_full, kappa)
        except (FloatingPointError, np.linalg.LinAlgError, ValueError) as exc:
            raise SamplerError(str(exc), iteration=it) from exc
        out.M[it] = state.M
        out.gamma[it] = state.gamma
        out.pi[it] = state.pi
        out.sigma2_U[it] = state.sigma2_U
        out.sigma2_V[it] = state.sigma2_V
        if cfg.thin_A and it % cfg.thin_A == 0:
            out.A[it] = state.A.copy()
        if callback is not None:
            callback(it, state)
    out.final_state = state
    return out


def with_overrides(cfg, **kw):
    return replace(cfg, **kw)
