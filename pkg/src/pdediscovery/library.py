"""Candidate feature library: term definitions, evaluation and gradients.

A term is a product of factors. A factor is either a derivative of one state
component (``u``, ``u_x``, ``v_xy`` ...) or a known covariate field. Powers
are repeated factors, so ``u^2 u_x`` is ``[u, u, u_x]`` and every term has
the same product-rule gradient with respect to the basis coefficients ``A``.
"""

import itertools
import re
import warnings
from dataclasses import dataclass

import numpy as np

from .basis import DerivSpec, IDENTITY, field_from_matrices

DEFAULT_SYMBOLS = ("u", "v", "w", "z")


class LibraryError(ValueError):
    pass


class LibraryParseError(LibraryError):
    def __init__(self, message, text="", position=0):
        self.text = text
        self.position = position
        where = f" at position {position}" if text else ""
        super().__init__(f"{message}{where}: {text!r}" if text else message)


@dataclass(frozen=True)
class StateDeriv:
    component: int
    d: DerivSpec = IDENTITY

    def sort_key(self):
        d = self.d
        return (0, d.dt + d.dx + d.dy, self.component, d.dt, -d.dx, d.dy, 0)


@dataclass(frozen=True)
class Covariate:
    index: int

    def sort_key(self):
        return (1, 0, 0, 0, 0, 0, self.index)


def factor_name(f, symbols, covariate_names=()):
    if isinstance(f, Covariate):
        return covariate_names[f.index] if f.index < len(covariate_names) else f"w{f.index}"
    sym = symbols[f.component]
    return f"{sym}_{f.d.suffix()}" if any(f.d) else sym


@dataclass(frozen=True)
class TermSpec:
    factors: tuple
    name: str

    @property
    def state_factors(self):
        return [f for f in self.factors if isinstance(f, StateDeriv)]


def make_term(factors, symbols=DEFAULT_SYMBOLS, covariate_names=()):
    """Build a canonical term from factors given in any order."""
    factors = tuple(sorted(factors, key=lambda f: f.sort_key()))
    if not factors:
        raise LibraryError("a term needs at least one factor")
    parts = []
    for f, grp in itertools.groupby(factors):
        k = len(list(grp))
        name = factor_name(f, symbols, covariate_names)
        parts.append(name if k == 1 else f"{name}^{k}")
    return TermSpec(factors, " ".join(parts))


@dataclass(frozen=True)
class FeatureLibrary:
    terms: tuple
    component_names: tuple = ("u",)
    covariate_names: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "component_names", tuple(self.component_names))
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))
        if not self.terms:
            raise LibraryError("library must contain at least one term")
        seen = set()
        for t in self.terms:
            if t.factors in seen:
                raise LibraryError(f"duplicate library term {t.name!r}")
            seen.add(t.factors)
            for f in t.factors:
                if isinstance(f, StateDeriv) and not 0 <= f.component < self.n_components:
                    raise LibraryError(f"term {t.name!r} refers to a missing component")
                if isinstance(f, Covariate) and not 0 <= f.index < len(self.covariate_names):
                    raise LibraryError(f"term {t.name!r} refers to an unknown covariate")

    @property
    def n_components(self):
        return len(self.component_names)

    @property
    def D(self):
        return len(self.terms)

    @property
    def names(self):
        return [t.name for t in self.terms]

    def required_derivs(self):
        return sorted({f.d for t in self.terms for f in t.state_factors})

    def state_keys(self):
        """Distinct ``(component, DerivSpec)`` pairs appearing in the library."""
        return sorted({(f.component, f.d) for t in self.terms for f in t.state_factors})

    def index(self, name):
        return self.names.index(name)


# ---------------------------------------------------------------------------
# grammar: products with '*' (or spaces), powers with '^k', derivative suffix

_TOKEN = re.compile(r"\s*(?:(?P<id>[A-Za-z][A-Za-z0-9_]*)|(?P<pow>\^\s*(?P<k>\d+))|(?P<mul>\*))")


def parse_factor(token, symbols=DEFAULT_SYMBOLS, covariate_names=(), text="", position=0):
    if token in covariate_names:
        return Covariate(list(covariate_names).index(token))
    sym, _, suffix = token.partition("_")
    if sym not in symbols:
        raise LibraryParseError(f"unknown symbol {token!r}", text, position)
    if suffix and not re.fullmatch(r"[xyt]+", suffix):
        raise LibraryParseError(f"bad derivative suffix {suffix!r}", text, position)
    d = DerivSpec(suffix.count("x"), suffix.count("y"), suffix.count("t"))
    return StateDeriv(list(symbols).index(sym), d)


def parse_term(text, symbols=DEFAULT_SYMBOLS, covariate_names=()):
    """Parse ``"u^2*u_x"`` (or ``"u^2 u_x"``) into a canonical :class:`TermSpec`."""
    factors = []
    pos = 0
    expect_factor = True
    stripped_end = len(text.rstrip())
    while pos < stripped_end:
        m = _TOKEN.match(text, pos)
        if not m:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise LibraryParseError("unexpected character", text, bad)
        start = m.start() + (len(m.group(0)) - len(m.group(0).lstrip()))
        if m.group("id"):
            factors.append(parse_factor(m.group("id"), symbols, covariate_names, text, start))
            expect_factor = False
        elif m.group("pow"):
            if expect_factor or not factors:
                raise LibraryParseError("power without a base", text, start)
            k = int(m.group("k"))
            if k < 1:
                raise LibraryParseError("power must be >= 1", text, start)
            factors.extend([factors[-1]] * (k - 1))
        else:
            if expect_factor:
                raise LibraryParseError("dangling '*'", text, start)
            expect_factor = True
        pos = m.end()
    if expect_factor:
        raise LibraryParseError("expected a factor", text, len(text))
    return make_term(factors, symbols, covariate_names)


def parse_library(term_strings, component_names=("u",), covariate_names=()):
    terms = [parse_term(s, component_names, covariate_names) for s in term_strings]
    return FeatureLibrary(terms, component_names, covariate_names)


def standard_poly_deriv_library(
    n_components,
    max_power,
    derivs,
    covariates=(),
    interaction_power=None,
    interaction_derivs=None,
    cross_interactions=True,
    symbols=DEFAULT_SYMBOLS,
):
    """Polynomial terms interacting with derivative terms.

    The library holds every monomial of the components up to ``max_power``,
    then for each derivative in ``derivs`` the derivative alone followed by
    its products with monomials up to ``interaction_power``. With
    ``cross_interactions=False`` a derivative of component ``n`` is only
    multiplied by pure powers of ``n`` itself. ``interaction_derivs``
    restricts which derivatives get products. Each covariate is multiplied by
    each derivative. Duplicates are dropped, first occurrence wins.

    ``derivs`` entries may be strings (``"u_xx"``) or ``(component, DerivSpec)``.
    """
    if max_power < 1:
        raise LibraryError("max_power must be >= 1")
    symbols = tuple(symbols[:n_components])
    covariates = tuple(covariates)
    interaction_power = max_power if interaction_power is None else interaction_power

    def as_factor(x):
        if isinstance(x, str):
            return parse_factor(x, symbols, covariates)
        return StateDeriv(int(x[0]), DerivSpec(*x[1]))

    derivs = [as_factor(x) for x in derivs]
    inter = derivs if interaction_derivs is None else [as_factor(x) for x in interaction_derivs]
    comps = [StateDeriv(n) for n in range(n_components)]

    # pure powers of each component first, then mixed monomials by degree
    monomials = [[c] * k for c in comps for k in range(1, max_power + 1)]
    for k in range(2, max_power + 1):
        for combo in itertools.combinations_with_replacement(comps, k):
            if len(set(combo)) > 1:
                monomials.append(list(combo))

    factor_lists = list(monomials)
    for dv in derivs:
        factor_lists.append([dv])
        if dv not in inter:
            continue
        for mono in monomials:
            if len(mono) > interaction_power:
                continue
            if not cross_interactions and set(mono) != {StateDeriv(dv.component)}:
                continue
            factor_lists.append(mono + [dv])
    for k in range(len(covariates)):
        for dv in derivs:
            factor_lists.append([dv, Covariate(k)])

    terms, seen = [], set()
    for fl in factor_lists:
        t = make_term(fl, symbols, covariates)
        if t.factors not in seen:
            seen.add(t.factors)
            terms.append(t)
    return FeatureLibrary(terms, symbols, covariates)


# ---------------------------------------------------------------------------
# evaluation


def _points(points):
    pts = np.asarray(points, dtype=int).reshape(-1, 2)
    return pts[:, 0], pts[:, 1]


def state_value_at(A, ev, component, d, s_idx, t_idx):
    """``theta_n A (phi^(dt)(t) (x) psi^(d)(s))'`` at each point."""
    P, Q = ev.P, ev.Q
    C = A[component].reshape(Q, P)
    psi = ev.get_psi(d)[s_idx]  # (Z, P)
    phi = ev.get_phi(d.dt)[t_idx]  # (Z, Q)
    return np.einsum("zp,qp,zq->z", psi, C, phi)


def factor_values(lib, A, ev, cov, s_idx, t_idx):
    """Values of every distinct factor at the points; dict keyed by factor."""
    vals = {}
    for n, d in lib.state_keys():
        vals[StateDeriv(n, d)] = state_value_at(A, ev, n, d, s_idx, t_idx)
    for k in range(len(lib.covariate_names)):
        if cov is None:
            raise LibraryError("library uses covariates but none were supplied")
        vals[Covariate(k)] = np.asarray(cov)[s_idx, t_idx, k]
    return vals


def grid_factor_values(lib, A, ev, cov=None):
    """Factor values over the full grid, flattened with column ``t*S + s``."""
    vals = {}
    by_d = {}
    for n, d in lib.state_keys():
        by_d.setdefault(d, []).append(n)
    for d, comps in by_d.items():
        fld = field_from_matrices(A, ev.get_psi(d), ev.get_phi(d.dt))
        for n in comps:
            vals[StateDeriv(n, d)] = fld[:, :, n].ravel(order="F")
    for k in range(len(lib.covariate_names)):
        if cov is None:
            raise LibraryError("library uses covariates but none were supplied")
        vals[Covariate(k)] = np.asarray(cov)[:, :, k].ravel(order="F")
    return vals


def library_matrix(lib, vals):
    """``(Z, D)`` design matrix from factor values."""
    Z = len(next(iter(vals.values())))
    F = np.empty((Z, lib.D), order="F")
    # columns already built double as shared prefixes (u^2 for u^2 u_x ...)
    built = {}
    for j, term in enumerate(lib.terms):
        fs = term.factors
        k = len(fs) - 1
        while k > 0 and fs[:k] not in built:
            k -= 1
        col = F[:, j]
        col[:] = built[fs[:k]] if k else vals[fs[0]]
        for f in fs[max(k, 1) :]:
            np.multiply(col, vals[f], out=col)
        built[fs] = col
    return F


def eval_term(term, A, ev, cov, s, t):
    """Value of one library term at a single space-time index ``(s, t)``."""
    lib = FeatureLibrary([term], DEFAULT_SYMBOLS[: np.atleast_2d(A).shape[0]], _cov_names(cov))
    vals = factor_values(lib, np.atleast_2d(A), ev, cov, np.array([s]), np.array([t]))
    return float(library_matrix(lib, vals)[0, 0])


def _cov_names(cov):
    if cov is None:
        return ()
    return tuple(f"w{k}" for k in range(np.asarray(cov).shape[2]))


def eval_library(lib, A, ev, cov, points):
    """``D x len(points)`` matrix; column order follows ``points``."""
    s_idx, t_idx = _points(points)
    if len(s_idx) == 0:
        return np.zeros((lib.D, 0))
    vals = factor_values(lib, np.atleast_2d(A), ev, cov, s_idx, t_idx)
    return library_matrix(lib, vals).T


def contract_grad(lib, vals, weights, ev, s_idx, t_idx, n_components):
    """``sum_z sum_d weights[z, d] * d f_d(z) / dA`` as an ``N x PQ`` matrix.

    Product rule over state factors; covariates are constants. Contributions
    are grouped by ``(component, derivative)`` so each group is a single
    ``Phi[t]' diag(c) Psi[s]`` product.
    """
    P, Q = ev.P, ev.Q
    coef = {}
    for j, term in enumerate(lib.terms):
        w = weights[:, j]
        if not np.any(w):
            continue
        fs = term.factors
        for i, f in enumerate(fs):
            if not isinstance(f, StateDeriv):
                continue
            c = w.copy()
            for k, g in enumerate(fs):
                if k != i:
                    c = c * vals[g]
            key = (f.component, f.d)
            coef[key] = coef[key] + c if key in coef else c
    G = np.zeros((n_components, Q * P))
    for (n, d), c in coef.items():
        psi = ev.get_psi(d)[s_idx]
        phi = ev.get_phi(d.dt)[t_idx]
        G[n] += (phi.T @ (c[:, None] * psi)).ravel()
    return G


def grad_term(term, A, ev, cov, s, t):
    """Gradient of one term at ``(s, t)`` with respect to ``A``."""
    A = np.atleast_2d(A)
    lib = FeatureLibrary([term], DEFAULT_SYMBOLS[: A.shape[0]], _cov_names(cov))
    s_idx, t_idx = np.array([s]), np.array([t])
    vals = factor_values(lib, A, ev, cov, s_idx, t_idx)
    return contract_grad(lib, vals, np.ones((1, 1)), ev, s_idx, t_idx, A.shape[0])


def correlation_condition_number(F):
    """Condition number of the correlation matrix of the columns of ``F``."""
    F = np.asarray(F, dtype=float)
    sd = F.std(axis=0)
    if np.any(sd == 0):
        warnings.warn("library has a zero-variance column; condition number is infinite")
        return np.inf
    Fs = (F - F.mean(axis=0)) / sd
    corr = Fs.T @ Fs / len(Fs)
    sv = np.linalg.svd(corr, compute_uv=False)
    if sv[-1] <= sv[0] * np.finfo(float).eps:
        return np.inf
    return float(sv[0] / sv[-1])


def condition_number(lib, A, ev, cov, points):
    s_idx, t_idx = _points(points)
    if len(s_idx) <= lib.D:
        raise LibraryError("need more points than library terms")
    F = library_matrix(lib, factor_values(lib, np.atleast_2d(A), ev, cov, s_idx, t_idx))
    return correlation_condition_number(F)
