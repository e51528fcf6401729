"""Clamped B-spline bases in space and time and their analytic derivatives.

The latent field is written as ``U = A x_1 Psi x_2 Phi x_3 Theta`` with
``Theta`` the identity. Derivatives of the field come from derivatives of
``Psi`` (space) and ``Phi`` (time), so everything downstream only needs the
evaluation matrices collected in :class:`BasisEvaluations`.

Coefficient layout: ``A`` is ``N x (P*Q)`` with column ``q*P + p``, i.e. the
column order of ``np.kron(phi_row, psi_row)``.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import linalg

from .tensor_core import kronecker


class BasisError(ValueError):
    pass


class MissingDerivativeError(KeyError):
    pass


class DerivSpec(NamedTuple):
    """Orders of a partial derivative in x, y and t."""

    dx: int = 0
    dy: int = 0
    dt: int = 0

    @property
    def spatial(self):
        return DerivSpec(self.dx, self.dy, 0)

    def suffix(self):
        return "x" * self.dx + "y" * self.dy + "t" * self.dt


IDENTITY = DerivSpec(0, 0, 0)


# ---------------------------------------------------------------------------
# 1D B-splines


@dataclass(frozen=True)
class BSplineBasis1D:
    degree: int
    knots: np.ndarray

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        if np.any(np.diff(knots) < 0):
            raise BasisError("knot sequence must be nondecreasing")
        if len(knots) < 2 * (self.degree + 1):
            raise BasisError("too few knots for the requested degree")
        object.__setattr__(self, "knots", knots)

    @property
    def count(self):
        return len(self.knots) - self.degree - 1

    @property
    def lo(self):
        return float(self.knots[self.degree])

    @property
    def hi(self):
        return float(self.knots[-self.degree - 1])


def make_bspline(lo, hi, count, degree=3):
    """Clamped B-spline basis with uniformly spaced interior knots."""
    if degree < 1:
        raise BasisError(f"degree must be >= 1, got {degree}")
    if count < degree + 1:
        raise BasisError(f"need at least degree+1 = {degree + 1} functions, got {count}")
    if not hi > lo:
        raise BasisError(f"degenerate domain [{lo}, {hi}]")
    inner = np.linspace(lo, hi, count - degree + 1)[1:-1]
    knots = np.concatenate([np.full(degree + 1, lo), inner, np.full(degree + 1, hi)])
    return BSplineBasis1D(degree, knots)


def _safe_div(num, den):
    out = np.zeros(np.broadcast(num, den).shape)
    nz = den != 0
    np.divide(num, den, out=out, where=nz)
    return out


def _cox_de_boor(knots, x, degree):
    """All degree-``degree`` B-splines on ``knots`` at ``x``; (len(x), K-degree-1)."""
    K = len(knots)
    n_spans = K - 1
    # last non-degenerate span owns the right end point
    last = np.nonzero(knots[1:] > knots[:-1])[0][-1]
    span = np.searchsorted(knots, x, side="right") - 1
    span = np.clip(span, 0, last)
    B = np.zeros((len(x), n_spans))
    B[np.arange(len(x)), span] = 1.0
    xc = x[:, None]
    for k in range(1, degree + 1):
        m = K - k - 1
        ti = knots[:m]
        tik = knots[k : k + m]
        ti1 = knots[1 : 1 + m]
        tik1 = knots[k + 1 : k + 1 + m]
        left = _safe_div(xc - ti, tik - ti) * B[:, :m]
        right = _safe_div(tik1 - xc, tik1 - ti1) * B[:, 1 : m + 1]
        B = left + right
    return B


def _bspline_deriv(knots, x, degree, order):
    if order == 0:
        return _cox_de_boor(knots, x, degree)
    lower = _bspline_deriv(knots, x, degree - 1, order - 1)
    m = len(knots) - degree - 1
    a = _safe_div(degree, knots[degree : degree + m] - knots[:m])
    b = _safe_div(degree, knots[degree + 1 : degree + 1 + m] - knots[1 : 1 + m])
    return lower[:, :m] * a - lower[:, 1 : m + 1] * b


def eval1d(b, points, order=0):
    """Evaluate the ``order``-th derivative of every basis function.

    Returns a ``(len(points), b.count)`` matrix.
    """
    points = np.atleast_1d(np.asarray(points, dtype=float))
    if order < 0 or order > b.degree:
        raise BasisError(f"derivative order {order} exceeds spline degree {b.degree}")
    span = b.hi - b.lo
    tol = 1e-12 * max(1.0, abs(span))
    if np.any(points < b.lo - tol) or np.any(points > b.hi + tol):
        raise BasisError(f"evaluation points outside [{b.lo}, {b.hi}]")
    points = np.clip(points, b.lo, b.hi)
    return _bspline_deriv(b.knots, points, b.degree, order)


def default_degree(max_order):
    """Cubic, or the highest derivative order needed if that is larger."""
    return max(3, int(max_order))


def default_count(n_obs, degree, per_basis=4):
    """One basis function per ``per_basis`` observations along an axis."""
    return max(degree + 1, int(round(n_obs / per_basis)))


# ---------------------------------------------------------------------------
# space / time bases


@dataclass(frozen=True)
class SpatialBasis:
    """1D basis (``by is None``) or a tensor-product 2D basis.

    Locations are ordered with x fastest: location ``iy*len(xs) + ix``.
    Column ``qy*Px + qx`` of ``Psi`` so that ``Psi = kron(Psi_y, Psi_x)``.
    """

    bx: BSplineBasis1D
    xs: np.ndarray
    by: BSplineBasis1D | None = None
    ys: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "xs", np.asarray(self.xs, dtype=float))
        if (self.by is None) != (self.ys is None):
            raise BasisError("2D basis needs both `by` and `ys`")
        if self.ys is not None:
            object.__setattr__(self, "ys", np.asarray(self.ys, dtype=float))

    @property
    def kind(self):
        return "1D" if self.by is None else "2D"

    @property
    def P(self):
        return self.bx.count * (1 if self.by is None else self.by.count)

    @property
    def S(self):
        return len(self.xs) * (1 if self.ys is None else len(self.ys))

    @property
    def degree(self):
        return self.bx.degree if self.by is None else min(self.bx.degree, self.by.degree)

    def grid(self):
        """``(S, 2)`` array of (x, y) locations; y is 0 for 1D bases."""
        if self.ys is None:
            return np.column_stack([self.xs, np.zeros_like(self.xs)])
        X, Y = np.meshgrid(self.xs, self.ys)  # rows follow y, so ravel is x-fastest
        return np.column_stack([X.ravel(), Y.ravel()])


@dataclass(frozen=True)
class TemporalBasis:
    bt: BSplineBasis1D
    times: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))

    @property
    def Q(self):
        return self.bt.count

    @property
    def T(self):
        return len(self.times)


def _check_spatial(sb, d):
    d = DerivSpec(*d)
    if d.dt != 0:
        raise BasisError(f"spatial evaluation cannot carry a time derivative: {d}")
    if min(d.dx, d.dy) < 0:
        raise BasisError(f"negative derivative order: {d}")
    if sb.by is None and d.dy:
        raise BasisError(f"1D spatial basis has no y derivative: {d}")
    if d.dx + d.dy > sb.degree:
        raise BasisError(
            f"derivative {d} needs total order {d.dx + d.dy} > spatial degree {sb.degree}"
        )
    return d


def eval_spatial(sb, d=IDENTITY):
    """``S x P`` matrix of spatial basis derivatives at the grid locations."""
    d = _check_spatial(sb, d)
    psi_x = eval1d(sb.bx, sb.xs, d.dx)
    if sb.by is None:
        return psi_x
    return kronecker(eval1d(sb.by, sb.ys, d.dy), psi_x)


def eval_temporal(tb, order=0):
    return eval1d(tb.bt, tb.times, order)


# ---------------------------------------------------------------------------
# linear differential operator on the left-hand side


@dataclass(frozen=True)
class OperatorSpec:
    """``g(u) = sum_k coef_k * D_k u`` with ``D_k`` pure spatial derivatives."""

    terms: tuple = ((1.0, IDENTITY),)

    def __post_init__(self):
        terms = tuple((float(c), DerivSpec(*d)) for c, d in self.terms)
        for _, d in terms:
            if d.dt:
                raise BasisError("operator terms must be purely spatial")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def laplacian(cls, dim=2):
        if dim == 1:
            return cls(((1.0, DerivSpec(2, 0, 0)),))
        return cls(((1.0, DerivSpec(2, 0, 0)), (1.0, DerivSpec(0, 2, 0))))

    @property
    def is_identity(self):
        return self.terms == ((1.0, IDENTITY),)

    def name(self, symbol="u"):
        if self.is_identity:
            return symbol
        if self.terms == OperatorSpec.laplacian().terms:
            return f"lap({symbol})"
        parts = []
        for c, d in self.terms:
            s = f"{symbol}_{d.suffix()}" if any(d) else symbol
            parts.append(s if c == 1.0 else f"{c:g}*{s}")
        return "(" + " + ".join(parts) + ")"


def apply_operator(sb, g):
    """``g(Psi)``: the operator applied column-wise to the spatial basis."""
    out = np.zeros((sb.S, sb.P))
    for c, d in g.terms:
        out += c * eval_spatial(sb, d)
    return out


# ---------------------------------------------------------------------------
# cached evaluations


@dataclass
class BasisEvaluations:
    """All ``Psi``/``Phi`` derivative matrices needed for one model.

    ``psi`` is keyed by spatial ``DerivSpec`` (``dt == 0``), ``phi`` by time
    order. ``psi_lhs`` holds ``g(Psi)`` for the left-hand-side operator.
    """

    spatial: SpatialBasis
    temporal: TemporalBasis
    n_components: int
    psi: dict = field(default_factory=dict)
    phi: dict = field(default_factory=dict)
    operator: OperatorSpec = field(default_factory=OperatorSpec)
    psi_lhs: np.ndarray | None = None

    @property
    def theta(self):
        return np.eye(self.n_components)

    @property
    def S(self):
        return self.spatial.S

    @property
    def T(self):
        return self.temporal.T

    @property
    def P(self):
        return self.spatial.P

    @property
    def Q(self):
        return self.temporal.Q

    def get_psi(self, d):
        key = DerivSpec(*d).spatial
        try:
            return self.psi[key]
        except KeyError:
            raise MissingDerivativeError(f"spatial derivative {key} was not precomputed") from None

    def get_phi(self, order):
        try:
            return self.phi[int(order)]
        except KeyError:
            raise MissingDerivativeError(f"time derivative of order {order} was not precomputed") from None


def evaluate_bases(spatial, temporal, n_components, derivs=(), operator=None, lhs_time_order=1):
    """Precompute every matrix required by ``derivs`` and the left-hand side."""
    operator = operator or OperatorSpec()
    need = {IDENTITY} | {DerivSpec(*d) for d in derivs}
    need |= {d for _, d in operator.terms}
    ev = BasisEvaluations(spatial, temporal, n_components, operator=operator)
    for d in sorted(need):
        ev.psi.setdefault(d.spatial, eval_spatial(spatial, d.spatial))
        if d.dt not in ev.phi:
            ev.phi[d.dt] = eval_temporal(temporal, d.dt)
    if lhs_time_order not in ev.phi:
        ev.phi[lhs_time_order] = eval_temporal(temporal, lhs_time_order)
    ev.psi_lhs = apply_operator(spatial, operator)
    return ev


def field_from_matrices(A, psi, phi):
    """Refolded ``A (phi (x) psi)'``; returns an ``(S, T, N)`` array."""
    A = np.atleast_2d(A)
    N = A.shape[0]
    P, Q = psi.shape[1], phi.shape[1]
    if A.shape[1] != P * Q:
        raise BasisError(f"A has {A.shape[1]} columns, expected P*Q = {P * Q}")
    C = A.reshape(N, Q, P)
    out = psi @ C.transpose(0, 2, 1) @ phi.T  # (N, S, T)
    return np.ascontiguousarray(out.transpose(1, 2, 0))


def reconstruct_field(A, ev, d=IDENTITY):
    """Field derivative ``d`` of the latent process, as an ``(S, T, N)`` tensor."""
    d = DerivSpec(*d)
    return field_from_matrices(A, ev.get_psi(d), ev.get_phi(d.dt))


def reconstruct_lhs(A, ev, time_order=1):
    """``g(u)_{t^(J)}`` on the full grid."""
    return field_from_matrices(A, ev.psi_lhs, ev.get_phi(time_order))


def fit_coefficients(data, psi, phi, ridge=1e-8, mask=None, tol=1e-10, maxiter=2000):
    """Ridge fit of ``(S, T, N)`` data onto the ``Phi (x) Psi`` basis.

    Minimises ``sum_obs (data - fit)^2 + ridge * |A|^2`` per component. With
    no missing values the Kronecker structure gives a direct solve through two
    small eigendecompositions; with a mask we fall back to conjugate
    gradients on the normal equations.
    """
    from scipy.sparse.linalg import LinearOperator, cg

    data = np.asarray(data, dtype=float)
    S, T, N = data.shape
    P, Q = psi.shape[1], phi.shape[1]
    a, Up = linalg.eigh(psi.T @ psi)
    b, Uq = linalg.eigh(phi.T @ phi)
    denom = b[:, None] * a[None, :] + ridge  # (Q, P)
    if np.min(denom) <= 0:
        raise BasisError("singular ridge system; increase the ridge penalty")
    A = np.zeros((N, P * Q))
    for n in range(N):
        y = data[:, :, n]
        m = None if mask is None else np.asarray(mask[:, :, n], dtype=bool)
        if m is not None and m.all():
            m = None
        if m is None:
            rhs = phi.T @ y.T @ psi  # (Q, P)
            C = Uq @ ((Uq.T @ rhs @ Up) / denom) @ Up.T
        else:
            y = np.where(m, y, 0.0)
            rhs = (phi.T @ y.T @ psi).ravel()

            def matvec(x, m=m):
                C = x.reshape(Q, P)
                fit = (psi @ C.T @ phi.T) * m
                return (phi.T @ fit.T @ psi + ridge * C).ravel()

            # the full-data solution preconditions well for sparse masks
            def precond(x):
                return (Uq @ ((Uq.T @ x.reshape(Q, P) @ Up) / denom) @ Up.T).ravel()

            op = LinearOperator((P * Q, P * Q), matvec=matvec, dtype=float)
            M = LinearOperator((P * Q, P * Q), matvec=precond, dtype=float)
            sol, info = cg(op, rhs, rtol=tol, maxiter=maxiter, M=M)
            if info != 0:
                raise BasisError(f"ridge fit did not converge (info={info})")
            C = sol.reshape(Q, P)
        A[n] = C.ravel()
    return A
