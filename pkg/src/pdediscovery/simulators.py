"""Reference PDE solvers that generate benchmark data.

Each solver returns a :class:`SimulatedData` holding an ``(S, T, N)`` field
on a regular grid. Locations of 2-D problems are flattened x-fastest, the
same order used by :class:`pdediscovery.basis.SpatialBasis`.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class SimulatedData:
    field: np.ndarray  # (S, T, N)
    times: np.ndarray
    xs: np.ndarray
    ys: np.ndarray | None = None
    component_names: tuple = ("u",)
    params: dict = field(default_factory=dict)
    mask: np.ndarray | None = None

    @property
    def dims(self):
        return self.field.shape

    @property
    def axis(self):
        return "1D" if self.ys is None else "2D"


def rk4_step(f, u, dt):
    k1 = f(u)
    k2 = f(u + 0.5 * dt * k1)
    k3 = f(u + 0.5 * dt * k2)
    k4 = f(u + dt * k3)
    return u + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate(f, u0, dt, n_out, every):
    """RK4 from ``u0``; records the state every ``every`` steps, ``n_out`` snapshots."""
    out = [u0.copy()]
    u = u0
    for _ in range(n_out - 1):
        for _ in range(every):
            u = rk4_step(f, u, dt)
        if not np.all(np.isfinite(u)):
            raise FloatingPointError("simulation diverged")
        out.append(u.copy())
    return out


def _steps(t_out, dt):
    k = t_out / dt
    if abs(k - round(k)) > 1e-9 or round(k) < 1:
        raise ValueError(f"output interval {t_out} is not a multiple of the step {dt}")
    return int(round(k))


def burgers(nu=0.1, n_x=256, length=16.0, t_end=10.0, n_t=101, dt=1e-3):
    """Viscous Burgers ``u_t = -u u_x + nu u_xx`` on a periodic domain.

    Pseudo-spectral in space (derivatives by FFT, nonlinearity in
    conservative form), RK4 in time. Initial condition ``exp(-(x+2)^2)`` on
    ``[-length/2, length/2)``.
    """
    if nu <= 0:
        raise ValueError("viscosity must be positive")
    x = np.linspace(-length / 2, length / 2, n_x, endpoint=False)
    k = 2 * np.pi * np.fft.rfftfreq(n_x, d=length / n_x)
    # two-thirds de-aliasing
    keep = k <= (2.0 / 3.0) * k.max()

    def rhs(u):
        uh = np.fft.rfft(u)
        flux = np.fft.rfft(0.5 * u * u) * keep
        return np.fft.irfft(-1j * k * flux - nu * k**2 * uh, n=n_x)

    times = np.linspace(0.0, t_end, n_t)
    every = _steps(times[1] - times[0], dt)
    snaps = integrate(rhs, np.exp(-((x + 2.0) ** 2)), dt, n_t, every)
    fld = np.stack(snaps, axis=1)[:, :, None]
    return SimulatedData(fld, times, x, params={"nu": nu, "dt": dt})


def _laplacian_dirichlet(u, h):
    """Five-point Laplacian of interior nodes; boundary rows are zero."""
    out = np.zeros_like(u)
    out[1:-1, 1:-1] = (u[2:, 1:-1] + u[:-2, 1:-1] + u[1:-1, 2:] + u[1:-1, :-2] - 4 * u[1:-1, 1:-1]) / h**2
    return out


def _laplacian_periodic(u, h):
    return (np.roll(u, 1, 0) + np.roll(u, -1, 0) + np.roll(u, 1, 1) + np.roll(u, -1, 1) - 4 * u) / h**2


def _laplacian_neumann(u, h):
    p = np.pad(u, 1, mode="reflect")
    return (p[2:, 1:-1] + p[:-2, 1:-1] + p[1:-1, 2:] + p[1:-1, :-2] - 4 * u) / h**2


def heat(alpha=1.0, n=41, length=20.0, t_end=2.0, n_t=201, dt=0.01, boundary="periodic"):
    """2-D heat equation ``u_t = alpha (u_xx + u_yy)`` on ``[0, length]^2``.

    Initial condition ``sin(2 pi x / 40) cos(2 pi y / 40)``, five-point
    Laplacian, RK4 in time. ``boundary``:

    ``"fixed"``
        boundary nodes keep their initial values (Dirichlet).
    ``"periodic"``
        the 41-node grid wraps around (period ``length + h``).
    ``"mode"``
        the exact decaying separable mode everywhere. ``u``, ``u_xx`` and
        ``u_yy`` are then exactly collinear.
    """
    if boundary not in ("fixed", "periodic", "mode"):
        raise ValueError(f"unknown boundary {boundary!r}")
    x = np.linspace(0.0, length, n)
    h = x[1] - x[0]
    if dt > h**2 / (4 * alpha):
        raise ValueError(f"step {dt} violates the diffusive bound h^2/(4 alpha) = {h**2 / (4 * alpha)}")
    X, Y = np.meshgrid(x, x, indexing="xy")  # rows are y, columns are x
    k = 2 * np.pi / 40.0
    u0 = np.sin(k * X) * np.cos(k * Y)
    times = np.linspace(0.0, t_end, n_t)
    every = _steps(times[1] - times[0], dt)

    if boundary == "mode":
        decay = np.exp(-2 * alpha * k**2 * times)
        snaps = [u0 * c for c in decay]
    else:
        lap = _laplacian_dirichlet if boundary == "fixed" else _laplacian_periodic
        snaps = integrate(lambda u: alpha * lap(u, h), u0, dt, n_t, every)
    fld = np.stack([s.ravel() for s in snaps], axis=1)[:, :, None]
    return SimulatedData(fld, times, x, x.copy(), params={"alpha": alpha, "dt": dt, "boundary": boundary})


RD_DEFAULTS = {"gamma0": 0.4, "gamma1": 1.5, "beta": 0.5, "mu": 0.3, "eta": 0.1, "D": 0.1}


def reaction_diffusion(
    n=41,
    length=20.0,
    t_end=10.0,
    n_t=101,
    dt=0.01,
    boundary="periodic",
    initial=None,
    **params,
):
    """Predator-prey reaction-diffusion on ``[-length/2, length/2]^2``.

    ::

        u_t = g0 u - (g0 / g1) u^2 - beta u v + D (u_xx + u_yy)
        v_t = mu u v - eta v                + D (v_xx + v_yy)

    With the default parameters ``g0 / g1 = 0.2667``. The 41-node grid
    wraps around by default; ``boundary="neumann"`` uses zero flux.
    ``initial`` replaces the default initial fields with a pair of scalars
    or ``(n, n)`` arrays.
    """
    p = {**RD_DEFAULTS, **params}
    unknown = set(params) - set(RD_DEFAULTS)
    if unknown:
        raise ValueError(f"unknown parameters {sorted(unknown)}")
    if boundary not in ("neumann", "periodic"):
        raise ValueError(f"unknown boundary {boundary!r}")
    x = np.linspace(-length / 2, length / 2, n)
    h = x[1] - x[0]
    X, Y = np.meshgrid(x, x, indexing="xy")
    lap = _laplacian_neumann if boundary == "neumann" else _laplacian_periodic
    if initial is None:
        u0 = np.exp(np.cos(2 * np.pi * X / 15) * np.sin(2 * np.pi * Y / 15))
        v0 = 0.1 * np.exp(np.cos(2 * np.pi * Y / 30) * np.sin(2 * np.pi * X / 30 - 5))
    else:
        u0, v0 = (np.broadcast_to(np.asarray(w, dtype=float), X.shape).copy() for w in initial)
    g0, g1, beta, mu, eta, D = (p[k] for k in ("gamma0", "gamma1", "beta", "mu", "eta", "D"))

    def rhs(w):
        u, v = w
        du = g0 * u - (g0 / g1) * u * u - beta * u * v + D * lap(u, h)
        dv = mu * u * v - eta * v + D * lap(v, h)
        return np.stack([du, dv])

    times = np.linspace(0.0, t_end, n_t)
    every = _steps(times[1] - times[0], dt)
    snaps = integrate(rhs, np.stack([u0, v0]), dt, n_t, every)
    if min(s.min() for s in snaps) < 0:
        raise FloatingPointError("negative density in reaction-diffusion solve")
    fld = np.stack([np.stack([s[0].ravel(), s[1].ravel()], axis=1) for s in snaps], axis=1)
    return SimulatedData(fld, times, x, x.copy(), ("u", "v"), params={**p, "dt": dt, "boundary": boundary})


def add_noise(fld, zeta, rng):
    """Add ``zeta * N(0, sd_n^2)`` noise, ``sd_n`` the std of component ``n``."""
    fld = np.asarray(fld, dtype=float)
    if zeta < 0:
        raise ValueError("noise level must be nonnegative")
    sd = np.nanstd(fld, axis=(0, 1))
    return fld + zeta * sd * rng.standard_normal(fld.shape)


def missing_mask(shape, fraction, rng):
    """Boolean presence mask with each entry missing independently."""
    if not 0 <= fraction < 1:
        raise ValueError("missing fraction must lie in [0, 1)")
    return rng.random(shape) >= fraction


SIMULATORS = {"burgers": burgers, "heat": heat, "reaction_diffusion": reaction_diffusion}
