import numpy as np
import pytest
from scipy.integrate import solve_ivp

from pdediscovery import simulators as sim


def rms(a):
    return float(np.sqrt(np.mean(np.square(a))))


@pytest.fixture(scope="module")
def burgers_data():
    return sim.burgers()


class TestBurgers:
    def test_shape_and_grid(self, burgers_data):
        d = burgers_data
        assert d.field.shape == (256, 101, 1)
        assert d.xs[0] == -8.0 and d.xs[1] - d.xs[0] == pytest.approx(16 / 256)
        np.testing.assert_allclose(d.times, np.arange(101) * 0.1, atol=1e-12)
        np.testing.assert_allclose(d.field[:, 0, 0], np.exp(-((d.xs + 2) ** 2)))

    def test_mass_conservation(self, burgers_data):
        mass = burgers_data.field[:, :, 0].sum(axis=0)
        assert np.max(np.abs(mass - mass[0])) / abs(mass[0]) < 1e-6

    def test_step_halving(self):
        a = sim.burgers(t_end=2.0, n_t=21)
        b = sim.burgers(t_end=2.0, n_t=21, dt=5e-4)
        assert rms(a.field - b.field) <= 1e-5

    def test_satisfies_pde(self, burgers_data):
        # spectral residual of u_t + u u_x - nu u_xx at one interior time
        d = burgers_data
        u = d.field[:, :, 0]
        k = 2 * np.pi * np.fft.fftfreq(256, d=16 / 256)
        j = 50
        ux = np.real(np.fft.ifft(1j * k * np.fft.fft(u[:, j])))
        uxx = np.real(np.fft.ifft(-(k**2) * np.fft.fft(u[:, j])))
        ut = (u[:, j + 1] - u[:, j - 1]) / 0.2
        resid = ut + u[:, j] * ux - 0.1 * uxx
        assert rms(resid) / rms(ut) < 0.02

    def test_rejects_bad_viscosity(self):
        with pytest.raises(ValueError):
            sim.burgers(nu=0.0)


class TestHeat:
    @pytest.mark.parametrize("boundary", ["periodic", "fixed"])
    def test_mode_decay_at_interior(self, boundary):
        d = sim.heat(t_end=0.2, n_t=21, boundary=boundary)
        u = d.field[:, :, 0].reshape(41, 41, -1)
        k = 2 * np.pi / 40
        X, Y = np.meshgrid(d.xs, d.ys)
        expect = np.sin(k * X) * np.cos(k * Y) * np.exp(-2 * k**2 * 0.2)
        inner = (slice(5, 36), slice(5, 36))
        big = np.abs(expect[inner]) > 0.1
        rel = np.abs(u[inner][..., -1] - expect[inner]) / np.abs(expect[inner])
        assert np.max(rel[big]) < 0.01

    def test_exact_mode_option(self):
        d = sim.heat(t_end=0.2, n_t=21, boundary="mode")
        ratio = d.field[:, -1, 0] / np.where(d.field[:, 0, 0] == 0, np.nan, d.field[:, 0, 0])
        np.testing.assert_allclose(ratio[np.isfinite(ratio)], np.exp(-2 * (2 * np.pi / 40) ** 2 * 0.2))

    @pytest.mark.parametrize("boundary", ["periodic", "fixed"])
    def test_maximum_principle(self, boundary):
        f = sim.heat(boundary=boundary).field[:, :, 0]
        assert f.max() <= f[:, 0].max() + 1e-10
        assert f.min() >= f[:, 0].min() - 1e-10

    def test_periodic_conserves_total_heat(self):
        f = sim.heat().field[:, :, 0]
        np.testing.assert_allclose(f.sum(axis=0), f[:, 0].sum(), atol=1e-9)

    def test_step_halving(self):
        a = sim.heat(t_end=0.5, n_t=51)
        b = sim.heat(t_end=0.5, n_t=51, dt=0.005)
        assert rms(a.field - b.field) <= 1e-5

    def test_stability_guard(self):
        with pytest.raises(ValueError):
            sim.heat(dt=0.1)

    def test_layout_is_x_fastest(self):
        d = sim.heat(t_end=0.01, n_t=2, boundary="mode")
        k = 2 * np.pi / 40
        s = 3 * 41 + 7  # y index 3, x index 7
        assert d.field[s, 0, 0] == pytest.approx(np.sin(k * d.xs[7]) * np.cos(k * d.ys[3]))


class TestReactionDiffusion:
    def test_ode_reference(self):
        p = sim.RD_DEFAULTS
        d = sim.reaction_diffusion(n=5, initial=(0.8, 0.2), D=0.0)

        def rhs(_, w):
            u, v = w
            return [p["gamma0"] * u - p["gamma0"] / p["gamma1"] * u * u - p["beta"] * u * v, p["mu"] * u * v - p["eta"] * v]

        ref = solve_ivp(rhs, (0, 10), [0.8, 0.2], t_eval=d.times, rtol=1e-12, atol=1e-12).y.T
        for s in range(d.field.shape[0]):
            assert rms(d.field[s] - ref) <= 1e-5

    def test_uniform_state_is_spatially_constant(self):
        d = sim.reaction_diffusion(n=9, initial=(1.0, 0.1), boundary="neumann")
        assert np.ptp(d.field, axis=0).max() < 1e-12

    def test_shape_and_positivity(self):
        d = sim.reaction_diffusion()
        assert d.field.shape == (41 * 41, 101, 2)
        assert d.component_names == ("u", "v")
        assert d.field.min() > 0
        assert d.xs[0] == -10 and d.xs[-1] == 10

    @pytest.mark.parametrize("boundary", ["periodic", "neumann"])
    def test_step_halving(self, boundary):
        a = sim.reaction_diffusion(t_end=2.0, n_t=21, boundary=boundary)
        b = sim.reaction_diffusion(t_end=2.0, n_t=21, dt=0.005, boundary=boundary)
        assert rms(a.field - b.field) <= 1e-5

    def test_unknown_parameter(self):
        with pytest.raises(ValueError):
            sim.reaction_diffusion(n=5, t_end=0.1, n_t=2, kappa=1.0)

    def test_mismatched_output_step(self):
        with pytest.raises(ValueError):
            sim.reaction_diffusion(n=5, t_end=1.0, n_t=4, dt=0.3)


class TestNoiseAndMissing:
    def test_zero_noise_is_identity(self, burgers_data):
        out = sim.add_noise(burgers_data.field, 0.0, np.random.default_rng(0))
        np.testing.assert_array_equal(out, burgers_data.field)

    @pytest.mark.parametrize("zeta", [0.02, 0.05])
    def test_noise_scale(self, burgers_data, zeta):
        f = burgers_data.field
        noise = sim.add_noise(f, zeta, np.random.default_rng(1)) - f
        assert abs(noise.std() / (zeta * f.std()) - 1) < 0.02

    def test_noise_is_per_component(self):
        rng = np.random.default_rng(2)
        f = np.stack([rng.standard_normal((400, 50)), 100 * rng.standard_normal((400, 50))], axis=2)
        noise = sim.add_noise(f, 0.1, rng) - f
        ratio = noise.std(axis=(0, 1)) / (0.1 * f.std(axis=(0, 1)))
        np.testing.assert_allclose(ratio, 1.0, atol=0.02)

    def test_negative_noise(self):
        with pytest.raises(ValueError):
            sim.add_noise(np.zeros((2, 2, 1)), -0.1, np.random.default_rng(0))

    def test_missing_share(self, burgers_data):
        m = sim.missing_mask(burgers_data.field.shape, 0.05, np.random.default_rng(3))
        assert abs((~m).mean() - 0.05) <= 0.005

    def test_no_missing(self):
        assert sim.missing_mask((4, 3, 1), 0.0, np.random.default_rng(0)).all()

    def test_bad_fraction(self):
        with pytest.raises(ValueError):
            sim.missing_mask((4, 3, 1), 1.0, np.random.default_rng(0))
