import numpy as np
import pytest

from pdediscovery import basis as B
from pdediscovery import library as L
from pdediscovery import sampler as Smp

TERM_POOL_1 = ["u", "u^2", "u_x", "u u_x", "u_xx", "u^2 u_xx", "u_x^2"]
TERM_POOL_2 = TERM_POOL_1 + ["v", "u v", "v_xx", "v^2 u_x", "v_t"]


def random_problem(rng, N=None, P=None, Q=None, D=None, S=9, T=7, missing=0.0, operator=None):
    """A small random 1D problem: bases, library, data and a state."""
    N = N or int(rng.integers(1, 3))
    P = P or int(rng.integers(4, 7))
    Q = Q or int(rng.integers(4, 7))
    D = D or int(rng.integers(1, 5))
    comps = ("u", "v")[:N]
    pool = TERM_POOL_1 if N == 1 else TERM_POOL_2
    names = list(rng.choice(pool, size=D, replace=False))
    lib = L.parse_library(names, comps)
    sb = B.SpatialBasis(B.make_bspline(0, 2, P, 3), np.linspace(0, 2, S))
    tb = B.TemporalBasis(B.make_bspline(0, 1, Q, 3), np.linspace(0, 1, T))
    op = operator or B.OperatorSpec.identity()
    ev = B.evaluate_bases(sb, tb, N, lib.required_derivs(), op)
    data = rng.standard_normal((S, T, N))
    mask = rng.random(data.shape) >= missing
    obs = Smp.ObservationSet(np.where(mask, data, np.nan), mask)
    problem = Smp.Problem(obs, ev, lib)
    state = random_state(rng, problem)
    return problem, state


def random_state(rng, problem):
    N, D = problem.N, problem.lib.D
    gamma = rng.random((N, D)) < 0.7
    M = np.where(gamma, rng.standard_normal((N, D)), 0.0)
    return Smp.ModelState(
        A=0.5 * rng.standard_normal((N, problem.ev.P * problem.ev.Q)),
        M=M,
        gamma=gamma,
        pi=rng.uniform(0.2, 0.8, N),
        sigma2_U=rng.uniform(0.5, 2.0, N),
        sigma2_V=rng.uniform(0.5, 2.0, N),
        a_V=np.ones(N),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def record_criterion(number, passed, detail):
    """Remember one acceptance verdict; all verdicts are printed at the end of the session."""
    line = f"CRITERION {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
