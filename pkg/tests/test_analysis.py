import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blobflow import (Heat, Interval, ParticleState, PiecewiseDensity, PowerLaw, QuantileFunction, WholeLine,
                      d2_atomic_density, geometry, local_slope)
from blobflow.analysis import (BarenblattSolution, FlowReference, NeumannHeatSolution, SmoothProfile, fisher,
                               gamma_study, gap_bound, heat_interpolant_fisher, heat_normaliser,
                               interpolant_general, interpolant_heat, max_gap_bound, mollified_study, mollify,
                               serfaty_report, slope_epsilon, well_prepared)
from blobflow.errors import DomainError, InputError
from blobflow.transport import d2_quantiles
from blobflow import StepperConfig, simulate

LINEAR = SmoothProfile.linear()


# -- profiles --------------------------------------------------------------------

def test_profile_validation():
    with pytest.raises(InputError):
        SmoothProfile(lambda x: np.full_like(np.asarray(x, float), 0.4), lambda x: 0 * x, 1.0)
    with pytest.raises(InputError):
        SmoothProfile(lambda x: np.asarray(x, float), lambda x: 1 + 0 * x, 1.0)
    with pytest.raises(InputError):
        SmoothProfile.linear(slope=1.0)


def test_well_prepared_uniform():
    s = well_prepared(SmoothProfile.uniform(), 4)
    np.testing.assert_allclose(s.positions, [-1, 0, 0.5, 1], atol=1e-15)
    for n in (5, 12, 40):
        dx = np.diff(well_prepared(SmoothProfile.uniform(), n).positions)
        assert dx[0] == pytest.approx(4 / n, rel=1e-12)
        np.testing.assert_allclose(dx[1:], 2 / n, rtol=1e-10)


def test_well_prepared_domain_checks():
    with pytest.raises(InputError):
        well_prepared(LINEAR, 10, Interval(2.0))
    with pytest.raises(InputError):
        well_prepared(LINEAR, 1)
    assert isinstance(well_prepared(LINEAR, 10, WholeLine()).domain, WholeLine)


def test_quantile_of_linear_profile():
    # Phi solves (x + 1) + (x^2 - 1)/4 = 2 eta
    eta = np.linspace(0, 1, 21)
    exact = -2 + np.sqrt(1 + 8 * eta)
    np.testing.assert_allclose(LINEAR.quantile(eta), exact, atol=1e-14)


def test_recovery_distance_for_linear_profile():
    s = well_prepared(LINEAR, 100)
    assert d2_atomic_density(s, LINEAR.quantile_function()) <= 2 / (100 * 0.25)


def test_truncated_gaussian_mass():
    p = SmoothProfile.truncated_gaussian(0.4, 1.0)
    assert float(p.cdf(np.asarray(1.0))) == pytest.approx(1.0, abs=1e-14)


# -- mollification -------------------------------------------------------------

STEP = PiecewiseDensity([-1.0, 0.0], [0.0, 1.0], values=[0.25, 0.75])


@pytest.mark.parametrize("source", [STEP, ParticleState([-0.5, 0.1, 0.7]), SmoothProfile.linear()])
@pytest.mark.parametrize("delta", [0.5, 0.1, 0.02])
def test_mollified_mass_is_one(source, delta):
    p = mollify(source, delta, Interval(1.0))
    from scipy.integrate import quad
    mass = quad(lambda s: float(p(s)), -1, 1, limit=400, points=[0.0], epsabs=1e-12)[0]
    assert mass == pytest.approx(1.0, abs=1e-10)
    assert float(p.cdf(np.asarray(1.0))) == pytest.approx(1.0, abs=1e-10)


def test_mollified_derivative():
    p = mollify(STEP, 0.2, Interval(1.0))
    x = np.linspace(-0.9, 0.9, 7)
    fd = (p.density(x + 1e-6) - p.density(x - 1e-6)) / 2e-6
    np.testing.assert_allclose(p.derivative(x), fd, rtol=1e-6, atol=1e-8)


def test_mollified_uniform_converges_inside():
    uniform = PiecewiseDensity([-1.0], [1.0], values=[0.5])
    x = np.linspace(-0.5, 0.5, 101)
    deltas = (0.2, 0.1, 0.05, 0.025)
    errs = [np.max(np.abs(mollify(uniform, d, Interval(1.0))(x) - 0.5)) for d in deltas]
    # only the renormalisation of the mass cut off at the walls remains inside
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert all(e <= d for e, d in zip(errs, deltas))


def test_mollified_distance_decreases_dyadically():
    q = STEP.quantile()
    d = [d2_quantiles(mollify(STEP, delta, Interval(1.0)).quantile_function(), q)
         for delta in (0.4, 0.2, 0.1, 0.05, 0.025)]
    assert all(b < a for a, b in zip(d, d[1:]))
    assert d[-1] < 0.02


def test_mollify_rejects_wide_kernel_on_interval():
    with pytest.raises(InputError):
        mollify(STEP, 2.0, Interval(1.0))


def test_mollify_on_line_uses_symmetric_hull():
    p = mollify(ParticleState([0.0, 1.0, 2.0]), 0.3, WholeLine())
    assert p.half_width == pytest.approx(2.0)


# -- reference solutions -------------------------------------------------------

def test_neumann_series():
    sol = NeumannHeatSolution(1.0, {2: 0.25})
    x = np.linspace(-1, 1, 9)
    t = 0.03
    np.testing.assert_allclose(sol.density(t, x), 0.5 + 0.25 * np.cos(np.pi * (x + 1)) * np.exp(-np.pi**2 * t))
    fd_t = (sol.density(t + 1e-6, x) - sol.density(t - 1e-6, x)) / 2e-6
    fd_xx = (sol.density(t, x + 1e-4) - 2 * sol.density(t, x) + sol.density(t, x - 1e-4)) / 1e-8
    np.testing.assert_allclose(fd_t, fd_xx, atol=1e-5)
    from scipy.integrate import quad
    for xi in (-0.7, 0.1, 0.9):
        assert sol.cdf(t, xi) == pytest.approx(quad(lambda s: sol.density(t, s), -1, xi)[0], abs=1e-13)
    energies = [sol.energy(s) for s in np.linspace(0, 0.3, 13)]
    assert np.all(np.diff(energies) < 0)
    assert NeumannHeatSolution(1.0, {}).density(0.3, 0.2) == 0.5


def test_neumann_rejects_negative_density():
    with pytest.raises(InputError):
        NeumannHeatSolution(1.0, {1: 0.9})


def test_barenblatt():
    sol = BarenblattSolution(2.0)
    R = sol.radius(1.0)
    from scipy.integrate import quad
    assert quad(lambda s: sol.density(1.0, s), -R, R, epsabs=1e-13)[0] == pytest.approx(1.0, abs=1e-10)
    x = np.linspace(-R, R, 11)
    np.testing.assert_allclose(sol.density(1.0, x), sol.density(1.0, -x))
    assert sol.radius(8.0) / sol.radius(1.0) == pytest.approx(8.0 ** (1 / 3))
    assert sol.cdf(1.0, 0.3 * R) == pytest.approx(quad(lambda s: sol.density(1.0, s), -R, 0.3 * R)[0], abs=1e-12)
    # rho_t = (rho^2)_xx inside the support
    t, xi, h = 1.3, 0.4, 1e-4
    rt = (sol.density(t + 1e-6, xi) - sol.density(t - 1e-6, xi)) / 2e-6
    u = lambda s: sol.density(t, s) ** 2
    assert rt == pytest.approx((u(xi + h) - 2 * u(xi) + u(xi - h)) / h**2, rel=1e-5)


# -- interpolants and Fisher information --------------------------------------

def test_interpolant_of_symmetric_triple():
    d = interpolant_heat(ParticleState([-1.0, 0.0, 1.0], Interval(1.0)))
    assert d.normaliser == pytest.approx(2 / 3)
    np.testing.assert_allclose(d(np.linspace(-1, 1, 9)), 0.5)


@pytest.mark.parametrize("n", [3, 8, 30])
def test_interpolant_of_equal_spacing(n):
    s = ParticleState(np.linspace(-1, 1, n), Interval(1.0))
    d = interpolant_heat(s)
    assert heat_normaliser(s) == pytest.approx((n - 1) / n)
    np.testing.assert_allclose(d(np.linspace(-1, 1, 17)), 0.5, rtol=1e-12)
    assert fisher(d, Heat()) == 0 or fisher(d, Heat()) < 1e-20


def state_strategy():
    return st.lists(st.floats(0.2, 3.0), min_size=2, max_size=7).map(
        lambda g: ParticleState(np.concatenate(([0.0], np.cumsum(g)))))


@settings(max_examples=40, deadline=None)
@given(state_strategy())
def test_interpolant_node_values_and_mass(s):
    d = interpolant_heat(s)
    assert d.total_mass() == pytest.approx(1.0, abs=1e-12)
    gaps = geometry(s).gaps
    x = s.positions
    m = d.normaliser
    # node x_j seen from the piece on its right carries 1 / (N dx_j)
    left_vals = np.array([float(d.piece(j)(np.asarray(x[j]))) for j in range(1, s.n - 1)])
    np.testing.assert_allclose(m * left_vals, 1 / (s.n * gaps[1:-2]), rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(state_strategy())
def test_closed_form_fisher(s):
    assert heat_interpolant_fisher(s) == pytest.approx(fisher(interpolant_heat(s), Heat(), epsabs=1e-12),
                                                       rel=1e-7)


@settings(max_examples=30, deadline=None)
@given(state_strategy())
def test_slope_inequality(s):
    lhs = heat_interpolant_fisher(s)
    g = local_slope(s, Heat())
    eps = slope_epsilon(s)
    assert eps < 4
    assert lhs <= 4 * g * g / (4 - eps) * (1 + 1e-12) + 1e-15


def test_general_interpolant_for_heat_is_linear_between_node_values():
    s = ParticleState([-1.0, -0.6, 0.1, 0.4, 1.0], Interval(1.0))
    d = interpolant_general(s, Heat())
    gaps = geometry(s).gaps
    m, n, x = d.normaliser, s.n, s.positions
    for j in range(n - 1):
        f = d.piece(j)
        a, b = 1 / (m * n * gaps[j]), 1 / (m * n * gaps[j + 1])
        assert float(f(np.asarray(x[j]))) == pytest.approx(a, rel=1e-12)
        assert float(f(np.asarray(x[j + 1]))) == pytest.approx(b, rel=1e-12)
        assert float(f(np.asarray(0.5 * (x[j] + x[j + 1])))) == pytest.approx(0.5 * (a + b), rel=1e-12)
    assert d.total_mass() == pytest.approx(1.0, abs=1e-12)


def test_general_interpolant_pme_equal_spacing_is_constant():
    s = ParticleState(np.linspace(-1, 1, 9), Interval(1.0))
    d = interpolant_general(s, PowerLaw(2.0))
    np.testing.assert_allclose(d(np.linspace(-1, 1, 13)), 0.5, rtol=1e-12)


def test_general_interpolant_sandwich():
    s = ParticleState([-1.0, -0.7, -0.1, 0.3, 1.0], Interval(1.0))
    for e in (Heat(), PowerLaw(2.0), PowerLaw(3.0)):
        d = interpolant_general(s, e)
        gaps, n, m = geometry(s).gaps, s.n, d.normaliser
        for j in range(n - 1):
            xs = np.linspace(s.positions[j], s.positions[j + 1], 11)
            width = 1 / (m * d.piece(j)(xs))
            lo, hi = n * min(gaps[j], gaps[j + 1]), n * max(gaps[j], gaps[j + 1])
            assert np.all(width >= lo * (1 - 1e-12)) and np.all(width <= hi * (1 + 1e-12))


def test_fisher_examples():
    assert fisher(LINEAR, Heat()) == pytest.approx(math.log(3) / 4, rel=1e-12)
    assert fisher(PiecewiseDensity([-1.0], [1.0], values=[0.5]), Heat()) == 0
    assert fisher(STEP, Heat()) == math.inf
    with pytest.raises(DomainError):
        fisher(PiecewiseDensity([-1.0, 0.5], [0.0, 1.0], values=[0.5, 1.0]), Heat())
    # pme m=2: H'' = 2, so the integrand is 4 rho rho'^2 = rho / 4
    assert fisher(LINEAR, PowerLaw(2.0)) == pytest.approx(1 / 4, rel=1e-12)


# -- bounds and studies ----------------------------------------------------------

def test_max_gap_bound_closed_forms():
    assert max_gap_bound(Heat(), 10, 0.5, 2.0) == pytest.approx(math.sqrt(100 + 4) / 10)
    assert max_gap_bound(PowerLaw(2), 10, 0.5, 2.0) == pytest.approx((3 * (50 + 8 / 3)) ** (1 / 3) / 10)
    assert gap_bound(1.5, 10, 0.2) == pytest.approx(0.3 + 0.3)


def test_gamma_uniform_is_exact():
    ns = [8, 16, 32]
    heat = gamma_study(SmoothProfile.uniform(), Heat(), ns)
    np.testing.assert_allclose(heat.energy_gap, -math.log(2) / np.array(ns), rtol=1e-10)
    pme = gamma_study(SmoothProfile.uniform(), PowerLaw(2.0), ns)
    np.testing.assert_allclose(pme.energy_gap, -0.25 / np.array(ns), rtol=1e-10)


def test_mollified_schedule_for_gaussian():
    source = SmoothProfile.truncated_gaussian(0.5, 1.0)
    rows = mollified_study(source, Heat(), Interval(1.0), [(0.1, 32), (0.05, 64), (0.025, 128), (0.0125, 256)])
    gaps = np.abs([r["energy_gap"] for r in rows])
    dists = [r["d2"] for r in rows]
    assert np.all(np.diff(gaps) < 0) and np.all(np.diff(dists) < 0)


def test_report_for_stationary_state():
    s = ParticleState(np.linspace(-1, 1, 20), Interval(1.0))
    traj = simulate(s, Heat(), StepperConfig(1.0, dt_init=1e-2, record_every=0.25))
    rep = serfaty_report({20: traj}, FlowReference.stationary_uniform(1.0, Heat()), Heat())
    assert np.all(rep.discrete["slope"] == 0) and np.all(rep.discrete["dissipation"] == 0)
    assert np.ptp(rep.discrete["energy"]) == 0 and np.ptp(rep.discrete["d2"]) == 0
    assert rep.discrete["energy"][0, 0] == pytest.approx(-math.log(2 * 20 / 19))
    assert rep.a1[20] == pytest.approx(40 / 19) and rep.a2[20] == pytest.approx(40 / 19)
