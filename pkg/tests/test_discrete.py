import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blobflow import (Heat, Interval, ParticleState, PiecewiseDensity, PowerLaw, blob_density, continuum_energy,
                      discrete_energy, gap_total, geometry, second_moment, uniform_ratio)
from blobflow.errors import InputError

LINE3 = ParticleState([-1.0, 0.0, 1.0])
ASYM = ParticleState([0.0, 1.0, 3.0])


def gaps_strategy(n_min=2, n_max=9):
    return st.lists(st.floats(0.05, 5.0), min_size=n_min - 1, max_size=n_max - 1)


def state_from_gaps(gaps, start=-1.0):
    return ParticleState(start + np.concatenate(([0.0], np.cumsum(gaps))))


def test_state_validation():
    with pytest.raises(InputError):
        ParticleState([0.0])
    with pytest.raises(InputError):
        ParticleState([0.0, 0.0, 1.0])
    with pytest.raises(InputError):
        ParticleState([0.0, np.nan])
    with pytest.raises(InputError):
        ParticleState([-1.5, 0.0], Interval(1.0))


def test_state_snaps_to_wall_and_is_read_only():
    s = ParticleState([-1.0 + 1e-16, 0.0, 1.0], Interval(1.0))
    assert s.positions[0] == -1.0 and s.pinned == (True, True)
    with pytest.raises(ValueError):
        s.positions[1] = 0.5


def test_geometry_examples():
    g = geometry(LINE3)
    np.testing.assert_array_equal(g.gaps, [np.inf, 1, 1, np.inf])
    np.testing.assert_array_equal(g.radii, [1, 1, 1])
    g = geometry(ParticleState([-1, -0.5, 0, 0.5, 1], Interval(1.0)))
    np.testing.assert_allclose(g.gaps, 0.5, rtol=0, atol=1e-15)
    np.testing.assert_allclose(g.radii, 0.5)
    np.testing.assert_array_equal(geometry(ASYM).radii, [1, 1, 2])


def test_unpinned_interval_state_has_no_mirror():
    g = geometry(ParticleState([-0.5, 0.0, 1.0], Interval(1.0)))
    assert g.gaps[0] == np.inf and g.gaps[-1] == 1.0


def test_energy_examples():
    assert discrete_energy(LINE3, Heat()) == pytest.approx(-math.log(3), rel=1e-15)
    assert discrete_energy(LINE3, PowerLaw(2)) == pytest.approx(1 / 3, rel=1e-15)
    # equal spacing 0.5 on [-1, 1] with mirrored ends: every N r_i = 5 * 0.5
    s = ParticleState(np.linspace(-1, 1, 5), Interval(1.0))
    assert discrete_energy(s, Heat()) == pytest.approx(-math.log(2.5), rel=1e-14)


def test_blob_density_examples():
    b = blob_density(LINE3)
    np.testing.assert_allclose(b.left, [-1.5, -0.5, 0.5])
    np.testing.assert_allclose(b.right, [-0.5, 0.5, 1.5])
    np.testing.assert_allclose(b.values, 1 / 3)
    b = blob_density(ASYM)
    np.testing.assert_allclose(b.left, [-0.5, 0.5, 2.0])
    np.testing.assert_allclose(b.right, [0.5, 1.5, 4.0])
    np.testing.assert_allclose(b.values, [1 / 3, 1 / 3, 1 / 6])


def test_continuum_energy_examples():
    uniform = PiecewiseDensity([-1.0], [1.0], values=[0.5])
    assert continuum_energy(uniform, Heat()) == pytest.approx(math.log(0.5), rel=1e-15)
    assert continuum_energy(uniform, PowerLaw(2)) == pytest.approx(0.5, rel=1e-15)
    assert continuum_energy(blob_density(LINE3), Heat()) == pytest.approx(-math.log(3), rel=1e-14)


def test_second_moments():
    assert second_moment(LINE3) == pytest.approx(2 / 3)
    assert second_moment(blob_density(LINE3)) == pytest.approx(0.75)
    assert second_moment(ParticleState([-0.3, 0.3])) == pytest.approx(0.09)


def test_gap_total_and_ratio():
    assert gap_total(LINE3) == 0 and uniform_ratio(LINE3) == 0
    assert gap_total(ASYM) == pytest.approx(0.5) and uniform_ratio(ASYM) == pytest.approx(1.0)
    s = ParticleState(np.linspace(-1, 1, 9), Interval(1.0))
    assert gap_total(s) == pytest.approx(0, abs=1e-14) and uniform_ratio(s) == pytest.approx(0, abs=1e-14)


@settings(max_examples=60, deadline=None)
@given(gaps_strategy(), st.sampled_from([Heat(), PowerLaw(2.0), PowerLaw(3.5)]))
def test_blob_energy_identity(gaps, energy):
    s = state_from_gaps(gaps)
    b = blob_density(s)
    assert b.total_mass() == pytest.approx(1.0, abs=1e-13)
    assert continuum_energy(b, energy) == pytest.approx(discrete_energy(s, energy), rel=1e-12, abs=1e-13)


@settings(max_examples=40, deadline=None)
@given(gaps_strategy())
def test_blob_cdf_is_monotone_and_quantile_inverts(gaps):
    b = blob_density(state_from_gaps(gaps))
    lo, hi = b.support
    xs = np.linspace(lo - 0.1, hi + 0.1, 301)
    F = b.cdf(xs)
    assert np.all(np.diff(F) >= -1e-15) and F[0] == 0 and F[-1] == pytest.approx(1.0)
    q = b.quantile()
    eta = np.linspace(0.01, 0.99, 37)
    np.testing.assert_allclose(b.cdf(q(eta)), eta, atol=1e-12)


def test_piecewise_density_validation():
    with pytest.raises(InputError):
        PiecewiseDensity([0.0], [0.0], values=[1.0])
    with pytest.raises(InputError):
        PiecewiseDensity([0.0, 0.5], [1.0, 2.0], values=[1.0, 1.0])
    with pytest.raises(InputError):
        PiecewiseDensity([0.0], [1.0])
