import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blobflow import Heat, Interval, ParticleState, PowerLaw, classify, local_slope, minimal_norm, psi_values
from blobflow.oracles import enumerate_minimum, fd_gradient, membership_violation
from blobflow.subgradient import CASE_TABLE, table_subgradient

LINE3 = ParticleState([-1.0, 0.0, 1.0])
ASYM = ParticleState([0.0, 1.0, 3.0])
ENERGIES = [Heat(), PowerLaw(2.0), PowerLaw(3.0)]


def pinned_uniform(n):
    return ParticleState(np.linspace(-1, 1, n), Interval(1.0))


def test_labels():
    assert "".join(classify(LINE3)) == "LRELR"
    assert "".join(classify(ASYM)) == "LRLLR"
    assert set(classify(pinned_uniform(7))[1:-1]) == {"E"}


def test_labels_tolerance_band():
    s = ParticleState([0.0, 1.0, 2.0 + 5e-10, 3.5])
    assert classify(s, tie_tol=1e-9)[2] == "E"
    assert classify(s, tie_tol=1e-10)[2] == "L"


def test_psi_values():
    s = ParticleState([0.0, 0.5, 1.5])
    np.testing.assert_allclose(psi_values(s, Heat()), [0.0, 2.0, 1.0, 0.0])
    np.testing.assert_allclose(psi_values(ASYM, PowerLaw(2))[1], 1 / 3)


def test_table_has_eighteen_rows():
    assert len(CASE_TABLE) == 18
    assert all(k[1] != "E" for k in CASE_TABLE)


def test_no_tie_state_agrees_with_table():
    # gaps (inf, 1, 2, inf): balls 1 and 2 use the unit gap, ball 3 the gap of 2
    z = minimal_norm(ASYM, Heat()).z
    np.testing.assert_allclose(z, [2.0, -1.5, -0.5], rtol=1e-15)
    np.testing.assert_allclose(table_subgradient(ASYM, Heat()), z, rtol=1e-15)
    np.testing.assert_allclose(fd_gradient(ASYM, Heat()), z, rtol=1e-6)


def test_symmetric_triple():
    # the middle ball splits its weight so that both gaps carry 3/2
    sub = minimal_norm(LINE3, Heat())
    np.testing.assert_allclose(sub.z, [1.5, 0.0, -1.5], rtol=1e-15)
    assert sub.lam[1] == pytest.approx(0.5)
    assert local_slope(LINE3, Heat()) == pytest.approx(math.sqrt(1.5), rel=1e-15)
    grid, refined = enumerate_minimum(LINE3, Heat())
    assert sub.norm_w == pytest.approx(min(grid, refined), rel=1e-12)


def test_table_value_is_not_a_subgradient_at_ties():
    table = table_subgradient(LINE3, Heat())
    np.testing.assert_allclose(table, [1.0, 0.0, -1.0])
    rng = np.random.default_rng(3)
    assert membership_violation(LINE3, Heat(), table, rng) > 1e-9
    assert membership_violation(LINE3, Heat(), minimal_norm(LINE3, Heat()).z, rng) <= 1e-10


@pytest.mark.parametrize("n", [2, 3, 10, 50])
def test_uniform_pinned_state_is_critical(n):
    s = pinned_uniform(n)
    for e in ENERGIES:
        assert np.all(minimal_norm(s, e).z == 0)
        assert local_slope(s, e) == 0


def test_random_six_particle_state_matches_enumeration():
    # gaps drawn from {1, 2} so several balls tie
    s = ParticleState(np.cumsum([0.0, 1.0, 1.0, 2.0, 2.0, 1.0]))
    for e in ENERGIES:
        grid, refined = enumerate_minimum(s, e)
        assert local_slope(s, e) == pytest.approx(min(grid, refined), rel=1e-12)


def test_widest_gap_contracts():
    s = ParticleState([0.0, 1.0, 4.0, 5.5, 6.0])
    for e in ENERGIES:
        v = -minimal_norm(s, e).z
        assert v[1] > 0 and v[2] < 0


def gaps_states(alphabet=None):
    gap = st.sampled_from(alphabet) if alphabet else st.floats(0.1, 4.0)
    return st.lists(gap, min_size=1, max_size=7).map(
        lambda g: ParticleState(np.concatenate(([0.0], np.cumsum(g)))))


@settings(max_examples=80, deadline=None)
@given(gaps_states(), st.sampled_from(ENERGIES))
def test_gradient_where_differentiable(state, energy):
    g = np.diff(state.positions)
    if state.n > 2 and np.min(np.abs(g[1:] / g[:-1] - 1)) < 1e-3:
        return
    ref = fd_gradient(state, energy)
    np.testing.assert_allclose(minimal_norm(state, energy).z, ref, rtol=1e-5, atol=1e-5 * np.max(np.abs(ref)))


@settings(max_examples=60, deadline=None)
@given(gaps_states([0.5, 1.0, 2.0]), st.sampled_from(ENERGIES), st.integers(0, 2**32 - 1))
def test_membership_and_minimality_with_ties(state, energy, seed):
    sub = minimal_norm(state, energy)
    assert membership_violation(state, energy, sub.z, np.random.default_rng(seed), directions=16) <= 1e-10
    grid, refined = enumerate_minimum(state, energy, sweeps=5)
    assert sub.norm_w <= min(grid, refined) * (1 + 1e-12) + 1e-15


@settings(max_examples=30, deadline=None)
@given(st.lists(st.sampled_from([0.25, 0.5]), min_size=2, max_size=6))
def test_pinned_interval_states(gaps):
    x = np.concatenate(([0.0], np.cumsum(gaps)))
    ell = x[-1] / 2
    s = ParticleState(x - ell, Interval(ell))
    sub = minimal_norm(s, Heat())
    assert sub.z[0] == 0 and sub.z[-1] == 0
    assert membership_violation(s, Heat(), sub.z, np.random.default_rng(0), directions=16) <= 1e-10
    grid, refined = enumerate_minimum(s, Heat(), sweeps=5)
    assert sub.norm_w <= min(grid, refined) * (1 + 1e-12) + 1e-15
