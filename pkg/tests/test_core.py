import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blobflow import Custom, Heat, Interval, PowerLaw, WholeLine
from blobflow.core import domain_from_spec, energy_from_spec
from blobflow.errors import BracketError, ConfigError, DomainError, HypothesisError, InputError
from blobflow.expr import compile_expression


@pytest.mark.parametrize("energy, x, expected", [
    (Heat(), 3.0, -math.log(3.0)),
    (PowerLaw(2), 2.0, 0.5),
    (Heat(), 1.0, 0.0),
])
def test_h_values(energy, x, expected):
    assert energy.h(x) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("energy, x, expected", [
    (Heat(), 2.0, 0.5),
    (PowerLaw(2), 3.0, 1 / 9),
    (PowerLaw(2), 1.0, 1.0),
])
def test_psi_values(energy, x, expected):
    assert energy.psi(x) == pytest.approx(expected, rel=1e-15)


def test_psi_inverse():
    assert Heat().psi_inverse(4.0) == pytest.approx(0.25, rel=1e-12)
    assert PowerLaw(2).psi_inverse(0.25) == pytest.approx(2.0, rel=1e-12)
    sq = Custom(lambda u: u**2, lambda u: 2 * u, lambda u: 2 + 0 * u)
    assert sq.psi_inverse(1.0, (0.5, 2.0)) == pytest.approx(1.0, rel=1e-12)


def test_psi_inverse_bad_bracket():
    sq = Custom(lambda u: u**2, lambda u: 2 * u, lambda u: 2 + 0 * u)
    with pytest.raises(BracketError):
        sq.psi_inverse(1.0, (2.0, 4.0))
    with pytest.raises(BracketError):
        sq.psi_inverse(1.0, (2.0, 1.0))


def test_h_rejects_nonpositive():
    with pytest.raises(DomainError):
        Heat().h(0.0)
    with pytest.raises(DomainError):
        PowerLaw(3).psi(np.array([1.0, -1.0]))


def test_pme_exponent_must_exceed_one():
    with pytest.raises(InputError):
        PowerLaw(1.0)
    with pytest.raises(InputError):
        PowerLaw(0.5)


@settings(max_examples=50, deadline=None)
@given(st.floats(1.1, 5.0), st.floats(0.05, 20.0))
def test_psi_is_minus_derivative_of_h(m, x):
    e = PowerLaw(m)
    step = 1e-6 * x
    fd = (e.h(x + step) - e.h(x - step)) / (2 * step)
    assert -fd == pytest.approx(e.psi(x), rel=1e-6)
    assert e.psi_inverse(e.psi(x)) == pytest.approx(x, rel=1e-10)


def test_Psi_roundtrip_and_closed_forms():
    heat, pme = Heat(), PowerLaw(2)
    # heat: Psi' = x, pme: Psi' = x^2 (up to additive constants)
    assert heat.Psi(3.0) - heat.Psi(1.0) == pytest.approx(4.0, rel=1e-10)
    assert pme.Psi(2.0) - pme.Psi(1.0) == pytest.approx(7 / 3, rel=1e-10)
    for e in (heat, pme):
        assert e.Psi_inverse(e.Psi(2.7)) == pytest.approx(2.7, rel=1e-10)


def test_custom_matches_heat():
    c = Custom(lambda u: u * np.log(u), lambda u: np.log(u) + 1, lambda u: 1 / u)
    x = np.array([0.3, 1.0, 4.0])
    np.testing.assert_allclose(c.psi(x), Heat().psi(x), rtol=1e-13)
    np.testing.assert_allclose(c.dpsi(x), Heat().dpsi(x), rtol=1e-13)


def test_custom_rejects_wrong_derivative():
    with pytest.raises(HypothesisError):
        Custom(lambda u: u**2, lambda u: 3 * u, lambda u: 2 + 0 * u)


def test_custom_rejects_concave_density():
    with pytest.raises(HypothesisError):
        Custom(lambda u: -(u**2), lambda u: -2 * u, lambda u: -2 + 0 * u)


def test_expression_grammar():
    f = compile_expression("x^2 + 1")
    assert f(np.array([2.0]))[0] == 5.0
    g = compile_expression("x*log(x) - exp(-x)/2")
    assert g(1.0) == pytest.approx(-math.exp(-1) / 2)
    for bad in ("__import__('os')", "y + 1", "x.real", "sin(x)", "x if x else 1"):
        with pytest.raises(ConfigError):
            compile_expression(bad)


def test_specs():
    assert isinstance(energy_from_spec({"type": "heat"}), Heat)
    assert energy_from_spec({"type": "pme", "m": 3}).m == 3
    e = energy_from_spec({"type": "custom", "H": "x^2", "dH": "2*x", "d2H": "2+0*x"})
    assert e.psi(2.0) == pytest.approx(0.25)
    assert domain_from_spec({"type": "interval", "halfwidth": 2}) == Interval(2.0)
    assert domain_from_spec({"type": "line"}) == WholeLine()
    with pytest.raises(InputError):
        domain_from_spec({"type": "circle"})
    with pytest.raises(InputError):
        Interval(-1.0)
