"""Exact reference solutions: Neumann heat cosine series and Barenblatt profiles."""
from __future__ import annotations

import math

import numpy as np
from scipy import optimize
from scipy.special import betainc

from ..core import Heat, InternalEnergy, PowerLaw
from ..errors import InputError
from ..quadrature import quad
from .profiles import SmoothProfile


class NeumannHeatSolution:
    """rho(t, x) = 1/(2l) + sum_n a_n cos(n pi (x + l) / (2 l)) exp(-(n pi / 2l)^2 t) on [-l, l]."""

    def __init__(self, halfwidth: float = 1.0, coefficients: dict[int, float] | None = None):
        self.ell = float(halfwidth)
        if not self.ell > 0:
            raise InputError("halfwidth must be positive")
        coeffs = dict(coefficients or {})
        if any(int(k) != k or k < 1 for k in coeffs):
            raise InputError("mode numbers must be positive integers")
        self.modes = np.array(sorted(int(k) for k in coeffs), dtype=float)
        self.amps = np.array([coeffs[k] for k in sorted(coeffs)], dtype=float)
        self.k = self.modes * math.pi / (2 * self.ell)
        grid = np.linspace(-self.ell, self.ell, 4001)
        if self.density(0.0, grid).min() <= 0:
            raise InputError("initial density must be positive")

    def _terms(self, t, x):
        x = np.asarray(x, dtype=float)[..., None]
        decay = np.exp(-self.k**2 * t)
        return x, self.amps * decay

    def density(self, t: float, x):
        x, a = self._terms(t, x)
        return 1.0 / (2 * self.ell) + np.sum(a * np.cos(self.k * (x + self.ell)), axis=-1)

    def derivative(self, t: float, x):
        x, a = self._terms(t, x)
        return -np.sum(a * self.k * np.sin(self.k * (x + self.ell)), axis=-1)

    def second_derivative(self, t: float, x):
        x, a = self._terms(t, x)
        return -np.sum(a * self.k**2 * np.cos(self.k * (x + self.ell)), axis=-1)

    def time_derivative(self, t: float, x):
        return self.second_derivative(t, x)

    def cdf(self, t: float, x):
        x, a = self._terms(t, np.clip(np.asarray(x, dtype=float), -self.ell, self.ell))
        return (x[..., 0] + self.ell) / (2 * self.ell) + np.sum(a * np.sin(self.k * (x + self.ell)) / self.k, axis=-1)

    def profile(self, t: float) -> SmoothProfile:
        return SmoothProfile(lambda x: self.density(t, x), lambda x: self.derivative(t, x), self.ell,
                             lambda x: self.cdf(t, x), name=f"neumann_heat(t={t:g})")

    def energy(self, t: float, energy: InternalEnergy | None = None) -> float:
        e = energy or Heat()
        return quad(lambda s: float(e.H(self.density(t, s))), -self.ell, self.ell)

    def fisher(self, t: float) -> float:
        return quad(lambda s: float(self.derivative(t, s) ** 2 / self.density(t, s)), -self.ell, self.ell)

    def fisher_integral(self, t: float) -> float:
        """Integral of the Fisher information over [0, t]."""
        return quad(self.fisher, 0.0, t, epsabs=1e-12) if t > 0 else 0.0


class BarenblattSolution:
    """Self-similar porous-medium solution rho = t^-a (C - k (x t^-a)^2)_+^(1/(m-1))."""

    def __init__(self, m: float = 2.0):
        self.m = float(m)
        if not self.m > 1:
            raise InputError("Barenblatt profiles need m > 1")
        self.alpha = 1.0 / (self.m + 1)
        self.kk = self.alpha * (self.m - 1) / (2 * self.m)
        self.p = 1.0 / (self.m - 1)
        self.C = self._normalise()

    def _mass(self, C: float) -> float:
        R = math.sqrt(C / self.kk)
        return quad(lambda y: (C - self.kk * y * y) ** self.p, -R, R, epsabs=1e-14, epsrel=1e-13)

    def _normalise(self) -> float:
        hi = 1.0
        while self._mass(hi) < 1:
            hi *= 2
        return optimize.brentq(lambda c: self._mass(c) - 1.0, 0.0 + 1e-12, hi, xtol=1e-15, rtol=1e-15)

    def radius(self, t: float) -> float:
        return math.sqrt(self.C / self.kk) * t**self.alpha

    def density(self, t: float, x):
        y = np.asarray(x, dtype=float) * t ** (-self.alpha)
        return t ** (-self.alpha) * np.maximum(self.C - self.kk * y * y, 0.0) ** self.p

    def derivative(self, t: float, x):
        y = np.asarray(x, dtype=float) * t ** (-self.alpha)
        base = np.maximum(self.C - self.kk * y * y, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = self.p * np.where(base > 0, base ** (self.p - 1), 0.0) * (-2 * self.kk * y)
        return t ** (-2 * self.alpha) * d

    def cdf(self, t: float, x):
        R = self.radius(t)
        u = np.clip(np.asarray(x, dtype=float) / R, -1.0, 1.0)
        return 0.5 + 0.5 * np.sign(u) * betainc(0.5, self.p + 1, u * u)

    def energy(self, t: float, energy: InternalEnergy | None = None) -> float:
        e = energy or PowerLaw(self.m)
        R = self.radius(t)
        return quad(lambda s: float(e.H(self.density(t, s))), -R, R)

    def fisher(self, t: float, energy: InternalEnergy | None = None) -> float:
        e = energy or PowerLaw(self.m)
        R = self.radius(t)

        def f(s):
            rho = float(self.density(t, s))
            if rho <= 0:
                return 0.0
            return float(self.derivative(t, s) ** 2 * e.d2H(rho) ** 2 * rho)

        return quad(f, -R, R, epsabs=1e-10)
