"""Domains and internal-energy densities.

An internal energy is described by its density ``H`` together with the two
derived scalar functions used throughout the solver::

    h(x)   = x * H(1/x)        (energy of a blob of width x/N, rescaled)
    psi(x) = -h'(x)            (pressure generated by a gap of width x/N)

Closed forms are used for the heat and porous-medium densities; custom
densities are composed from user supplied ``H, H', H''``.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy import integrate, optimize

from .errors import BracketError, DomainError, HypothesisError, InputError

ArrayLike = Union[float, np.ndarray]

PSI_INVERSE_RTOL = 1e-12


@dataclass(frozen=True)
class WholeLine:
    """The real line; end particles see an infinitely distant neighbour."""

    @property
    def bounded(self) -> bool:
        return False

    def describe(self) -> dict:
        return {"type": "line"}


@dataclass(frozen=True)
class Interval:
    """Symmetric interval [-halfwidth, halfwidth] with no-flux boundaries."""

    halfwidth: float

    def __post_init__(self):
        ell = float(self.halfwidth)
        if not (math.isfinite(ell) and ell > 0):
            raise InputError(f"interval halfwidth must be positive and finite, got {self.halfwidth!r}")
        object.__setattr__(self, "halfwidth", ell)

    @property
    def bounded(self) -> bool:
        return True

    @property
    def boundary_tol(self) -> float:
        # mirror particles switch on when an end particle sits this close to the wall
        return 1e-14 * self.halfwidth

    def describe(self) -> dict:
        return {"type": "interval", "halfwidth": self.halfwidth}


Domain = Union[WholeLine, Interval]


def _positive(x: ArrayLike, what: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(arr > 0):
        raise DomainError(f"{what} must be positive")
    return arr


class InternalEnergy(ABC):
    """Energy density H on [0, inf) with the derived functions h and psi."""

    name = "energy"
    psi_at_infinity = 0.0

    @abstractmethod
    def H(self, u: ArrayLike) -> ArrayLike: ...

    @abstractmethod
    def dH(self, u: ArrayLike) -> ArrayLike: ...

    @abstractmethod
    def d2H(self, u: ArrayLike) -> ArrayLike: ...

    def h(self, x: ArrayLike) -> ArrayLike:
        x = _positive(x)
        return x * self.H(1.0 / x)

    def dh(self, x: ArrayLike) -> ArrayLike:
        u = 1.0 / _positive(x)
        return self.H(u) - u * self.dH(u)

    def psi(self, x: ArrayLike) -> ArrayLike:
        return -self.dh(x)

    def dpsi(self, x: ArrayLike) -> ArrayLike:
        # psi' = -h'' and h''(x) = H''(1/x) / x^3
        u = 1.0 / _positive(x)
        return -self.d2H(u) * u**3

    def psi_inverse(self, y: ArrayLike, bracket: tuple[float, float] | None = None) -> ArrayLike:
        """Solve psi(x) = y by geometric bisection."""
        y = _positive(y, "y")
        return _bisect_decreasing(self.psi, y, bracket)

    def Psi(self, x: float) -> float:
        """An antiderivative of 1/psi; only differences of Psi are meaningful."""
        x = float(_positive(x))
        val, _ = integrate.quad(lambda s: 1.0 / self.psi(s), 1.0, x, limit=200)
        return val

    def Psi_inverse(self, y: float) -> float:
        lo, hi = 1.0, 1.0
        while self.Psi(lo) > y:
            lo *= 0.5
        while self.Psi(hi) < y:
            hi *= 2.0
        return optimize.brentq(lambda s: self.Psi(s) - y, lo, hi, xtol=1e-14, rtol=1e-14)

    def describe(self) -> dict:
        return {"type": self.name}


class Heat(InternalEnergy):
    """H(u) = u log u; the flow is the linear heat equation."""

    name = "heat"

    def H(self, u):
        u = np.asarray(u, dtype=float)
        return np.where(u > 0, u * np.log(np.where(u > 0, u, 1.0)), 0.0)

    def dH(self, u):
        return np.log(u) + 1.0

    def d2H(self, u):
        return 1.0 / np.asarray(u, dtype=float)

    def h(self, x):
        return -np.log(_positive(x))

    def dh(self, x):
        return -1.0 / _positive(x)

    def psi(self, x):
        return 1.0 / _positive(x)

    def dpsi(self, x):
        return -1.0 / _positive(x) ** 2

    def psi_inverse(self, y, bracket=None):
        return 1.0 / _positive(y, "y")

    def Psi(self, x):
        return 0.5 * float(x) ** 2

    def Psi_inverse(self, y):
        return math.sqrt(2.0 * y)


class PowerLaw(InternalEnergy):
    """H(u) = u^m / (m - 1); the flow is the porous-medium equation."""

    name = "pme"

    def __init__(self, m: float):
        m = float(m)
        if not (math.isfinite(m) and m > 1):
            raise InputError(f"porous-medium exponent must exceed 1, got {m!r}")
        self.m = m

    def __repr__(self):
        return f"PowerLaw(m={self.m!r})"

    def H(self, u):
        return np.asarray(u, dtype=float) ** self.m / (self.m - 1)

    def dH(self, u):
        return self.m * np.asarray(u, dtype=float) ** (self.m - 1) / (self.m - 1)

    def d2H(self, u):
        return self.m * np.asarray(u, dtype=float) ** (self.m - 2)

    def h(self, x):
        return _positive(x) ** (1 - self.m) / (self.m - 1)

    def dh(self, x):
        return -_positive(x) ** (-self.m)

    def psi(self, x):
        return _positive(x) ** (-self.m)

    def dpsi(self, x):
        return -self.m * _positive(x) ** (-self.m - 1)

    def psi_inverse(self, y, bracket=None):
        return _positive(y, "y") ** (-1.0 / self.m)

    def Psi(self, x):
        return float(x) ** (self.m + 1) / (self.m + 1)

    def Psi_inverse(self, y):
        return ((self.m + 1) * y) ** (1.0 / (self.m + 1))

    def describe(self):
        return {"type": self.name, "m": self.m}


class Custom(InternalEnergy):
    """User supplied density with its first two derivatives.

    The structural hypotheses are spot-checked on a log-spaced sample at
    construction: h convex and non-increasing, psi strictly decreasing,
    consistent derivatives, and psi tending to ``psi_at_infinity``.
    """

    name = "custom"

    def __init__(self, H: Callable, dH: Callable, d2H: Callable, psi_at_infinity: float = 0.0,
                 source: dict | None = None):
        self._H, self._dH, self._d2H = H, dH, d2H
        self.psi_at_infinity = float(psi_at_infinity)
        self.source = source
        self._check()

    def H(self, u):
        return np.asarray(self._H(np.asarray(u, dtype=float)), dtype=float)

    def dH(self, u):
        return np.asarray(self._dH(np.asarray(u, dtype=float)), dtype=float)

    def d2H(self, u):
        return np.asarray(self._d2H(np.asarray(u, dtype=float)), dtype=float)

    def _check(self):
        x = np.logspace(-3, 3, 121)
        with np.errstate(all="ignore"):
            u = 1.0 / x
            vals = [self.H(u), self.dH(u), self.d2H(u)]
            if not all(np.all(np.isfinite(v)) for v in vals):
                raise HypothesisError("custom density is not finite on the sample grid")
            # derivative consistency, central differences in u
            du = 1e-6 * u
            fd1 = (self.H(u + du) - self.H(u - du)) / (2 * du)
            fd2 = (self.dH(u + du) - self.dH(u - du)) / (2 * du)
        for fd, exact, label in ((fd1, vals[1], "H'"), (fd2, vals[2], "H''")):
            scale = np.abs(exact) + np.abs(fd) + 1e-8
            if np.any(np.abs(fd - exact) > 1e-4 * scale):
                raise HypothesisError(f"supplied {label} is inconsistent with its antiderivative")
        hx = self.h(x)
        psi = self.psi(x)
        scale = np.max(np.abs(psi)) + 1.0
        if np.any(psi < -1e-12 * scale):
            raise HypothesisError("h must be non-increasing (psi >= 0)")
        if np.any(vals[2] <= 0) or np.any(np.diff(psi) >= 0):
            raise HypothesisError("psi must be strictly decreasing (h'' > 0)")
        # discrete convexity of h on the (non-uniform) grid
        x0, x1, x2 = x[:-2], x[1:-1], x[2:]
        chord = ((x2 - x1) * hx[:-2] + (x1 - x0) * hx[2:]) / (x2 - x0)
        if np.any(hx[1:-1] > chord + 1e-12 * (np.abs(chord) + 1)):
            raise HypothesisError("h must be convex")
        far = float(self.psi(1e8))
        if abs(far - self.psi_at_infinity) > 1e-6 * (abs(float(self.psi(1.0))) + abs(self.psi_at_infinity)):
            raise HypothesisError(
                f"psi(1e8) = {far:.6g} does not approach the declared limit {self.psi_at_infinity:.6g}")

    def describe(self):
        d = {"type": self.name}
        if self.source:
            d.update(self.source)
        return d


def _bisect_decreasing(f: Callable, y: np.ndarray, bracket=None, max_iter: int = 400) -> ArrayLike:
    """Vectorised geometric bisection for f(x) = y with f decreasing on (0, inf)."""
    scalar = np.ndim(y) == 0
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if bracket is not None:
        a, b = float(bracket[0]), float(bracket[1])
        if not (0 < a < b):
            raise BracketError(f"invalid bracket {bracket!r}")
        lo = np.full_like(y, a)
        hi = np.full_like(y, b)
        flo, fhi = np.asarray(f(lo)), np.asarray(f(hi))
        if np.any(flo < y) or np.any(fhi > y):
            raise BracketError("bracket does not straddle the target value")
    else:
        lo = np.ones_like(y)
        hi = np.ones_like(y)
        for _ in range(2100):
            need = f(lo) < y
            if not need.any():
                break
            lo[need] *= 0.5
        else:
            raise BracketError("could not bracket the target from below")
        for _ in range(2100):
            need = f(hi) > y
            if not need.any():
                break
            hi[need] *= 2.0
        else:
            raise BracketError("could not bracket the target from above (limit of psi at infinity too large)")
        flo, fhi = f(lo), f(hi)
    x = np.sqrt(lo * hi)
    for _ in range(max_iter):
        x = np.sqrt(lo * hi)
        fx = np.asarray(f(x))
        if np.any(fx > flo) or np.any(fx < fhi):
            raise HypothesisError("psi is not monotone on the bracket")
        done = (np.abs(fx - y) <= PSI_INVERSE_RTOL * y) | (hi - lo <= 4 * np.spacing(hi))
        if done.all():
            break
        go_right = fx > y
        lo = np.where(go_right, x, lo)
        flo = np.where(go_right, fx, flo)
        hi = np.where(go_right, hi, x)
        fhi = np.where(go_right, fhi, fx)
    return float(x[0]) if scalar else x


def energy_from_spec(spec: dict) -> InternalEnergy:
    """Build an energy from a plain dictionary such as ``{"type": "pme", "m": 2}``."""
    kind = spec.get("type")
    if kind == "heat":
        return Heat()
    if kind == "pme":
        return PowerLaw(spec.get("m", 2.0))
    if kind == "custom":
        from .expr import compile_expression

        return Custom(compile_expression(spec["H"]), compile_expression(spec["dH"]),
                      compile_expression(spec["d2H"]), spec.get("psi_at_infinity", 0.0),
                      source={k: spec[k] for k in ("H", "dH", "d2H")})
    raise InputError(f"unknown energy type {kind!r}")


def domain_from_spec(spec: dict) -> Domain:
    kind = spec.get("type")
    if kind == "line":
        return WholeLine()
    if kind == "interval":
        return Interval(spec.get("halfwidth", 1.0))
    raise InputError(f"unknown domain type {kind!r}")
