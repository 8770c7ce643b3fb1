"""Smooth initial densities, quantile sampling and Gaussian mollification."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import erf, ndtr

from ..core import Domain, Interval, WholeLine
from ..discrete import ParticleState, PiecewiseDensity
from ..errors import InputError
from ..transport import QuantileFunction, pseudo_inverse

_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


def _cumulative_cdf(rho: Callable, a: float, b: float, cells: int = 256) -> Callable:
    """CDF of rho on [a, b] by composite 20-point Gauss-Legendre, vectorised."""
    edges = np.linspace(a, b, cells + 1)
    half = 0.5 * np.diff(edges)
    mids = 0.5 * (edges[1:] + edges[:-1])
    pts = mids[:, None] + half[:, None] * _GL_X[None, :]
    masses = np.sum(rho(pts) * _GL_W[None, :], axis=1) * half
    before = np.concatenate(([0.0], np.cumsum(masses)))

    def cdf(x):
        x = np.clip(np.asarray(x, dtype=float), a, b)
        k = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, cells - 1)
        lo = edges[k]
        h = 0.5 * (x - lo)
        p = (lo + h)[..., None] + h[..., None] * _GL_X
        return before[k] + h * np.sum(rho(p) * _GL_W, axis=-1)

    cdf.total = float(before[-1])
    return cdf


@dataclass(frozen=True, eq=False)
class SmoothProfile:
    """Density on [-r, r], C^1 and bounded below by a positive constant, with unit mass."""

    density: Callable
    derivative: Callable
    half_width: float
    cdf: Callable | None = None
    name: str = "profile"

    def __post_init__(self):
        r = float(self.half_width)
        if not (math.isfinite(r) and r > 0):
            raise InputError("profile half width must be positive")
        object.__setattr__(self, "half_width", r)
        if self.cdf is None:
            object.__setattr__(self, "cdf", _cumulative_cdf(self.density, -r, r))
        grid = np.linspace(-r, r, 4001)
        vals = np.asarray(self.density(grid), dtype=float)
        if not np.all(np.isfinite(vals)) or vals.min() <= 0:
            raise InputError(f"profile {self.name!r} must be positive on its support")
        mass = float(self.cdf(np.asarray(r)))
        if abs(mass - 1.0) > 1e-10:
            raise InputError(f"profile {self.name!r} has mass {mass!r}, expected 1")
        object.__setattr__(self, "_min", float(vals.min()))
        object.__setattr__(self, "_max", float(vals.max()))

    @property
    def min_value(self) -> float:
        return self._min

    @property
    def max_value(self) -> float:
        return self._max

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        r = self.half_width
        inside = np.abs(x) <= r
        return np.where(inside, self.density(np.clip(x, -r, r)), 0.0)

    def quantile(self, eta) -> np.ndarray:
        """Inverse CDF by vectorised bisection (to floating point resolution)."""
        eta = np.atleast_1d(np.asarray(eta, dtype=float))
        r = self.half_width
        lo, hi = np.full_like(eta, -r), np.full_like(eta, r)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            below = self.cdf(mid) < eta
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.all(hi - lo <= 4 * np.spacing(r)):
                break
        return 0.5 * (lo + hi)

    def quantile_function(self, grid_size: int = 4096) -> QuantileFunction:
        return pseudo_inverse(self.cdf, grid_size, support=(-self.half_width, self.half_width))

    def as_density(self) -> PiecewiseDensity:
        return PiecewiseDensity([-self.half_width], [self.half_width], funcs=[self.density],
                                derivs=[self.derivative])

    # -- named profiles -------------------------------------------------

    @classmethod
    def uniform(cls, r: float = 1.0) -> "SmoothProfile":
        c = 1.0 / (2 * r)
        return cls(lambda x: np.full_like(np.asarray(x, dtype=float), c),
                   lambda x: np.zeros_like(np.asarray(x, dtype=float)), r,
                   lambda x: (np.clip(x, -r, r) + r) * c, name="uniform")

    @classmethod
    def linear(cls, slope: float = 0.5, r: float = 1.0) -> "SmoothProfile":
        """rho(x) = (1 + slope x / r) / (2 r); slope in (-1, 1)."""
        if not abs(slope) < 1:
            raise InputError("linear profile needs |slope| < 1")
        c = 1.0 / (2 * r)

        def cdf(x):
            x = np.clip(np.asarray(x, dtype=float), -r, r)
            return c * ((x + r) + slope * (x * x - r * r) / (2 * r))

        return cls(lambda x: c * (1 + slope * np.asarray(x) / r),
                   lambda x: np.full_like(np.asarray(x, dtype=float), c * slope / r), r, cdf, name="linear")

    @classmethod
    def truncated_gaussian(cls, sigma: float = 0.5, r: float = 1.0) -> "SmoothProfile":
        z = 0.5 * (erf(r / (sigma * math.sqrt(2))) - erf(-r / (sigma * math.sqrt(2))))
        c = 1.0 / (sigma * math.sqrt(2 * math.pi) * z)

        def cdf(x):
            x = np.clip(np.asarray(x, dtype=float), -r, r)
            return (ndtr(x / sigma) - ndtr(-r / sigma)) / z

        return cls(lambda x: c * np.exp(-0.5 * (np.asarray(x) / sigma) ** 2),
                   lambda x: -c * np.asarray(x) / sigma**2 * np.exp(-0.5 * (np.asarray(x) / sigma) ** 2),
                   r, cdf, name="truncated_gaussian")


def well_prepared(profile: SmoothProfile, n: int, domain: Domain | None = None) -> ParticleState:
    """Quantile sampling x_1 = Phi(0), x_i = Phi(i/N) for i >= 2."""
    if domain is None:
        domain = Interval(profile.half_width)
    if isinstance(domain, Interval) and domain.halfwidth != profile.half_width:
        raise InputError("on an interval the profile support must be the whole interval")
    return quantile_sample(profile.quantile, profile.half_width, n, domain)


def quantile_sample(quantile: Callable, r: float, n: int, domain: Domain) -> ParticleState:
    """End particles at -r and r, interior particles at quantile(i/N), i = 2..N-1."""
    if n < 2:
        raise InputError("need at least two particles")
    x = np.empty(n)
    x[0], x[-1] = -r, r
    if n > 2:
        x[1:-1] = quantile(np.arange(2, n) / n)
    return ParticleState(x, domain)


def _as_mixture(source) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Write a measure as a mixture of uniform pieces: masses w on [p0, p1] (atoms when p0 == p1)."""
    if isinstance(source, PiecewiseDensity):
        q = source.quantile()
    elif isinstance(source, SmoothProfile):
        q = source.quantile_function()
    elif isinstance(source, ParticleState):
        q = QuantileFunction.from_atoms(source.positions)
    elif isinstance(source, QuantileFunction) and source.piecewise_linear:
        q = source
    elif callable(source):
        q = pseudo_inverse(source)
    else:
        raise InputError("cannot mollify this object")
    eta, phi = q.eta, q.phi
    w = np.diff(eta)
    keep = w > 0
    return w[keep], phi[:-1][keep], phi[1:][keep]


def mollify(source, delta: float, domain: Domain) -> SmoothProfile:
    """Gaussian regularisation restricted to a symmetric support and renormalised.

    ``source`` may be a piecewise density, an atomic state, a smooth profile
    or a CDF callable.  On an interval the support is the whole interval
    (requires 1/delta >= halfwidth); on the line it is the symmetric hull of
    the source support cut at radius 1/delta.
    """
    if not delta > 0:
        raise InputError("delta must be positive")
    w, p0, p1 = _as_mixture(source)
    if isinstance(domain, Interval):
        r = domain.halfwidth
        if 1.0 / delta < r:
            raise InputError("mollified support must cover the interval: need delta <= 1/halfwidth")
    else:
        r = min(max(abs(p0.min()), abs(p1.max())), 1.0 / delta)
    width = p1 - p0
    atom = width <= 1e-15 * (1 + np.abs(p0))
    safe = np.where(atom, 1.0, width)
    s2pi = math.sqrt(2 * math.pi)

    def chunked(fn):
        # the mixture can have thousands of pieces: evaluate in blocks
        def wrapped(x):
            x = np.asarray(x, dtype=float)
            flat = x.ravel()
            out = np.empty_like(flat)
            step = max(1, 2**22 // max(w.size, 1))
            for k in range(0, flat.size, step):
                out[k:k + step] = fn(flat[k:k + step])
            return out.reshape(x.shape)

        return wrapped

    def phi_n(u):
        return np.exp(-0.5 * u * u) / s2pi

    @chunked
    def kernel(x):
        x = np.asarray(x, dtype=float)[..., None]
        u0, u1 = (x - p0) / delta, (x - p1) / delta
        spread = (ndtr(u0) - ndtr(u1)) / safe
        point = phi_n(u0) / delta
        return np.sum(w * np.where(atom, point, spread), axis=-1)

    @chunked
    def kernel_prime(x):
        x = np.asarray(x, dtype=float)[..., None]
        u0, u1 = (x - p0) / delta, (x - p1) / delta
        spread = (phi_n(u0) - phi_n(u1)) / (delta * safe)
        point = -u0 * phi_n(u0) / delta**2
        return np.sum(w * np.where(atom, point, spread), axis=-1)

    def anti(u):
        return u * ndtr(u) + phi_n(u)

    @chunked
    def kernel_cdf(x):
        x = np.asarray(x, dtype=float)[..., None]
        u0, u1 = (x - p0) / delta, (x - p1) / delta
        spread = delta * (anti(u0) - anti(u1)) / safe
        return np.sum(w * np.where(atom, ndtr(u0), spread), axis=-1)

    base = float(kernel_cdf(np.asarray(-r)))
    norm = float(kernel_cdf(np.asarray(r))) - base
    if not norm > 1e-300:
        raise InputError("mollified density vanishes on the admissible support")

    def cdf(x):
        x = np.clip(np.asarray(x, dtype=float), -r, r)
        return np.clip((kernel_cdf(x) - base) / norm, 0.0, 1.0)

    return SmoothProfile(lambda x: kernel(x) / norm, lambda x: kernel_prime(x) / norm, r, cdf,
                         name=f"mollified(delta={delta:g})")
