"""Particle states, inter-particle geometry and the discrete energy.

Each of the N particles carries mass 1/N, smeared uniformly over a ball of
diameter ``r_i = min(dx_i, dx_{i+1})`` centred at ``x_i``.  Gaps to missing
neighbours are infinite on the line; on an interval an end particle sitting
on the wall sees a mirror image of its inner neighbour.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import Domain, InternalEnergy, Interval, WholeLine
from .errors import InputError
from .quadrature import quad


@dataclass(frozen=True, eq=False)
class ParticleState:
    """N >= 2 strictly increasing positions with equal weights 1/N."""

    positions: np.ndarray
    domain: Domain = WholeLine()

    def __post_init__(self):
        x = np.array(self.positions, dtype=float).ravel()
        if x.size < 2:
            raise InputError("a particle state needs at least two particles")
        if not np.all(np.isfinite(x)):
            raise InputError("particle positions must be finite")
        if not np.all(np.diff(x) > 0):
            raise InputError("particle positions must be strictly increasing")
        if isinstance(self.domain, Interval):
            ell, tol = self.domain.halfwidth, self.domain.boundary_tol
            if x[0] < -ell - tol or x[-1] > ell + tol:
                raise InputError("particles must lie inside the interval")
            if abs(x[0] + ell) <= tol:
                x[0] = -ell
            if abs(x[-1] - ell) <= tol:
                x[-1] = ell
            if not np.all(np.diff(x) > 0):
                raise InputError("particle positions must be strictly increasing")
        x.setflags(write=False)
        object.__setattr__(self, "positions", x)

    @property
    def n(self) -> int:
        return self.positions.size

    @property
    def pinned(self) -> tuple[bool, bool]:
        """Whether the first/last particle sits on the interval wall."""
        if isinstance(self.domain, Interval):
            ell = self.domain.halfwidth
            return bool(self.positions[0] == -ell), bool(self.positions[-1] == ell)
        return False, False

    def pinned_mask(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        mask[0], mask[-1] = self.pinned
        return mask

    def moved(self, positions: np.ndarray) -> "ParticleState":
        return ParticleState(positions, self.domain)

    def __repr__(self):
        return f"ParticleState(n={self.n}, domain={self.domain!r})"


@dataclass(frozen=True, eq=False)
class Geometry:
    """Gaps dx_1..dx_{N+1} (may be inf) and ball diameters r_1..r_N."""

    gaps: np.ndarray
    radii: np.ndarray
    mirror_left: bool
    mirror_right: bool

    @property
    def interior_gaps(self) -> np.ndarray:
        """dx_2 .. dx_N, the gaps between actual particles."""
        return self.gaps[1:-1]


def geometry(state: ParticleState) -> Geometry:
    x = state.positions
    n = x.size
    gaps = np.empty(n + 1)
    gaps[1:n] = np.diff(x)
    gaps[0] = gaps[n] = np.inf
    left, right = state.pinned
    if left:
        ell = state.domain.halfwidth
        gaps[0] = x[0] + 2 * ell + x[1]
    if right:
        ell = state.domain.halfwidth
        gaps[n] = 2 * ell - x[-2] - x[-1]
    radii = np.minimum(gaps[:-1], gaps[1:])
    return Geometry(gaps, radii, left, right)


def discrete_energy(state: ParticleState, energy: InternalEnergy) -> float:
    """E_N = (1/N) sum_i h(N r_i)."""
    r = geometry(state).radii
    return float(np.mean(energy.h(state.n * r)))


def second_moment(obj) -> float:
    """Second moment of a particle state (atomic) or of a piecewise density."""
    if isinstance(obj, ParticleState):
        return float(np.mean(obj.positions**2))
    return obj.second_moment()


def gap_total(state: ParticleState) -> float:
    """Uncovered length between consecutive blobs."""
    g = geometry(state)
    r = g.radii
    return float(np.sum(g.gaps[1:-1] - 0.5 * r[:-1] - 0.5 * r[1:]))


def uniform_ratio(state: ParticleState) -> float:
    """max |dx_{i+1}/dx_i - 1| over interior neighbouring gap pairs."""
    d = geometry(state).interior_gaps
    if d.size < 2:
        return 0.0
    return float(np.max(np.abs(d[1:] / d[:-1] - 1.0)))


class PiecewiseDensity:
    """Probability density given piece by piece on disjoint intervals.

    Pieces are either constant (``values``) or described by vectorised
    callables (``funcs`` and their derivatives ``derivs``).  Outside the
    pieces the density vanishes.
    """

    def __init__(self, left: Sequence[float], right: Sequence[float], values: Sequence[float] | None = None,
                 funcs: Sequence[Callable] | None = None, derivs: Sequence[Callable] | None = None,
                 mass: float = 1.0):
        self.left = np.asarray(left, dtype=float)
        self.right = np.asarray(right, dtype=float)
        if self.left.shape != self.right.shape or np.any(self.right <= self.left):
            raise InputError("pieces must be non-empty intervals")
        if np.any(self.left[1:] < self.right[:-1] - 1e-15 * np.abs(self.right[:-1])):
            raise InputError("pieces must be ordered and disjoint")
        if (values is None) == (funcs is None):
            raise InputError("give either constant values or piece functions")
        self.values = None if values is None else np.asarray(values, dtype=float)
        self.funcs = None if funcs is None else list(funcs)
        self.derivs = None if derivs is None else list(derivs)
        self.mass = float(mass)
        self._piece_mass = None

    @property
    def constant(self) -> bool:
        return self.values is not None

    @property
    def n_pieces(self) -> int:
        return self.left.size

    @property
    def support(self) -> tuple[float, float]:
        return float(self.left[0]), float(self.right[-1])

    def _locate(self, x: np.ndarray) -> np.ndarray:
        """Index of the piece containing each x, or -1."""
        idx = np.searchsorted(self.left, x, side="right") - 1
        inside = (idx >= 0) & (x <= self.right[np.clip(idx, 0, None)])
        return np.where(inside, idx, -1)

    def _apply(self, x, table, const):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        idx = self._locate(x)
        if self.constant:
            hit = idx >= 0
            out[hit] = const(idx[hit])
            return out
        for k in np.unique(idx[idx >= 0]):
            sel = idx == k
            out[sel] = table[k](x[sel])
        return out

    def __call__(self, x):
        return self._apply(x, self.funcs, lambda i: self.values[i])

    def derivative(self, x):
        if not self.constant and self.derivs is None:
            raise InputError("density has no derivative evaluators")
        return self._apply(x, self.derivs, lambda i: 0.0)

    def piece(self, k: int) -> Callable:
        if self.constant:
            v = self.values[k]
            return lambda x: np.full_like(np.asarray(x, dtype=float), v)
        return self.funcs[k]

    def integrate_pieces(self, integrand: Callable, epsabs: float = 1e-12) -> np.ndarray:
        """Per-piece integrals of integrand(x, rho(x), k)."""
        out = np.empty(self.n_pieces)
        for k in range(self.n_pieces):
            f = self.piece(k)
            out[k] = quad(lambda s: float(integrand(s, f(np.asarray(s)), k)), self.left[k], self.right[k],
                          epsabs=epsabs)
        return out

    def piece_masses(self) -> np.ndarray:
        if self._piece_mass is None:
            if self.constant:
                self._piece_mass = self.values * (self.right - self.left)
            else:
                self._piece_mass = self.integrate_pieces(lambda s, v, k: v)
        return self._piece_mass

    def total_mass(self) -> float:
        return float(np.sum(self.piece_masses()))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        before = np.concatenate(([0.0], np.cumsum(self.piece_masses())))
        # pieces lying completely to the left of x
        full = np.searchsorted(self.right, flat, side="right")
        out = before[full]
        idx = self._locate(flat)
        partial = np.flatnonzero((idx >= 0) & (idx == full))
        if self.constant:
            k = idx[partial]
            out[partial] += self.values[k] * (flat[partial] - self.left[k])
        else:
            for j in partial:
                k = idx[j]
                f = self.funcs[k]
                out[j] += quad(lambda s: float(f(np.asarray(s))), self.left[k], flat[j])
        return np.minimum(out, self.mass).reshape(x.shape)

    def second_moment(self) -> float:
        if self.constant:
            a, b = self.left, self.right
            return float(np.sum(self.values * (b**3 - a**3) / 3.0))
        return float(np.sum(self.integrate_pieces(lambda s, v, k: s * s * v)))

    def quantile(self, grid_size: int = 4096):
        from .transport import QuantileFunction, pseudo_inverse

        if self.constant:
            return QuantileFunction.from_piecewise_constant(self)
        return pseudo_inverse(self.cdf, grid_size, support=self.support)


def blob_density(state: ParticleState) -> PiecewiseDensity:
    """Uniform blob of mass 1/N and width r_i around every particle."""
    r = geometry(state).radii
    x = state.positions
    return PiecewiseDensity(x - 0.5 * r, x + 0.5 * r, values=1.0 / (state.n * r))


def continuum_energy(density: PiecewiseDensity, energy: InternalEnergy) -> float:
    """E(rho) = integral of H(rho) over the support."""
    if density.constant:
        width = density.right - density.left
        return float(np.sum(width * energy.H(density.values)))
    return float(np.sum(density.integrate_pieces(lambda s, v, k: energy.H(v), epsabs=1e-12)))
