"""One-dimensional optimal transport through quantile functions.

In one dimension the quadratic Wasserstein distance is the L2(0, 1) distance
between pseudo-inverses of the cumulative distribution functions, so every
distance here is an integral over the quantile variable eta.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .discrete import ParticleState
from .errors import InputError
from .quadrature import quad

DEFAULT_GRID = 4096


class QuantileFunction:
    """Non-decreasing right-continuous map [0, 1] -> R.

    Two representations are used.  ``nodes`` mode stores a right-continuous
    piecewise-linear interpolant through sorted ``(eta, phi)`` pairs, where
    a repeated eta encodes a jump; this is exact for atomic and piecewise
    constant measures.  ``func`` mode wraps a closed-form evaluator together
    with the eta locations of its kinks.
    """

    def __init__(self, func: Callable | None = None, *, nodes: tuple[np.ndarray, np.ndarray] | None = None,
                 breaks=()):
        if (func is None) == (nodes is None):
            raise InputError("give exactly one of func or nodes")
        self.func = func
        if nodes is not None:
            eta, phi = (np.asarray(a, dtype=float) for a in nodes)
            if eta.shape != phi.shape or eta.size < 2 or np.any(np.diff(eta) < 0) or np.any(np.diff(phi) < 0):
                raise InputError("quantile nodes must be sorted and non-decreasing")
            self.eta, self.phi = eta, phi
        else:
            self.eta = self.phi = None
        self.breaks = np.unique(np.concatenate(([0.0, 1.0], np.asarray(breaks, dtype=float))))

    @classmethod
    def from_atoms(cls, positions) -> "QuantileFunction":
        x = np.sort(np.asarray(positions, dtype=float))
        n = x.size
        eta = np.repeat(np.arange(n + 1) / n, 2)[1:-1]
        return cls(nodes=(eta, np.repeat(x, 2)))

    @classmethod
    def uniform(cls, a: float, b: float) -> "QuantileFunction":
        return cls(nodes=(np.array([0.0, 1.0]), np.array([a, b], dtype=float)))

    @classmethod
    def from_piecewise_constant(cls, density) -> "QuantileFunction":
        """Exact quantile of a piecewise constant density (linear on each piece)."""
        masses = density.values * (density.right - density.left)
        cum = np.concatenate(([0.0], np.cumsum(masses))) / np.sum(masses)
        cum[-1] = 1.0
        eta = np.column_stack((cum[:-1], cum[1:])).ravel()
        phi = np.column_stack((density.left, density.right)).ravel()
        return cls(nodes=(eta, phi))

    @property
    def piecewise_linear(self) -> bool:
        return self.eta is not None

    def __call__(self, eta):
        eta = np.asarray(eta, dtype=float)
        if self.func is not None:
            return self.func(eta)
        # right-continuous: choose the last node with node_eta <= eta
        k = np.clip(np.searchsorted(self.eta, eta, side="right") - 1, 0, self.eta.size - 2)
        # skip zero-length segments (jumps) by looking at the segment that starts at k
        e0, e1 = self.eta[k], self.eta[k + 1]
        p0, p1 = self.phi[k], self.phi[k + 1]
        width = e1 - e0
        frac = np.divide(eta - e0, width, out=np.zeros_like(eta), where=width > 0)
        out = p0 + np.clip(frac, 0.0, 1.0) * (p1 - p0)
        return np.where(eta >= 1.0, self.phi[-1], out)

    def segments(self):
        """Iterate (eta0, eta1, phi0, phi1) for non-degenerate linear pieces."""
        for k in range(self.eta.size - 1):
            if self.eta[k + 1] > self.eta[k]:
                yield self.eta[k], self.eta[k + 1], self.phi[k], self.phi[k + 1]


def pseudo_inverse(cdf: Callable, grid_size: int = DEFAULT_GRID, support: tuple[float, float] | None = None,
                   xtol: float = 1e-12) -> QuantileFunction:
    """Numerical pseudo-inverse phi(eta) = inf{x : F(x) > eta}.

    ``grid_size + 1`` equispaced nodes are each located by bisection to
    ``xtol``.  Atoms of the measure (plateaus of phi) are detected and their
    exact eta-extent [F(x-), F(x)] is inserted, so step CDFs invert exactly.
    """
    if grid_size < 1024:
        raise InputError("quantile grids need at least 1024 nodes")
    if support is None:
        support = _find_support(cdf)
    a, b = float(support[0]), float(support[1])
    sample = np.asarray(cdf(np.linspace(a, b, 4097)), dtype=float)
    if np.any(np.diff(sample) < -1e-14) or sample.min() < -1e-14 or sample.max() > 1 + 1e-12:
        raise InputError("cdf samples are not a non-decreasing map into [0, 1]")
    eta = np.arange(grid_size + 1) / grid_size
    target = eta.copy()
    target[-1] = 1.0 - 1e-15  # phi(1) is the left limit
    lo = np.full_like(eta, a - 1e-12 * (1 + abs(a)))
    hi = np.full_like(eta, b)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        above = np.asarray(cdf(mid)) > target
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
        if np.all(hi - lo <= xtol * (1 + np.abs(hi))):
            break
    phi = np.maximum.accumulate(hi)
    if phi[0] < a:
        phi[0] = a
    values, first, counts = np.unique(phi, return_index=True, return_counts=True)
    nodes_eta, nodes_phi = [], []
    for v, i0, c in zip(values, first, counts):
        if c > 1:
            # a plateau of phi is an atom of the measure: use its exact quantile range
            left_mass = float(cdf(np.asarray(v - xtol * (1 + abs(v)))))
            right_mass = float(cdf(np.asarray(v)))
            if right_mass - left_mass > 1e-9:
                nodes_eta += [max(left_mass, 0.0), min(right_mass, 1.0)]
                nodes_phi += [v, v]
                continue
        nodes_eta += list(eta[i0:i0 + c])
        nodes_phi += [v] * c
    ne, npv = np.asarray(nodes_eta), np.asarray(nodes_phi)
    order = np.lexsort((npv, ne))
    return QuantileFunction(nodes=(ne[order], np.maximum.accumulate(npv[order])))


def _find_support(cdf: Callable) -> tuple[float, float]:
    a, b = -1.0, 1.0
    while float(cdf(np.asarray(a))) > 0 and a > -1e12:
        a *= 2
    while float(cdf(np.asarray(b))) < 1 and b < 1e12:
        b *= 2
    return a, b


def d2_atomic_atomic(a: ParticleState, b: ParticleState) -> float:
    """Quadratic Wasserstein distance between two equal-weight atomic measures."""
    x, y = np.sort(a.positions), np.sort(b.positions)
    if x.size != y.size:
        raise InputError("atomic measures must have the same number of particles")
    return float(np.sqrt(np.mean((x - y) ** 2)))


def _linear_gap_integral(c: float, e0: float, e1: float, p0: float, p1: float) -> float:
    """Integral over [e0, e1] of (c - phi)^2 with phi linear from p0 to p1."""
    u, v = c - p0, c - p1
    return (e1 - e0) * (u * u + u * v + v * v) / 3.0


def d2_atomic_density(a: ParticleState, phi: QuantileFunction, epsabs: float = 1e-10) -> float:
    """W2 distance between an atomic measure and a measure given by its quantile."""
    x = np.sort(a.positions)
    n = x.size
    total = 0.0
    if phi.piecewise_linear:
        cells = np.arange(n + 1) / n
        for e0, e1, p0, p1 in phi.segments():
            # split the linear segment at the atomic cell boundaries
            i0 = min(int(np.floor(e0 * n)), n - 1)
            cuts = np.concatenate(([e0], cells[(cells > e0) & (cells < e1)], [e1]))
            for k, (s0, s1) in enumerate(zip(cuts[:-1], cuts[1:])):
                q0 = p0 + (p1 - p0) * (s0 - e0) / (e1 - e0)
                q1 = p0 + (p1 - p0) * (s1 - e0) / (e1 - e0)
                total += _linear_gap_integral(x[min(i0 + k, n - 1)], s0, s1, q0, q1)
    else:
        for i in range(n):
            e0, e1 = i / n, (i + 1) / n
            inner = phi.breaks[(phi.breaks > e0) & (phi.breaks < e1)]
            total += quad(lambda s: float((x[i] - phi(np.asarray(s))) ** 2), e0, e1, epsabs=epsabs / n,
                          points=inner if inner.size else None)
    return float(np.sqrt(max(total, 0.0)))


def d2_quantiles(p: QuantileFunction, q: QuantileFunction, epsabs: float = 1e-10) -> float:
    """W2 distance between two measures given by quantile functions."""
    pts = np.unique(np.concatenate((p.breaks, q.breaks,
                                    p.eta if p.piecewise_linear else [], q.eta if q.piecewise_linear else [])))
    total = 0.0
    for e0, e1 in zip(pts[:-1], pts[1:]):
        if e1 <= e0:
            continue
        if p.piecewise_linear and q.piecewise_linear:
            # both linear on [e0, e1]: integrate the squared linear difference exactly
            mid = 0.5 * (e0 + e1)
            d0 = float(p(np.asarray(e0)) - q(np.asarray(e0)))
            dm = float(p(np.asarray(mid)) - q(np.asarray(mid)))
            d1 = float(_left_limit(p, e1) - _left_limit(q, e1))
            total += (e1 - e0) * (d0 * d0 + 4 * dm * dm + d1 * d1) / 6.0
        else:
            total += quad(lambda s: float((p(np.asarray(s)) - q(np.asarray(s))) ** 2), e0, e1,
                          epsabs=epsabs / max(pts.size, 1))
    return float(np.sqrt(max(total, 0.0)))


def _left_limit(q: QuantileFunction, e: float) -> float:
    if not q.piecewise_linear:
        return float(q(np.asarray(e)))
    k = np.searchsorted(q.eta, e, side="left") - 1
    k = int(np.clip(k, 0, q.eta.size - 2))
    e0, e1 = q.eta[k], q.eta[k + 1]
    if e1 <= e0:
        return float(q.phi[k + 1])
    return float(q.phi[k] + (q.phi[k + 1] - q.phi[k]) * (e - e0) / (e1 - e0))


def metric_derivative(times, states) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference metric speed |mu'|(t_k) at interior samples."""
    times = np.asarray(times, dtype=float)
    if times.size < 2:
        raise InputError("need at least two samples")
    if times.size == 2:
        return times[:0], times[:0]
    speed = np.array([d2_atomic_atomic(states[k - 1], states[k + 1]) / (times[k + 1] - times[k - 1])
                      for k in range(1, times.size - 1)])
    return times[1:-1], speed
