"""Continuous densities interpolating the particle pressures, and Fisher information."""
from __future__ import annotations

import math

import numpy as np

from ..core import Heat, InternalEnergy
from ..discrete import ParticleState, PiecewiseDensity, geometry
from ..errors import DomainError
from ..quadrature import quad


def _pieces(state: ParticleState):
    g = geometry(state)
    x = state.positions
    d = g.gaps[1:-1]       # gap to the right of particle j (j = 0..N-2)
    dl = g.gaps[:-2]       # gap to the left of particle j, possibly infinite
    return x, d, dl


def heat_normaliser(state: ParticleState) -> float:
    _, d, dl = _pieces(state)
    ratio = d / dl
    return float(np.sum(1 + np.sqrt(ratio) + ratio) / (3 * state.n))


def interpolant_heat(state: ParticleState) -> PiecewiseDensity:
    """Piecewise quadratic interpolant whose square root is linear in 1/sqrt(dx).

    On [x_j, x_{j+1}] with right gap D and left gap D_l::

        rho(x) = ((x - x_j)/sqrt(D) + (x_{j+1} - x)/sqrt(D_l))^2 / (m N D^2)
    """
    x, d, dl = _pieces(state)
    n = state.n
    m = heat_normaliser(state)
    a, b = 1.0 / np.sqrt(d), 1.0 / np.sqrt(dl)
    alpha = 1.0 / (m * n * d * d)
    funcs, derivs = [], []
    for j in range(n - 1):
        x0, x1, aj, bj, cj = x[j], x[j + 1], a[j], b[j], alpha[j]
        funcs.append(lambda s, x0=x0, x1=x1, aj=aj, bj=bj, cj=cj: cj * (aj * (s - x0) + bj * (x1 - s)) ** 2)
        derivs.append(lambda s, x0=x0, x1=x1, aj=aj, bj=bj, cj=cj:
                      2 * cj * (aj - bj) * (aj * (s - x0) + bj * (x1 - s)))
    dens = PiecewiseDensity(x[:-1], x[1:], funcs=funcs, derivs=derivs)
    dens.normaliser = m
    return dens


def interpolant_general(state: ParticleState, energy: InternalEnergy) -> PiecewiseDensity:
    """rho(x) = 1 / (m psi^{-1}(p_j(x))), p_j linear between psi(N D_l) and psi(N D)."""
    x, d, dl = _pieces(state)
    n = state.n
    p_left = np.zeros_like(dl)
    fin = np.isfinite(dl)
    p_left[fin] = energy.psi(n * dl[fin])
    p_right = energy.psi(n * d)

    def inv_width(p):
        # 1 / psi^{-1}(p), with psi^{-1}(0) = inf
        p = np.asarray(p, dtype=float)
        out = np.zeros_like(p)
        pos = p > 0
        if pos.any():
            out[pos] = 1.0 / energy.psi_inverse(p[pos])
        return out

    raw, raw_d = [], []
    for j in range(n - 1):
        x0, x1, q0, q1 = x[j], x[j + 1], p_left[j], p_right[j]
        slope = (q1 - q0) / (x1 - x0)

        def f(s, x0=x0, q0=q0, slope=slope):
            return inv_width(q0 + slope * (np.asarray(s, dtype=float) - x0))

        def df(s, x0=x0, q0=q0, slope=slope):
            p = q0 + slope * (np.asarray(s, dtype=float) - x0)
            X = 1.0 / np.maximum(inv_width(p), 1e-300)
            with np.errstate(all="ignore"):
                val = -slope / (energy.dpsi(X) * X * X)
            return np.where(p > 0, val, 0.0)

        raw.append(f)
        raw_d.append(df)
    masses = [quad(lambda s, f=f: float(f(s)), x[j], x[j + 1]) for j, f in enumerate(raw)]
    m = float(np.sum(masses))
    funcs = [lambda s, f=f: f(s) / m for f in raw]
    derivs = [lambda s, f=f: f(s) / m for f in raw_d]
    dens = PiecewiseDensity(x[:-1], x[1:], funcs=funcs, derivs=derivs)
    dens.normaliser = m
    dens._piece_mass = np.asarray(masses) / m
    return dens


def fisher(density, energy: InternalEnergy, epsabs: float = 1e-9) -> float:
    """Generalised Fisher information: integral of rho'^2 H''(rho)^2 rho.

    Constant pieces contribute nothing; a jump between touching pieces makes
    the information infinite, and a hole inside the support is rejected.
    """
    if hasattr(density, "as_density"):
        density = density.as_density()
    left, right = density.left, density.right
    if np.any(left[1:] > right[:-1] * (1 + 1e-14) + 1e-300 + 1e-14 * np.abs(right[:-1])):
        raise DomainError("density vanishes inside its support")
    ends_l = np.array([float(density.piece(k)(np.asarray(left[k]))) for k in range(density.n_pieces)])
    ends_r = np.array([float(density.piece(k)(np.asarray(right[k]))) for k in range(density.n_pieces)])
    if np.any(np.abs(ends_l[1:] - ends_r[:-1]) > 1e-9 * (np.abs(ends_l[1:]) + np.abs(ends_r[:-1]))):
        return math.inf
    if density.constant:
        return 0.0
    heat = isinstance(energy, Heat)
    total = 0.0
    for k in range(density.n_pieces):
        f, df = density.funcs[k], density.derivs[k]
        probe = np.asarray(f(np.linspace(left[k], right[k], 9)[1:-1]))
        if np.any(probe <= 0):
            raise DomainError("density touches zero inside its support")

        def integrand(s, f=f, df=df):
            rho = float(f(np.asarray(s)))
            if rho <= 0:
                return 0.0
            dr = float(df(np.asarray(s)))
            if heat:
                return dr * dr / rho
            return dr * dr * float(energy.d2H(rho)) ** 2 * rho

        total += quad(integrand, left[k], right[k], epsabs=epsabs / density.n_pieces)
    return total


def continuum_slope(density, energy: InternalEnergy) -> float:
    return math.sqrt(fisher(density, energy))


def heat_interpolant_fisher(state: ParticleState) -> float:
    """Closed form of the Fisher information of :func:`interpolant_heat`."""
    _, d, dl = _pieces(state)
    m = heat_normaliser(state)
    terms = (1 / d - 1 / dl) ** 2 / (1 + np.sqrt(d / dl)) ** 2
    return float(4.0 / (m * state.n) * np.sum(terms))


def slope_epsilon(state: ParticleState) -> float:
    """Smallest eps with m_N (1 + sqrt(dx_{j+1}/dx_j))^2 >= 4 - eps on every piece."""
    _, d, dl = _pieces(state)
    m = heat_normaliser(state)
    return float(4.0 - np.min(m * (1 + np.sqrt(d / dl)) ** 2))
