"""Minimal-norm element of the weighted subdifferential of the discrete energy.

Every ball i picks the smaller of its two gaps; when they tie, the ball may
use any convex combination, weighted by ``lam_i`` on the right gap.  Writing
``c_k`` for the total weight carried by gap k, the subgradients are::

    z = -sum_k c_k psi_k grad(dx_k),      c_k = (1 - lam_k) + lam_{k-1}

with ``psi_k = N psi(N dx_k)``.  One lam per tied ball is shared by all the
particles it touches.  The minimal-norm element solves a small box
constrained least-squares problem in the tied weights.

The coordinate-wise lookup table (``CASE_TABLE``) is kept for comparison; it
coincides with the minimal-norm element whenever no gaps tie.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import lsq_linear

from .core import InternalEnergy
from .discrete import Geometry, ParticleState, geometry
from .errors import UnsupportedConfigurationError

TIE_TOL = 1e-9

# (A_{i-1}, A_i, A_{i+1}) -> (c_next, c_self) with z_i = c_next psi_{i+1} - c_self psi_i
CASE_TABLE: dict[tuple[str, str, str], tuple[int, int]] = {
    ("R", "R", "L"): (2, 1),
    ("E", "R", "L"): (2, 1),
    ("L", "R", "R"): (1, 0),
    ("L", "R", "E"): (1, 0),
    ("L", "R", "L"): (2, 0),
    ("R", "L", "R"): (0, 2),
    ("R", "L", "E"): (1, 2),
    ("R", "L", "L"): (1, 2),
    ("E", "L", "R"): (0, 1),
    ("L", "L", "R"): (0, 1),
    ("R", "R", "R"): (1, 1),
    ("R", "R", "E"): (1, 1),
    ("E", "R", "R"): (1, 1),
    ("E", "R", "E"): (1, 1),
    ("E", "L", "E"): (1, 1),
    ("E", "L", "L"): (1, 1),
    ("L", "L", "E"): (1, 1),
    ("L", "L", "L"): (1, 1),
}


@dataclass(frozen=True, eq=False)
class Subgradient:
    z: np.ndarray
    lam: np.ndarray
    labels: np.ndarray

    @property
    def norm_w(self) -> float:
        return float(np.sqrt(np.mean(self.z**2)))


def classify(state: ParticleState, tie_tol: float = TIE_TOL, geo: Geometry | None = None) -> np.ndarray:
    """Labels A_0..A_{N+1}: 'R' if the right gap of a ball is smaller, 'L' if the left one, 'E' on ties."""
    g = geo if geo is not None else geometry(state)
    return _labels(g.gaps, tie_tol)


def _labels(gaps: np.ndarray, tie_tol: float) -> np.ndarray:
    left, right = gaps[:-1], gaps[1:]
    n = left.size
    lab = np.full(n, "E")
    finite = np.isfinite(left) & np.isfinite(right)
    with np.errstate(invalid="ignore"):
        ratio = np.where(finite, right / np.where(finite, left, 1.0), 1.0)
    lab[finite & (ratio < 1 - tie_tol)] = "R"
    lab[finite & (ratio > 1 + tie_tol)] = "L"
    # a tie within tolerance that is not an exact tie is still E; resolve the band edges
    lab[finite & (np.abs(ratio - 1) <= tie_tol)] = "E"
    lab[~np.isfinite(left) & np.isfinite(right)] = "R"
    lab[np.isfinite(left) & ~np.isfinite(right)] = "L"
    return np.concatenate((["L"], lab, ["R"]))


def psi_values(state: ParticleState, energy: InternalEnergy, geo: Geometry | None = None) -> np.ndarray:
    """psi_k = N psi(N dx_k) for k = 1..N+1, zero on infinite gaps."""
    g = geo if geo is not None else geometry(state)
    n = state.n
    out = np.zeros(g.gaps.size)
    fin = np.isfinite(g.gaps)
    if not fin.all() and energy.psi_at_infinity != 0:
        raise UnsupportedConfigurationError("energies with psi(inf) != 0 need finite gaps everywhere")
    out[fin] = n * energy.psi(n * g.gaps[fin])
    return out


def gap_gradients(n: int, mirror_left: bool, mirror_right: bool) -> np.ndarray:
    """Matrix G with G[k] = gradient of dx_{k+1} with respect to the positions."""
    G = np.zeros((n + 1, n))
    k = np.arange(1, n)
    G[k, k] = 1.0
    G[k, k - 1] = -1.0
    if mirror_left:
        G[0, 0] = G[0, 1] = 1.0
    if mirror_right:
        G[n, n - 2] = G[n, n - 1] = -1.0
    return G


def assemble(w: np.ndarray, mirror_left: bool, mirror_right: bool) -> np.ndarray:
    """Return -sum_k w_k grad(dx_k); ``w`` may carry extra trailing columns."""
    n = w.shape[0] - 1
    z = np.zeros((n,) + w.shape[1:])
    inner = w[1:n]
    z[1:] -= inner
    z[:-1] += inner
    if mirror_left:
        z[0] -= w[0]
        z[1] -= w[0]
    if mirror_right:
        z[n - 2] += w[n]
        z[n - 1] += w[n]
    return z


def gap_weights(lam: np.ndarray) -> np.ndarray:
    """c_k = (1 - lam_k) [k <= N] + lam_{k-1} [k >= 2]."""
    c = np.zeros(lam.size + 1)
    c[:-1] += 1.0 - lam
    c[1:] += lam
    return c


def base_weights(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ball weights implied by strict labels, and the indices of tied balls."""
    mid = labels[1:-1]
    lam = np.where(mid == "R", 1.0, 0.0)
    tied = np.flatnonzero(mid == "E")
    return lam, tied


def _tie_columns(psi: np.ndarray, tied: np.ndarray, mirror_left: bool, mirror_right: bool) -> np.ndarray:
    """d z / d lam_b for every tied ball b (one column each)."""
    W = np.zeros((psi.size, tied.size))
    cols = np.arange(tied.size)
    W[tied, cols] = -psi[tied]
    W[tied + 1, cols] = psi[tied + 1]
    return assemble(W, mirror_left, mirror_right)


def _box_lsq(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """argmin |A lam - b| over 0 <= lam <= 1."""
    lam, *_ = np.linalg.lstsq(A, b, rcond=None)
    if np.all(lam >= -1e-13) and np.all(lam <= 1 + 1e-13):
        return np.clip(lam, 0.0, 1.0)
    res = lsq_linear(A, b, bounds=(0.0, 1.0), method="bvls", tol=1e-15, lsmr_tol=None)
    return np.clip(res.x, 0.0, 1.0)


def _components(tied: np.ndarray) -> list[np.ndarray]:
    """Group tied balls whose columns can share a particle (indices closer than 3)."""
    if tied.size == 0:
        return []
    cuts = np.flatnonzero(np.diff(tied) >= 3) + 1
    return np.split(np.arange(tied.size), cuts)


def closest_subgradient(state: ParticleState, energy: InternalEnergy, target: np.ndarray | None = None,
                        tie_tol: float = TIE_TOL, geo: Geometry | None = None) -> Subgradient:
    """Element z of the subdifferential minimising |target + z| on the free particles.

    With ``target = None`` this is the minimal-norm element.  Particles pinned
    to an interval wall do not move, so their components are reported as 0.
    """
    g = geo if geo is not None else geometry(state)
    n = state.n
    psi = psi_values(state, energy, g)
    labels = _labels(g.gaps, tie_tol)
    lam, tied = base_weights(labels)
    z0 = assemble(gap_weights(lam) * psi, g.mirror_left, g.mirror_right)
    free = ~state.pinned_mask()
    t = np.zeros(n) if target is None else np.asarray(target, dtype=float)
    if tied.size:
        B = _tie_columns(psi, tied, g.mirror_left, g.mirror_right)
        resid = t + z0
        for comp in _components(tied):
            Bc = B[:, comp]
            rows = np.flatnonzero(free & np.any(Bc != 0, axis=1))
            if rows.size == 0:
                continue
            A = Bc[rows]
            keep = np.any(A != 0, axis=0)
            if not keep.any():
                continue
            sol = _box_lsq(A[:, keep], -resid[rows])
            lam[tied[comp[keep]]] = sol
        z = assemble(gap_weights(lam) * psi, g.mirror_left, g.mirror_right)
    else:
        z = z0
    z = np.where(free, z, 0.0)
    # cancellation noise: a component far below the pressures acting on it is zero
    scale = psi[:-1] + psi[1:]
    if g.mirror_left:
        scale[1] += psi[0]
    if g.mirror_right:
        scale[n - 2] += psi[n]
    z = np.where(np.abs(z) <= 1e-12 * scale, 0.0, z)
    return Subgradient(z, lam, labels)


def minimal_norm(state: ParticleState, energy: InternalEnergy, tie_tol: float = TIE_TOL,
                 geo: Geometry | None = None) -> Subgradient:
    return closest_subgradient(state, energy, None, tie_tol, geo)


def local_slope(state: ParticleState, energy: InternalEnergy, tie_tol: float = TIE_TOL) -> float:
    """g_N = |z|_w for the minimal-norm element."""
    return minimal_norm(state, energy, tie_tol).norm_w


def table_subgradient(state: ParticleState, energy: InternalEnergy, tie_tol: float = TIE_TOL,
                      table: dict | None = None) -> np.ndarray:
    """Coordinate-wise lookup of (A_{i-1}, A_i, A_{i+1}) in the case table.

    Middle label E gives 0.  Exact when no gaps tie; near ties it can leave
    the subdifferential, which is why the flow uses :func:`minimal_norm`.
    """
    table = CASE_TABLE if table is None else table
    g = geometry(state)
    psi = psi_values(state, energy, g)
    labels = _labels(g.gaps, tie_tol)
    n = state.n
    z = np.zeros(n)
    for i in range(n):
        key = (labels[i], labels[i + 1], labels[i + 2])
        if key[1] == "E":
            continue
        c_next, c_self = table[key]
        z[i] = c_next * psi[i + 1] - c_self * psi[i]
    return np.where(state.pinned_mask(), 0.0, z)
