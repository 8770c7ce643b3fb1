"""Brute-force checks for the subgradient and transport kernels.

These are deliberately slow and independent of the production code paths:
finite differences of the energy, enumeration of tie weights, the convexity
inequality and exhaustive couplings.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .core import Heat, InternalEnergy, Interval, PowerLaw, WholeLine
from .discrete import ParticleState, discrete_energy, geometry
from .subgradient import (CASE_TABLE, TIE_TOL, _labels, assemble, gap_weights, minimal_norm, psi_values,
                          table_subgradient)
from .transport import d2_atomic_atomic


def fd_gradient(state: ParticleState, energy: InternalEnergy, rel_step: float = 1e-6) -> np.ndarray:
    """N times the central-difference gradient of E_N; pinned particles get 0."""
    x = state.positions
    h = rel_step * float(np.min(np.diff(x)))
    grad = np.zeros(state.n)
    for i in np.flatnonzero(~state.pinned_mask()):
        up, down = x.copy(), x.copy()
        up[i] += h
        down[i] -= h
        e_up = discrete_energy(ParticleState(up, state.domain), energy)
        e_down = discrete_energy(ParticleState(down, state.domain), energy)
        grad[i] = (e_up - e_down) / (2 * h)
    return state.n * grad


def _extended_energy(y: np.ndarray, state: ParticleState, energy: InternalEnergy) -> float:
    """E_N with the wall reflections of ``state`` kept fixed, defined off the wall too."""
    geo = geometry(state)
    n = state.n
    gaps = np.empty(n + 1)
    gaps[1:-1] = np.diff(y)
    ell = getattr(state.domain, "halfwidth", math.inf)
    gaps[0] = y[0] + 2 * ell + y[1] if geo.mirror_left else math.inf
    gaps[-1] = 2 * ell - y[-1] - y[-2] if geo.mirror_right else math.inf
    if np.any(gaps <= 0):
        return math.inf
    r = np.minimum(gaps[:-1], gaps[1:])
    return float(np.mean(energy.h(n * r)))


def candidate_subgradients(state: ParticleState, energy: InternalEnergy, tie_tol: float = TIE_TOL,
                           grid=(0.0, 0.25, 0.5, 0.75, 1.0)):
    """Yield (lam, z) over the product grid of tie weights, one weight per tied ball."""
    geo = geometry(state)
    psi = psi_values(state, energy, geo)
    mid = _labels(geo.gaps, tie_tol)[1:-1]
    base = np.where(mid == "R", 1.0, 0.0)
    tied = np.flatnonzero(mid == "E")
    free = ~state.pinned_mask()
    for combo in itertools.product(grid, repeat=tied.size):
        lam = base.copy()
        lam[tied] = combo
        z = assemble(gap_weights(lam) * psi, geo.mirror_left, geo.mirror_right)
        yield lam, np.where(free, z, 0.0)


def enumerate_minimum(state: ParticleState, energy: InternalEnergy, tie_tol: float = TIE_TOL,
                      sweeps: int = 60) -> tuple[float, float]:
    """(best grid norm, refined norm) of the candidate subgradients.

    The refinement runs bounded scalar minimisation along each tied weight in
    turn, starting from the best grid vertex.
    """
    geo = geometry(state)
    psi = psi_values(state, energy, geo)
    mid = _labels(geo.gaps, tie_tol)[1:-1]
    tied = np.flatnonzero(mid == "E")
    free = ~state.pinned_mask()

    def norm(lam):
        z = assemble(gap_weights(lam) * psi, geo.mirror_left, geo.mirror_right)
        return math.sqrt(np.mean(np.where(free, z, 0.0) ** 2))

    best_lam, best = None, math.inf
    for lam, z in candidate_subgradients(state, energy, tie_tol):
        val = math.sqrt(np.mean(z**2))
        if val < best:
            best_lam, best = lam, val
    lam, refined = best_lam.copy(), best
    for _ in range(sweeps):
        before = refined
        for b in tied:
            def along(t, b=b):
                trial = lam.copy()
                trial[b] = t
                return norm(trial)

            res = minimize_scalar(along, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-13})
            if res.fun < refined:
                lam[b], refined = res.x, res.fun
        if before - refined <= 1e-16 * (1 + refined):
            break
    return best, refined


def membership_violation(state: ParticleState, energy: InternalEnergy, z: np.ndarray, rng: np.random.Generator,
                         directions: int = 64, eps: float = 1e-7) -> float:
    """Largest E(x) + <z, eps v>/N - E(x + eps v) over random directions (should be <= slack)."""
    x = state.positions
    e0 = _extended_energy(x, state, energy)
    free = ~state.pinned_mask()
    scale = float(np.min(np.diff(x)))
    worst = -math.inf
    for _ in range(directions):
        v = np.where(free, rng.standard_normal(state.n), 0.0) * scale
        e1 = _extended_energy(x + eps * v, state, energy)
        worst = max(worst, e0 + eps * float(np.dot(z, v)) / state.n - e1)
    return worst


def d2_permutation(a: ParticleState, b: ParticleState) -> float:
    """Exhaustive optimal coupling over all N! assignments."""
    x, y = a.positions, b.positions
    best = min(np.sum((x - y[list(p)]) ** 2) for p in itertools.permutations(range(a.n)))
    return math.sqrt(best / a.n)


# -- random states ---------------------------------------------------------

def random_state(rng: np.random.Generator, n: int, domain=None) -> ParticleState:
    """Gaps drawn log-uniformly; consecutive gaps are kept at least 1 % apart."""
    while True:
        gaps = np.exp(rng.uniform(-1.5, 1.5, n - 1))
        if n < 3 or np.min(np.abs(gaps[1:] / gaps[:-1] - 1)) > 1e-2:
            break
    x = np.concatenate(([0.0], np.cumsum(gaps)))
    x = x - x.mean() + rng.uniform(-0.5, 0.5)
    return ParticleState(x, domain or WholeLine())


def tied_state(rng: np.random.Generator, n: int) -> ParticleState:
    """Gaps from a two-value alphabet so that many consecutive gaps tie exactly."""
    vals = rng.choice([1.0, 2.0, 0.5], size=2, replace=False)
    gaps = rng.choice(vals, size=n - 1)
    if rng.random() < 0.5:
        x = np.concatenate(([0.0], np.cumsum(gaps)))
        return ParticleState(x - x[-1] / 2, WholeLine())
    # pinned ends on an interval, mirrored gaps equal to their inner neighbours half the time
    x = np.concatenate(([0.0], np.cumsum(gaps)))
    ell = x[-1] / 2
    return ParticleState(x - ell, Interval(ell))


# -- suite -----------------------------------------------------------------

@dataclass
class OracleResult:
    name: str
    passed: bool
    worst: float
    detail: str = ""

    def __post_init__(self):
        self.passed, self.worst = bool(self.passed), float(self.worst)


@dataclass
class OracleReport:
    seed: int
    results: list[OracleResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)


def corrupt_table() -> dict:
    """A case table with one row altered, for negative controls."""
    table = dict(CASE_TABLE)
    table[("L", "L", "L")] = (1, 2)
    return table


def run_suite(seed: int = 0, n_gradient: int = 200, n_ties: int = 50, n_transport: int = 100,
              table: dict | None = None, max_n: int = 8) -> OracleReport:
    rng = np.random.default_rng(seed)
    energies = [Heat(), PowerLaw(2.0)]
    report = OracleReport(seed)

    worst_table = worst_min = 0.0
    for k in range(n_gradient):
        energy = energies[k % 2]
        s = random_state(rng, int(rng.integers(2, max_n + 1)))
        ref = fd_gradient(s, energy)
        scale = np.max(np.abs(ref))
        worst_table = max(worst_table, np.max(np.abs(table_subgradient(s, energy, table=table) - ref)) / scale)
        worst_min = max(worst_min, np.max(np.abs(minimal_norm(s, energy).z - ref)) / scale)
    report.results.append(OracleResult("table_vs_fd_gradient", worst_table <= 1e-5, worst_table))
    report.results.append(OracleResult("minimal_norm_vs_fd_gradient", worst_min <= 1e-5, worst_min))

    worst_gap = worst_member = -math.inf
    for k in range(n_ties):
        energy = energies[k % 2]
        s = tied_state(rng, int(rng.integers(3, max_n + 1)))
        sub = minimal_norm(s, energy)
        grid_best, refined = enumerate_minimum(s, energy)
        worst_gap = max(worst_gap, (sub.norm_w - min(grid_best, refined)) / (1 + refined))
        worst_member = max(worst_member, membership_violation(s, energy, sub.z, rng))
    report.results.append(OracleResult("minimal_norm_below_candidates", worst_gap <= 1e-12, worst_gap))
    report.results.append(OracleResult("minimal_norm_membership", worst_member <= 1e-10, worst_member))

    worst_d2 = 0.0
    for _ in range(n_transport):
        n = int(rng.integers(2, 7))
        a = ParticleState(np.sort(rng.normal(size=n)) + np.arange(n) * 1e-9)
        b = ParticleState(np.sort(rng.normal(size=n)) + np.arange(n) * 1e-9)
        worst_d2 = max(worst_d2, abs(d2_atomic_atomic(a, b) - d2_permutation(a, b)))
    report.results.append(OracleResult("sorted_coupling_vs_permutations", worst_d2 <= 1e-12, worst_d2))
    return report
