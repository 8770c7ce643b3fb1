"""Time integration of x' = -z(x), z the minimal-norm subgradient.

Two steppers are provided.

explicit
    Forward Euler on the minimal-norm selection.  The step is limited by the
    ordering bound ``safety * min dx / max |z|``, by the stiffness of the gap
    pressures, and it is shortened to land exactly on the next label change
    (two neighbouring gaps becoming equal) so that the velocity field is
    frozen only where it is smooth.  Steps are also clipped so that no gap
    overshoots the current minimum (or, on an interval, maximum) gap, and
    an end particle reaching the wall is pinned there.

proximal
    Implicit minimizing movement: y minimises |y - x|_w^2 / (2 tau) + E_N(y).
    Solved by a primal-dual active-set Newton method on the optimality
    system, in which tied balls contribute their convex weight as an unknown.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import InternalEnergy, Interval
from .discrete import ParticleState, discrete_energy, gap_total, geometry, second_moment, uniform_ratio
from .errors import ConvergenceError, InputError, NumericalError, StepRejected, UnsupportedConfigurationError
from .subgradient import (TIE_TOL, Subgradient, assemble, closest_subgradient, gap_gradients, gap_weights,
                          local_slope, minimal_norm)

EPS_DIV = 1e-300


@dataclass(frozen=True)
class StepperConfig:
    t_end: float
    scheme: str = "explicit"
    dt_init: float = 1e-3
    safety: float = 0.2
    record_every: float | None = None
    prox_tol: float = 1e-10
    tie_tol: float = TIE_TOL
    max_steps: int = 5_000_000

    def __post_init__(self):
        if self.scheme not in ("explicit", "proximal"):
            raise InputError(f"unknown scheme {self.scheme!r}")
        if not (0 < self.safety < 1):
            raise InputError("safety factor must lie in (0, 1)")
        for name in ("t_end", "dt_init", "prox_tol"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InputError(f"{name} must be positive")
        if self.record_every is not None and not self.record_every > 0:
            raise InputError("record_every must be positive")
        if self.tie_tol < 0:
            raise InputError("tie_tol must be non-negative")


COLUMNS = ("t", "E_N", "g_N", "min_dx", "max_dx", "total_gap", "uniform_ratio", "M2")


@dataclass(eq=False)
class Trajectory:
    """Recorded samples of a run: times, positions and diagnostics."""

    domain: object
    times: np.ndarray
    positions: np.ndarray
    diagnostics: dict[str, np.ndarray]
    steps: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.positions.shape[1]

    def __len__(self):
        return self.times.size

    def state(self, k: int) -> ParticleState:
        return ParticleState(self.positions[k], self.domain)

    def states(self) -> list[ParticleState]:
        return [self.state(k) for k in range(len(self))]

    @property
    def final(self) -> ParticleState:
        return self.state(-1)

    def __getitem__(self, name: str) -> np.ndarray:
        if name == "t":
            return self.times
        return self.diagnostics[name]

    def dissipation(self) -> np.ndarray:
        """Running integral of g_N^2 at the samples.

        Uses the per-step sum accumulated by the integrator when present, and
        the trapezoid rule over the recorded samples otherwise.
        """
        if "dissipated_at" in self.meta:
            return np.asarray(self.meta["dissipated_at"], dtype=float)
        g2 = self.diagnostics["g_N"] ** 2
        inc = 0.5 * (g2[1:] + g2[:-1]) * np.diff(self.times)
        return np.concatenate(([0.0], np.cumsum(inc)))

    def sample_index(self, t: float, tol: float = 1e-9) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > tol * max(1.0, abs(t)):
            raise InputError(f"time {t} is not a recorded sample")
        return k


def diagnostics(state: ParticleState, energy: InternalEnergy, sub: Subgradient | None = None,
                tie_tol: float = TIE_TOL) -> dict[str, float]:
    geo = geometry(state)
    if sub is None:
        sub = minimal_norm(state, energy, tie_tol, geo)
    inner = geo.interior_gaps
    return {
        "E_N": float(np.mean(energy.h(state.n * geo.radii))),
        "g_N": sub.norm_w,
        "min_dx": float(inner.min()),
        "max_dx": float(inner.max()),
        "total_gap": gap_total(state),
        "uniform_ratio": uniform_ratio(state),
        "M2": second_moment(state),
    }


def explicit_bound(state: ParticleState, z: np.ndarray, safety: float = 0.2) -> float:
    """Largest step allowed by the ordering bound."""
    inner = geometry(state).interior_gaps
    return safety * float(inner.min()) / (float(np.max(np.abs(z))) + EPS_DIV)


def step_explicit(state: ParticleState, energy: InternalEnergy, dt: float, tie_tol: float = TIE_TOL,
                  safety: float = 0.2, sub: Subgradient | None = None) -> ParticleState:
    """One forward Euler step x - dt z; pinned particles stay put."""
    if sub is None:
        sub = minimal_norm(state, energy, tie_tol)
    bound = explicit_bound(state, sub.z, safety)
    if not (0 < dt <= bound * (1 + 1e-12)):
        raise StepRejected(f"dt = {dt:.3g} exceeds the ordering bound {bound:.3g}")
    return _advance(state, sub.z, dt)


def _advance(state: ParticleState, z: np.ndarray, dt: float) -> ParticleState:
    x = state.positions - dt * z
    x[state.pinned_mask()] = state.positions[state.pinned_mask()]
    try:
        return state.moved(x)
    except InputError as exc:
        raise StepRejected(f"step of size {dt:.3g} broke the particle ordering: {exc}") from None


def _gap_rates(v: np.ndarray, geo) -> np.ndarray:
    """Time derivative of every gap under the velocity v."""
    n = v.size
    rate = np.zeros(n + 1)
    rate[1:n] = np.diff(v)
    if geo.mirror_left:
        rate[0] = v[0] + v[1]
    if geo.mirror_right:
        rate[n] = -(v[n - 2] + v[n - 1])
    return rate


def _first_hit(dist: np.ndarray, speed: np.ndarray) -> float:
    """Smallest positive dist/speed over entries with speed > 0."""
    ok = (speed > 0) & np.isfinite(dist)
    if not ok.any():
        return math.inf
    return float(np.min(dist[ok] / speed[ok]))


def _explicit_dt(state, energy, geo, sub, cfg: StepperConfig) -> tuple[float, bool, bool]:
    """Step size for the current state plus flags for wall contact on either end."""
    n = state.n
    v = -sub.z
    gaps = geo.gaps
    fin = np.isfinite(gaps)
    dt = min(cfg.dt_init, explicit_bound(state, sub.z, cfg.safety))
    if not np.any(v):
        return dt, False, False
    # stiffness of the pressure term
    kappa = n * n * np.abs(energy.dpsi(n * gaps[fin]))
    dt = min(dt, cfg.safety / (float(kappa.max()) + EPS_DIV))
    rate = _gap_rates(v, geo)
    # label changes: the two gaps of a strictly labelled ball become equal
    left, right = gaps[:-1], gaps[1:]
    both = np.isfinite(left) & np.isfinite(right) & (sub.labels[1:-1] != "E")
    d = np.where(both, left - right, 0.0)
    dd = np.where(both, rate[:-1] - rate[1:], 0.0)
    dt = min(dt, _first_hit(np.abs(d), np.where(d * dd < 0, np.abs(dd), 0.0)))
    # no gap may overshoot the current extremes
    inner = slice(1, n)
    gi, ri = gaps[inner], rate[inner]
    m0 = gi.min()
    above = gi - m0 > 1e-12 * m0
    dt = min(dt, _first_hit(np.where(above, gi - m0, np.inf), np.where(above, -ri, 0.0)))
    hit_left = hit_right = False
    if isinstance(state.domain, Interval):
        m1 = gi.max()
        below = m1 - gi > 1e-12 * m1
        dt = min(dt, _first_hit(np.where(below, m1 - gi, np.inf), np.where(below, ri, 0.0)))
        ell = state.domain.halfwidth
        x = state.positions
        pin_l, pin_r = state.pinned
        t_left = (x[0] + ell) / -v[0] if (not pin_l and v[0] < 0) else math.inf
        t_right = (ell - x[-1]) / v[-1] if (not pin_r and v[-1] > 0) else math.inf
        if t_left <= dt:
            dt, hit_left = t_left, True
        if t_right <= dt:
            hit_left = hit_left and t_left <= t_right
            dt, hit_right = t_right, True
    return dt, hit_left, hit_right


class _Recorder:
    def __init__(self, state0: ParticleState):
        self.domain = state0.domain
        self.times: list[float] = []
        self.positions: list[np.ndarray] = []
        self.rows: dict[str, list[float]] = {c: [] for c in COLUMNS[1:]}

    def add(self, t: float, state: ParticleState, diag: dict):
        self.times.append(t)
        self.positions.append(np.array(state.positions))
        for k in self.rows:
            self.rows[k].append(diag[k])

    def build(self, steps: int, meta: dict) -> Trajectory:
        return Trajectory(self.domain, np.asarray(self.times), np.vstack(self.positions),
                          {k: np.asarray(v) for k, v in self.rows.items()}, steps, meta)


def _record_times(cfg: StepperConfig) -> np.ndarray | None:
    if cfg.record_every is None:
        return None
    k = max(1, int(round(cfg.t_end / cfg.record_every)))
    grid = np.arange(1, k + 1) * cfg.record_every
    grid = grid[grid < cfg.t_end * (1 - 1e-12)]
    return np.concatenate((grid, [cfg.t_end]))


def simulate(state0: ParticleState, energy: InternalEnergy, cfg: StepperConfig) -> Trajectory:
    """Integrate the particle flow on [0, t_end], recording diagnostics."""
    if cfg.scheme == "proximal":
        return _simulate_proximal(state0, energy, cfg)
    rec = _Recorder(state0)
    marks = _record_times(cfg)
    mark = 0
    state, t, steps = state0, 0.0, 0
    due = True
    dissipated = 0.0
    cumulative = []
    while True:
        geo = geometry(state)
        sub = minimal_norm(state, energy, cfg.tie_tol, geo)
        if due:
            rec.add(t, state, diagnostics(state, energy, sub, cfg.tie_tol))
            cumulative.append(dissipated)
        if t >= cfg.t_end:
            break
        if steps >= cfg.max_steps:
            raise NumericalError(f"step budget of {cfg.max_steps} exhausted at t = {t:.6g}")
        dt, hit_l, hit_r = _explicit_dt(state, energy, geo, sub, cfg)
        t_stop = cfg.t_end if marks is None else marks[mark]
        if t + dt >= t_stop * (1 - 1e-13):
            dt = t_stop - t
            hit_l = hit_r = False
        if not dt > 0:
            raise NumericalError(f"step size collapsed at t = {t:.6g}")
        new = _advance(state, sub.z, dt)
        if hit_l or hit_r:
            x = np.array(new.positions)
            ell = state.domain.halfwidth
            if hit_l:
                x[0] = -ell
            if hit_r:
                x[-1] = ell
            new = state.moved(x)
        dissipated += dt * sub.norm_w**2
        state = new
        steps += 1
        t = t_stop if dt == t_stop - t else t + dt
        due = marks is None or t >= t_stop
        if marks is not None and t >= t_stop:
            mark += 1
    return rec.build(steps, {"scheme": "explicit", "dissipated": dissipated, "dissipated_at": cumulative})


def _simulate_proximal(state0: ParticleState, energy: InternalEnergy, cfg: StepperConfig) -> Trajectory:
    rec = _Recorder(state0)
    marks = _record_times(cfg)
    mark = 0
    state, t, steps = state0, 0.0, 0
    rec.add(t, state, diagnostics(state, energy, None, cfg.tie_tol))
    dissipated, cumulative = 0.0, [0.0]
    while t < cfg.t_end:
        t_stop = cfg.t_end if marks is None else marks[mark]
        tau = cfg.dt_init
        if t + tau >= t_stop * (1 - 1e-13):
            tau = t_stop - t
        state = step_proximal(state, energy, tau, cfg.prox_tol, cfg.tie_tol)
        dissipated += tau * local_slope(state, energy, cfg.tie_tol) ** 2
        steps += 1
        t = t_stop if tau == t_stop - t else t + tau
        if marks is None or t >= t_stop:
            rec.add(t, state, diagnostics(state, energy, None, cfg.tie_tol))
            cumulative.append(dissipated)
            if marks is not None:
                mark += 1
    return rec.build(steps, {"scheme": "proximal", "dissipated": dissipated, "dissipated_at": cumulative})


def step_proximal(state: ParticleState, energy: InternalEnergy, tau: float, prox_tol: float = 1e-10,
                  tie_tol: float = TIE_TOL, max_outer: int = 100, max_newton: int = 60) -> ParticleState:
    """Minimiser of |y - x|_w^2 / (2 tau) + E_N(y) over ordered configurations."""
    if not tau > 0:
        raise InputError("tau must be positive")
    x = state.positions
    n = state.n
    geo = geometry(state)
    if isinstance(state.domain, Interval) and not (geo.mirror_left and geo.mirror_right):
        raise UnsupportedConfigurationError("the proximal stepper on an interval needs both end particles on the walls")
    ml, mr = geo.mirror_left, geo.mirror_right
    G = gap_gradients(n, ml, mr)
    offset = np.zeros(n + 1)
    offset[0] = 2 * state.domain.halfwidth if ml else np.inf
    offset[n] = 2 * state.domain.halfwidth if mr else np.inf
    fin = np.isfinite(offset)
    free = ~state.pinned_mask()
    fi = np.flatnonzero(free)

    # ball status: 0 uses its left gap, 1 its right gap, 2 tied with weight lam
    sub0 = minimal_norm(state, energy, tie_tol, geo)
    mid = sub0.labels[1:-1]
    status = np.where(mid == "R", 1, np.where(mid == "L", 0, 2))
    lam = sub0.lam.copy()
    forced = np.zeros(n, dtype=bool)
    forced[~np.isfinite(geo.gaps[:-1])] = True
    status[~np.isfinite(geo.gaps[:-1])] = 1
    forced[~np.isfinite(geo.gaps[1:])] = True
    status[~np.isfinite(geo.gaps[1:])] = 0
    if ml:
        # both gaps of the pinned ball are the same function of the free positions
        forced[0], status[0] = True, 1
    if mr:
        forced[-1], status[-1] = True, 0

    def gaps_of(y):
        return G @ y + offset

    def system(y, lam, status):
        gaps = gaps_of(y)
        psi = np.zeros(n + 1)
        dpsi = np.zeros(n + 1)
        psi[fin] = n * energy.psi(n * gaps[fin])
        dpsi[fin] = n * n * energy.dpsi(n * gaps[fin])
        weights = np.where(status == 2, lam, status.astype(float))
        c = gap_weights(weights)
        z = assemble(c * psi, ml, mr)
        tied = np.flatnonzero(status == 2)
        r1 = ((y - x) / tau + z)[fi]
        r2 = (gaps[tied] - gaps[tied + 1]) / tau
        return gaps, psi, dpsi, c, tied, r1, r2

    y = x.copy()
    target_scale = 1.0
    # (y - x) / tau cannot be resolved below this
    floor = 8 * np.finfo(float).eps * (1.0 + np.max(np.abs(x))) / tau
    for _ in range(max_outer):
        for _ in range(max_newton):
            gaps, psi, dpsi, c, tied, r1, r2 = system(y, lam, status)
            target_scale = 1.0 + math.sqrt(np.sum(((y - x) / tau) ** 2) / n)
            small_r1 = math.sqrt(np.sum(r1**2) / n) <= 1e-2 * prox_tol * target_scale + floor
            small_r2 = tied.size == 0 or np.max(np.abs(r2) * tau / gaps[tied]) <= 1e-14
            if small_r1 and small_r2:
                break
            Hm = np.eye(n) / tau + G.T @ ((-c * dpsi)[:, None] * G)
            W = np.zeros((n + 1, tied.size))
            cols = np.arange(tied.size)
            W[tied, cols] = -psi[tied]
            W[tied + 1, cols] = psi[tied + 1]
            Z = assemble(W, ml, mr)
            A = (G[tied] - G[tied + 1]) / tau
            m = fi.size
            J = np.zeros((m + tied.size, m + tied.size))
            J[:m, :m] = Hm[np.ix_(fi, fi)]
            J[:m, m:] = Z[fi]
            J[m:, :m] = A[:, fi]
            rhs = -np.concatenate((r1, r2))
            try:
                step = np.linalg.solve(J, rhs)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(J, rhs, rcond=None)[0]
            merit = np.sum(r1**2) + np.sum(r2**2)
            alpha = 1.0
            for _ in range(40):
                y_try = y.copy()
                y_try[fi] += alpha * step[:m]
                lam_try = lam.copy()
                lam_try[tied] += alpha * step[m:]
                g_try = gaps_of(y_try)
                if np.all(g_try[fin] > 0) and (not isinstance(state.domain, Interval)
                                               or np.all(np.abs(y_try) <= state.domain.halfwidth)):
                    *_, q1, q2 = system(y_try, lam_try, status)
                    if np.sum(q1**2) + np.sum(q2**2) < merit or alpha < 1e-6:
                        break
                alpha *= 0.5
            else:
                raise ConvergenceError("line search failed in the proximal step")
            y, lam = y_try, lam_try
        else:
            raise ConvergenceError("Newton iteration of the proximal step did not converge")
        changed = False
        gaps = gaps_of(y)
        for b in range(n):
            if forced[b]:
                continue
            if status[b] == 2:
                if lam[b] < -1e-12:
                    status[b], lam[b], changed = 0, 0.0, True
                elif lam[b] > 1 + 1e-12:
                    status[b], lam[b], changed = 1, 1.0, True
            elif status[b] == 0 and gaps[b + 1] < gaps[b] * (1 - 1e-13):
                status[b], lam[b], changed = 2, 0.0, True
            elif status[b] == 1 and gaps[b] < gaps[b + 1] * (1 - 1e-13):
                status[b], lam[b], changed = 2, 1.0, True
        if not changed:
            break
    else:
        raise ConvergenceError("active-set iteration of the proximal step did not settle")
    y[~free] = x[~free]
    try:
        out = state.moved(y)
    except InputError as exc:
        raise ConvergenceError(f"proximal iterate left the admissible set: {exc}") from None
    # independent optimality check: -(y - x)/tau must be a subgradient at y
    target = np.where(free, (out.positions - x) / tau, 0.0)
    closest = closest_subgradient(out, energy, target, tie_tol)
    resid = math.sqrt(np.mean((target + closest.z)[free] ** 2))
    if resid > prox_tol * target_scale + floor:
        raise ConvergenceError(f"proximal optimality residual {resid:.3g} above tolerance")
    return out
