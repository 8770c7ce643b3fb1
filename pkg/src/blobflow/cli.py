"""Command line front end: ``blobflow simulate|converge|gamma|oracle --config FILE [--set k=v]...``."""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .analysis import (BarenblattSolution, FlowReference, NeumannHeatSolution, SmoothProfile, gamma_study,
                       gap_bound, max_gap_bound, mollified_study, mollify, quantile_sample, serfaty_report,
                       well_prepared)
from .config import RunConfig, load_config
from .core import Interval, WholeLine
from .discrete import ParticleState, PiecewiseDensity, geometry
from .errors import BlobflowError, ConfigError, OracleMismatch
from .flow import Trajectory, simulate
from .io import write_csv, write_json, write_trajectory
from .oracles import corrupt_table, run_suite
from .transport import pseudo_inverse

THREADS_ENV = "BLOBFLOW_THREADS"


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        k = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if k < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return k


# -- initial data and references -------------------------------------------------

def _support(cfg: RunConfig) -> float:
    return cfg.domain.halfwidth


def _step_density(cfg: RunConfig) -> PiecewiseDensity:
    r = _support(cfg)
    a, b = cfg.init.step
    return PiecewiseDensity([-r, 0.0], [0.0, r], values=[a / r, b / r])


def initial_state(cfg: RunConfig, n: int) -> ParticleState:
    init = cfg.init
    domain = cfg.build_domain()
    r = _support(cfg)
    if init.profile == "positions":
        if init.positions is not None:
            x = np.asarray(init.positions, dtype=float)
        elif init.positions_file is not None:
            from .io import read_positions

            try:
                x = read_positions(Path(init.positions_file))
            except (OSError, ValueError, KeyError) as exc:
                raise ConfigError(f"cannot read positions: {exc}") from None
        else:
            raise ConfigError("init.profile=positions needs init.positions or init.positions_file")
        return ParticleState(x, domain)
    if init.profile == "barenblatt":
        if cfg.energy.type != "pme" or cfg.domain.type != "line":
            raise ConfigError("Barenblatt initial data needs a pme energy on the line")
        sol = BarenblattSolution(cfg.energy.m)
        R = sol.radius(init.t0)
        q = pseudo_inverse(lambda x: sol.cdf(init.t0, x), support=(-R, R))
        return quantile_sample(q, R, n, domain)
    if init.profile == "cosine":
        if not isinstance(domain, Interval):
            raise ConfigError("cosine initial data lives on an interval")
        profile = NeumannHeatSolution(r, init.modes).profile(0.0)
    elif init.profile == "uniform":
        # equal spacing with both ends on the walls is the discrete steady state
        return ParticleState(np.linspace(-r, r, n), domain)
    elif init.profile == "linear":
        profile = SmoothProfile.linear(init.slope, r)
    elif init.profile == "gaussian":
        profile = SmoothProfile.truncated_gaussian(init.sigma, r)
    else:
        profile = mollify(_step_density(cfg), init.delta, domain)
    return well_prepared(profile, n, domain)


def _sample_count(cfg: RunConfig) -> list[int]:
    if cfg.init.profile == "positions":
        return [initial_state(cfg, 0).n]
    return cfg.ns


def build_reference(cfg: RunConfig):
    kind = cfg.reference
    energy = cfg.build_energy()
    if kind == "auto":
        if cfg.init.profile == "cosine" and cfg.energy.type == "heat":
            kind = "neumann"
        elif cfg.init.profile == "barenblatt":
            kind = "barenblatt"
        elif cfg.init.profile == "uniform" and cfg.domain.type == "interval":
            kind = "stationary"
        else:
            return None
    if kind == "none":
        return None
    if kind == "neumann":
        if cfg.energy.type != "heat" or cfg.init.profile != "cosine" or cfg.domain.type != "interval":
            raise ConfigError("the Neumann reference needs heat, an interval and cosine initial data")
        return FlowReference.neumann_heat(NeumannHeatSolution(cfg.domain.halfwidth, cfg.init.modes), energy)
    if kind == "barenblatt":
        if cfg.energy.type != "pme" or cfg.init.profile != "barenblatt":
            raise ConfigError("the Barenblatt reference needs pme and Barenblatt initial data")
        return FlowReference.barenblatt(BarenblattSolution(cfg.energy.m), cfg.init.t0, energy)
    if cfg.domain.type != "interval" or cfg.init.profile != "uniform":
        raise ConfigError("the stationary reference needs uniform data on an interval")
    return FlowReference.stationary_uniform(cfg.domain.halfwidth, energy)


# -- runs ------------------------------------------------------------------------

def _run_one(payload: str, n: int) -> Trajectory:
    cfg = RunConfig.model_validate_json(payload)
    return simulate(initial_state(cfg, n), cfg.build_energy(), cfg.stepper_config())


def run_sweep(cfg: RunConfig, ns: list[int]) -> dict[int, Trajectory]:
    cfg.build_energy()
    cfg.stepper_config()
    payload = cfg.model_dump_json()
    workers = min(thread_count(), len(ns))
    if workers <= 1:
        return {n: _run_one(payload, n) for n in ns}
    with ProcessPoolExecutor(max_workers=workers) as pool:
        trajs = list(pool.map(_run_one, [payload] * len(ns), ns))
    return dict(zip(ns, trajs))


def _summary(traj: Trajectory) -> dict:
    E = traj["E_N"]
    drop = float(E[0] - E[-1])
    diss = float(traj.dissipation()[-1])
    return {"N": traj.n, "steps": traj.steps, "E_N_initial": float(E[0]), "E_N_final": float(E[-1]),
            "energy_drop": drop, "dissipated": diss,
            "identity_residual": abs(drop - diss) / abs(drop) if drop else abs(diss),
            "min_dx_nondecreasing": bool(np.all(np.diff(traj["min_dx"]) >= -1e-8)),
            "max_dx_nonincreasing": bool(np.all(np.diff(traj["max_dx"]) <= 1e-8))}


def cmd_simulate(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    trajs = run_sweep(cfg, _sample_count(cfg))
    summaries = []
    for n, traj in sorted(trajs.items()):
        write_trajectory(out, traj)
        summaries.append(_summary(traj))
    keys = list(summaries[0])
    write_csv(out / "report.csv", keys, ([s[k] for k in keys] for s in summaries))
    write_json(out / "report.json", {"command": "simulate", "runs": summaries})
    return 0


def cmd_converge(cfg: RunConfig) -> int:
    if cfg.stepper.record_every is None:
        cfg = cfg.model_copy(update={"stepper": cfg.stepper.model_copy(update={"record_every": cfg.T / 10})})
    out = Path(cfg.out)
    ns = _sample_count(cfg)
    trajs = run_sweep(cfg, ns)
    for traj in trajs.values():
        write_trajectory(out, traj)
    energy = cfg.build_energy()
    reference = build_reference(cfg)
    header = ["t", "N", "quantity", "discrete", "reference", "difference"]
    rows = []
    payload: dict = {"command": "converge", "ns": ns, "reference": reference.name if reference else None}
    if reference is not None:
        rep = serfaty_report(trajs, reference, energy, cfg.report_times)
        for t, n, q, d, c in rep.rows():
            rows.append([t, n, q, d, c, d - c])
        times = rep.times
        payload.update(verdicts=rep.verdicts, orders=rep.orders, a1=rep.a1, a2=rep.a2,
                       final_errors={q: dict(zip(ns, np.abs(rep.errors(q)[:, -1]))) for q in rep.discrete})
    else:
        times = np.array(trajs[ns[0]].times)
    bounds = {}
    for n in ns:
        traj = trajs[n]
        a2 = float(n * geometry(traj.state(0)).interior_gaps.max())
        for t in times:
            k = traj.sample_index(t)
            if isinstance(traj.domain, WholeLine):
                bound = max_gap_bound(energy, n, float(t), a2) if t > 0 else a2 / n
                rows.append([t, n, "max_dx", traj["max_dx"][k], bound, traj["max_dx"][k] - bound])
            else:
                bound = gap_bound(a2, n, traj["uniform_ratio"][k])
                rows.append([t, n, "total_gap", traj["total_gap"][k], bound, traj["total_gap"][k] - bound])
        last = rows[-1]
        bounds[n] = {"quantity": last[2], "value": last[3], "bound": last[4], "holds": bool(last[5] <= 0)}
    payload["bounds"] = bounds
    payload["runs"] = [_summary(trajs[n]) for n in ns]
    write_csv(out / "report.csv", header, rows)
    write_json(out / "report.json", payload)
    return 0


def cmd_gamma(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    g = cfg.gamma
    r = _support(cfg)
    domain = cfg.build_domain()
    profile = {"linear": lambda: SmoothProfile.linear(cfg.init.slope, r),
               "uniform": lambda: SmoothProfile.uniform(r),
               "gaussian": lambda: SmoothProfile.truncated_gaussian(cfg.init.sigma, r)}[g.profile]()
    header = ["study", "energy", "N", "delta", "energy_gap", "d2", "d2_bound"]
    rows, payload = [], {"command": "gamma", "profile": g.profile, "studies": []}
    for spec in g.energies:
        energy = cfg.build_energy(spec)
        study = gamma_study(profile, energy, g.ns, domain)
        name = type(energy).__name__.lower()
        for n, e, d, b in zip(study.ns, study.energy_gap, study.d2, study.d2_bound):
            rows.append(["sampled", name, n, 0.0, e, d, b])
        if g.mollify_source == "step":
            source = _step_density(cfg)
        else:
            source = SmoothProfile.truncated_gaussian(cfg.init.sigma, r)
        moll = mollified_study(source, energy, domain, g.schedule)
        for row in moll:
            rows.append(["mollified", name, row["N"], row["delta"], row["energy_gap"], row["d2"], float("nan")])
        gaps = np.array([row["energy_gap"] for row in moll])
        dists = np.array([row["d2"] for row in moll])
        payload["studies"].append({
            "energy": name, "limit": study.limit, "slope": study.slope,
            "min_energy_gap": float(study.energy_gap.min()),
            "d2_within_bound": bool(np.all(study.d2 <= study.d2_bound)),
            "mollified_monotone": bool(np.all(np.diff(np.abs(gaps)) < 0) and np.all(np.diff(dists) < 0)),
        })
    write_csv(out / "report.csv", header, rows)
    write_json(out / "report.json", payload)
    return 0


def cmd_oracle(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    o = cfg.oracle
    rep = run_suite(cfg.seed, o.gradient_states, o.tie_states, o.transport_pairs,
                    table=corrupt_table() if o.corrupt_table else None)
    write_csv(out / "report.csv", ["check", "passed", "worst"], ([r.name, r.passed, r.worst] for r in rep.results))
    write_json(out / "report.json", {"command": "oracle", "seed": cfg.seed, "passed": rep.passed,
                                     "results": [vars(r) for r in rep.results]})
    if not rep.passed:
        failed = [r.name for r in rep.results if not r.passed]
        raise OracleMismatch("oracle checks failed: " + ", ".join(failed))
    return 0


COMMANDS = {"simulate": cmd_simulate, "converge": cmd_converge, "gamma": cmd_gamma, "oracle": cmd_oracle}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blobflow", description=__doc__.split(":")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted override, value parsed as JSON when possible")
    return parser


def _emit_error(code: str, message: str, exit_code: int) -> int:
    print(json.dumps({"error": {"code": code, "message": message, "exit_code": exit_code}}), file=sys.stderr)
    return exit_code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return 0
        return _emit_error("usage", "invalid command line", 2)
    try:
        cfg = load_config(args.config, args.overrides)
        return COMMANDS[args.command](cfg)
    except BlobflowError as exc:
        return _emit_error(exc.code, str(exc), exc.exit_code)
    except (ValueError, TypeError) as exc:
        return _emit_error("config", str(exc), 2)
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        return _emit_error("numerical", str(exc), 3)


if __name__ == "__main__":
    sys.exit(main())
