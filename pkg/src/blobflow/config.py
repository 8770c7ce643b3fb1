"""Run configuration: a JSON file plus dotted ``--set key=value`` overrides."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError, field_validator

from .core import Domain, InternalEnergy, domain_from_spec, energy_from_spec
from .errors import ConfigError, InputError
from .flow import StepperConfig


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DomainSpec(_Strict):
    type: Literal["line", "interval"] = "interval"
    halfwidth: PositiveFloat = 1.0


class EnergySpec(_Strict):
    type: Literal["heat", "pme", "custom"] = "heat"
    m: float = 2.0
    H: Optional[str] = None
    dH: Optional[str] = None
    d2H: Optional[str] = None
    psi_at_infinity: float = 0.0


class InitSpec(_Strict):
    profile: Literal["cosine", "uniform", "linear", "gaussian", "mollified_step", "barenblatt",
                     "positions"] = "cosine"
    modes: dict[int, float] = Field(default_factory=lambda: {2: 0.25})
    slope: float = 0.5
    sigma: PositiveFloat = 0.5
    delta: PositiveFloat = 0.25
    step: tuple[float, float] = (0.25, 0.75)
    t0: PositiveFloat = 1.0
    positions: Optional[list[float]] = None
    positions_file: Optional[str] = None


class StepperSpec(_Strict):
    scheme: Literal["explicit", "proximal"] = "explicit"
    dt_init: PositiveFloat = 1e-3
    safety: PositiveFloat = 0.2
    record_every: Optional[PositiveFloat] = None
    prox_tol: PositiveFloat = 1e-10
    tie_tol: float = Field(default=1e-9, ge=0)
    max_steps: PositiveInt = 5_000_000


class GammaSpec(_Strict):
    profile: Literal["linear", "uniform", "gaussian"] = "linear"
    ns: list[PositiveInt] = Field(default_factory=lambda: [16, 32, 64, 128, 256, 512])
    energies: list[EnergySpec] = Field(default_factory=lambda: [EnergySpec(type="heat"), EnergySpec(type="pme")])
    schedule: list[tuple[PositiveFloat, PositiveInt]] = Field(
        default_factory=lambda: [(0.2, 16), (0.1, 32), (0.05, 64), (0.025, 128), (0.0125, 256)])
    mollify_source: Literal["step", "gaussian"] = "step"


class OracleSpec(_Strict):
    gradient_states: PositiveInt = 200
    tie_states: PositiveInt = 50
    transport_pairs: PositiveInt = 100
    corrupt_table: bool = False


class RunConfig(_Strict):
    domain: DomainSpec = Field(default_factory=DomainSpec)
    energy: EnergySpec = Field(default_factory=EnergySpec)
    n: Union[PositiveInt, list[PositiveInt]] = 50
    T: PositiveFloat = 0.1
    stepper: StepperSpec = Field(default_factory=StepperSpec)
    init: InitSpec = Field(default_factory=InitSpec)
    reference: Literal["auto", "neumann", "barenblatt", "stationary", "none"] = "auto"
    report_times: Optional[list[float]] = None
    out: str = "out"
    seed: int = 0
    gamma: GammaSpec = Field(default_factory=GammaSpec)
    oracle: OracleSpec = Field(default_factory=OracleSpec)

    @field_validator("n")
    @classmethod
    def _at_least_two(cls, v):
        for k in v if isinstance(v, list) else [v]:
            if k < 2:
                raise ValueError("every N must be at least 2")
        return v

    @property
    def ns(self) -> list[int]:
        return list(self.n) if isinstance(self.n, list) else [self.n]

    def build_domain(self) -> Domain:
        return domain_from_spec(self.domain.model_dump())

    def build_energy(self, spec: EnergySpec | None = None) -> InternalEnergy:
        spec = spec or self.energy
        data = spec.model_dump()
        if spec.type == "custom" and not all(data[k] for k in ("H", "dH", "d2H")):
            raise ConfigError("custom energies need H, dH and d2H expressions")
        try:
            return energy_from_spec(data)
        except InputError as exc:
            raise ConfigError(str(exc)) from None

    def stepper_config(self) -> StepperConfig:
        s = self.stepper
        try:
            return StepperConfig(self.T, s.scheme, s.dt_init, s.safety, s.record_every, s.prox_tol, s.tie_tol,
                                 s.max_steps)
        except InputError as exc:
            raise ConfigError(str(exc)) from None


def parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(data: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    key, raw = assignment.split("=", 1)
    parts = key.strip().split(".")
    if not all(parts):
        raise ConfigError(f"bad override key {key!r}")
    node = data
    for p in parts[:-1]:
        nxt = node.setdefault(p, {})
        if not isinstance(nxt, dict):
            raise ConfigError(f"override {key!r} descends into a non-object")
        node = nxt
    node[parts[-1]] = parse_value(raw)


def load_config(path: str | Path | None, overrides=()) -> RunConfig:
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file {str(path)!r} not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    for item in overrides:
        apply_override(data, item)
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        msgs = "; ".join(f"{'.'.join(map(str, e['loc']))}: {e['msg']}" for e in exc.errors())
        raise ConfigError(msgs) from None
