"""Run configuration: TOML schema, validation and conversion to domain objects.

Every block and key is documented in the README. Unknown keys are rejected
and each violation is reported with its dotted path, e.g. ``grid.N_z``.
"""

from __future__ import annotations

import math
from typing import Literal, Optional

import tomli
import tomli_w
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .model import ControlEvent, ControlSchedule, PulseShape

# A pulse counts as inside the medium once its tail is this many widths past the center.
ENTRY_WIDTHS = 4.0


class ConfigError(ValueError):
    """Invalid configuration text; ``problems`` lists every violation."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridBlock(_Block):
    L: float = Field(0.1, gt=0, description="medium length in units of c*T_p")
    N_z: int = Field(11, ge=2, description="field grid points across the medium")
    lead_in: float = Field(8.0, ge=0, description="vacuum before the medium; the run starts at -lead_in")
    lead_out: float = Field(2.0, ge=0, description="time added after the echo has left")
    t_end: Optional[float] = Field(None, description="override of the run end time")


class SpectrumBlock(_Block):
    kind: Literal["gaussian", "lorentzian", "uniform", "linear_gradient"] = "gaussian"
    width: float = Field(10.0, gt=0, description="inhomogeneous width (angular frequency / T_p)")
    slope: Optional[float] = Field(None, gt=0, description="gradient slope eta for linear_gradient")
    N_delta: int = Field(512, ge=1, description="detuning classes per line")
    sign: Literal[-1, 0, 1] = 1
    centers: list[float] = Field(default_factory=lambda: [0.0], min_length=1)
    quadrature: Literal["uniform", "gauss"] = "uniform"
    cutoff: Optional[float] = Field(None, gt=0, description="support half width in units of width")
    max_broadening: Optional[float] = Field(None, gt=0, description="material bound on the width")

    @model_validator(mode="after")
    def _gradient_needs_slope(self):
        if self.kind == "linear_gradient" and self.slope is None:
            raise ValueError("linear_gradient needs spectrum.slope")
        return self


class MediumBlock(_Block):
    d: float = Field(5.0, ge=0, description="resonant optical depth")
    gamma: float = Field(0.0, ge=0, description="phenomenological coherence decay rate")
    T_decoh: Optional[float] = Field(None, gt=0, description="coherence time for schedule checks")
    atoms: float = Field(1e6, gt=0, description="atom number, used by the weak-field monitor")


class PulseBlock(_Block):
    kind: Literal["gaussian", "sech", "time_bin", "train"] = "gaussian"
    center: float = 0.0
    width: float = Field(1.0, gt=0)
    detuning: float = 0.0
    energy: float = Field(1.0, gt=0)
    # time_bin
    alpha: float = 1.0
    beta: float = 0.0
    phase: float = 0.0
    separation: float = Field(5.0, gt=0)
    # train
    centers: Optional[list[float]] = None
    amplitudes: Optional[list[float]] = None
    phases: Optional[list[float]] = None
    detunings: Optional[list[float]] = None

    @model_validator(mode="after")
    def _check_kind(self):
        if self.kind == "time_bin":
            norm = self.alpha ** 2 + self.beta ** 2
            if abs(norm - 1.0) > 1e-9:
                raise ValueError(f"time_bin needs alpha^2 + beta^2 = 1 (got {norm:.12g})")
            if self.separation < 4 * self.width:
                raise ValueError("time_bin separation must be >= 4 x width")
        if self.kind == "train":
            if not self.centers:
                raise ValueError("train needs pulse.centers")
            n = len(self.centers)
            for name in ("amplitudes", "phases", "detunings"):
                v = getattr(self, name)
                if v is not None and len(v) != n:
                    raise ValueError(f"pulse.{name} must have {n} entries")
        return self


class EventBlock(_Block):
    time: float
    kind: Literal["flip", "imprint", "remove", "reestablish", "shelve", "band_rephase"]
    sign: Optional[Literal[-1, 1]] = None
    duration: Optional[float] = Field(None, ge=0)
    band: Optional[list[float]] = None

    @model_validator(mode="after")
    def _check_fields(self):
        if self.kind == "reestablish" and self.sign is None:
            raise ValueError("reestablish needs sign")
        if self.kind == "shelve" and self.duration is None:
            raise ValueError("shelve needs duration")
        if self.kind == "band_rephase":
            if self.band is None or len(self.band) != 2 or not self.band[0] < self.band[1]:
                raise ValueError("band_rephase needs band = [lo, hi] with lo < hi")
        return self


class ScheduleBlock(_Block):
    events: list[EventBlock] = Field(default_factory=list)
    switch_time: float = Field(0.0, ge=0, description="control switching duration (checked only)")

    @field_validator("events")
    @classmethod
    def _ordered(cls, events):
        for a, b in zip(events, events[1:]):
            if b.time < a.time:
                raise ValueError("events must be in time order")
        return events


class OutputBlock(_Block):
    directory: str = "."
    stem: str = "run"
    stride: int = Field(1, ge=1)


class OracleBlock(_Block):
    n_atoms: int = Field(20, ge=2)
    n_modes: int = Field(128, ge=2)
    box: float = Field(20.0, gt=0)
    half_width: float = Field(3.0, gt=0)
    d: float = Field(3.0, ge=0)

    @field_validator("n_atoms", "n_modes")
    @classmethod
    def _even(cls, v):
        if v % 2:
            raise ValueError("must be even")
        return v


class SimulationConfig(_Block):
    description: str = ""
    grid: GridBlock = Field(default_factory=GridBlock)
    spectrum: SpectrumBlock = Field(default_factory=SpectrumBlock)
    medium: MediumBlock = Field(default_factory=MediumBlock)
    pulse: PulseBlock = Field(default_factory=PulseBlock)
    schedule: ScheduleBlock = Field(default_factory=ScheduleBlock)
    output: OutputBlock = Field(default_factory=OutputBlock)
    oracle: Optional[OracleBlock] = None

    def warnings(self) -> list[str]:
        """Policy warnings that do not stop a run."""
        from .broadening import broadening_warning, profile_from_config

        out = []
        shape = pulse_from_config(self)
        sched = schedule_from_config(self)
        t0 = sched.retrieval_time
        entered = shape.centers[-1] + ENTRY_WIDTHS * shape.width * (2 if shape.kind.value == "sech" else 1)
        entered += self.grid.L
        if t0 is not None and t0 < entered:
            out.append(f"retrieval at t={t0:g} before the pulse has fully entered the medium "
                       f"(ends near t={entered:g})")
        w = broadening_warning(profile_from_config(self), self.spectrum.max_broadening)
        if w:
            out.append(w)
        return out


def _format_errors(err: ValidationError) -> list[str]:
    out = []
    for e in err.errors():
        path = ".".join(str(p) for p in e["loc"])
        msg = e["msg"]
        if e["type"] == "extra_forbidden":
            msg = "unknown key"
        out.append(f"{path}: {msg}" if path else msg)
    return out


def config_from_dict(data: dict) -> SimulationConfig:
    try:
        return SimulationConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_format_errors(err)) from None


def parse_config(text: str) -> SimulationConfig:
    """Parse and validate TOML text."""
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as err:
        raise ConfigError([f"syntax error: {err}"]) from None
    return config_from_dict(data)


def load_config(path) -> SimulationConfig:
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as err:
        raise ConfigError([f"{path}: not UTF-8 ({err})"]) from None
    return parse_config(text)


def config_to_dict(config: SimulationConfig) -> dict:
    return config.model_dump(mode="json", exclude_none=True)


def serialize_config(config: SimulationConfig) -> str:
    return tomli_w.dumps(config_to_dict(config))


def with_overrides(config: SimulationConfig, overrides: dict[str, object]) -> SimulationConfig:
    """Copy of ``config`` with dotted keys replaced, validated again."""
    data = config_to_dict(config)
    for key, value in overrides.items():
        parts = key.split(".")
        node = data
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return config_from_dict(data)


def pulse_from_config(config: SimulationConfig) -> PulseShape:
    p = config.pulse
    if p.kind == "gaussian":
        return PulseShape.gaussian(p.center, p.width, p.detuning, p.energy)
    if p.kind == "sech":
        return PulseShape.sech(p.center, p.width, p.detuning, p.energy)
    if p.kind == "time_bin":
        return PulseShape.time_bin(p.alpha, p.beta, p.phase, p.center, p.separation, p.width,
                                   p.detuning, p.energy)
    n = len(p.centers)
    amps = p.amplitudes or [1.0] * n
    phases = p.phases or [0.0] * n
    cplx = [a * complex(math.cos(f), math.sin(f)) for a, f in zip(amps, phases)]
    return PulseShape.train(p.centers, p.width, cplx, p.detunings, p.energy)


def schedule_from_config(config: SimulationConfig) -> ControlSchedule:
    s = config.schedule
    events = tuple(ControlEvent(e.time, e.kind, e.sign, e.duration,
                                tuple(e.band) if e.band is not None else None) for e in s.events)
    return ControlSchedule(events, s.switch_time)
