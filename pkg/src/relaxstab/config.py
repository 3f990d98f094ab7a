"""Run configuration schema (YAML or JSON) and its translation to library objects."""

from dataclasses import fields
from pathlib import Path
from typing import List, Literal, Optional, Tuple

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError, model_validator

from .boundary import ControlLaw, Segment, zero_incoming_laws
from .saint_venant import GateGains, SaintVenantParams, build_controls, build_model
from .stability import RawSystem, RectDomain, normalize_system

EDGE = Literal["left", "right", "bottom", "top"]


class ConfigError(ValueError):
    pass


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class MatrixSystem(_Model):
    A1: List[List[float]]
    A2: List[List[float]]
    Q: List[List[float]]
    P: Optional[List[List[float]]] = None
    r: PositiveInt
    A0: List[List[float]]


class SystemSpec(_Model):
    preset: Optional[Literal["saint-venant"]] = None
    params: dict = Field(default_factory=dict)
    matrices: Optional[MatrixSystem] = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.preset is None) == (self.matrices is None):
            raise ValueError("give exactly one of 'preset' or 'matrices'")
        if self.preset == "saint-venant":
            known = {f.name for f in fields(SaintVenantParams)}
            unknown = set(self.params) - known
            if unknown:
                raise ValueError(f"unknown saint-venant params {sorted(unknown)}; "
                                 f"allowed {sorted(known)}")
            SaintVenantParams(**{k: float(v) for k, v in self.params.items()})
        elif self.params:
            raise ValueError("'params' only applies to presets")
        return self


class DomainSpec(_Model):
    x_min: float = 0.0
    x_max: float = 1.0
    y_min: float = 0.0
    y_max: float = 1.0

    @model_validator(mode="after")
    def _nondegenerate(self):
        RectDomain(self.x_min, self.x_max, self.y_min, self.y_max)
        return self


class GridSpec(_Model):
    nx: PositiveInt = 200
    ny: PositiveInt = 20


class SchemeSpec(_Model):
    cfl: float = Field(0.9, gt=0.0, le=1.0)
    t_end: float = Field(40.0, ge=0.0)
    source_mode: Literal["exact-exponential", "explicit-euler"] = "exact-exponential"
    record_every: PositiveInt = 1
    dt: Optional[PositiveFloat] = None


class GainsSpec(_Model):
    k1: float = 0.0
    k2: float = 0.0
    k3: float = 0.0
    k4: float = 0.0


class SegmentSpec(_Model):
    edge: EDGE
    start: float
    stop: float


class LawSpec(_Model):
    edge: EDGE
    start: float
    stop: float
    kind: Literal["zero", "local", "nonlocal"] = "zero"
    gain: Optional[List[List[float]]] = None
    source: Optional[SegmentSpec] = None
    source_gain: Optional[List[List[float]]] = None
    source_map: Optional[Tuple[float, float]] = None


class ControlsSpec(_Model):
    mode: Literal["zero", "gains", "explicit"] = "zero"
    gains: GainsSpec = Field(default_factory=GainsSpec)
    laws: List[LawSpec] = Field(default_factory=list)
    override: bool = False


class BumpSpec(_Model):
    component: int = Field(0, ge=0)
    center: Tuple[float, float]
    width: PositiveFloat
    amplitude: float = 1.0


class InitialSpec(_Model):
    kind: Literal["gaussian", "random", "file"] = "gaussian"
    bumps: Optional[List[BumpSpec]] = None
    amplitude: float = 1.0
    path: Optional[str] = None


class OutputSpec(_Model):
    dir: str = "relaxstab-out"
    snapshots: bool = False


class TuneSpec(_Model):
    k1: List[float] = Field(default_factory=list)
    k2: List[float] = Field(default_factory=list)
    k3: List[float] = Field(default_factory=list)
    k4: List[float] = Field(default_factory=list)
    simulate: bool = False
    t_end: float = Field(5.0, gt=0.0)


class RunConfig(_Model):
    system: SystemSpec = Field(default_factory=lambda: SystemSpec(preset="saint-venant"))
    domain: Optional[DomainSpec] = None
    grid: GridSpec = Field(default_factory=GridSpec)
    scheme: SchemeSpec = Field(default_factory=SchemeSpec)
    controls: ControlsSpec = Field(default_factory=ControlsSpec)
    initial: InitialSpec = Field(default_factory=InitialSpec)
    output: OutputSpec = Field(default_factory=OutputSpec)
    seed: int = 0
    tune: TuneSpec = Field(default_factory=TuneSpec)

    @model_validator(mode="after")
    def _domain_needed(self):
        if self.system.matrices is not None and self.domain is None:
            raise ValueError("'domain' is required with explicit matrices")
        if self.controls.mode == "gains" and self.system.preset != "saint-venant":
            raise ValueError("controls.mode 'gains' needs the saint-venant preset")
        return self

    # -- translation -----------------------------------------------------

    @property
    def sv_params(self):
        if self.system.preset != "saint-venant":
            return None
        return SaintVenantParams(**{k: float(v) for k, v in self.system.params.items()})

    def build_domain(self):
        if self.domain is not None:
            d = self.domain
            return RectDomain(d.x_min, d.x_max, d.y_min, d.y_max)
        return self.sv_params.domain

    def build_system(self):
        """``(RelaxationSystem, A0)``; may raise certification errors for bad matrices."""
        if self.system.preset == "saint-venant":
            return build_model(self.sv_params)
        m = self.system.matrices
        raw = RawSystem(m.A1, m.A2, m.Q, m.P)
        return normalize_system(raw, m.r), np.asarray(m.A0, float)

    def build_laws(self, domain, weight=None):
        c = self.controls
        if c.mode == "zero":
            return zero_incoming_laws(domain)
        if c.mode == "gains":
            g = GateGains(c.gains.k1, c.gains.k2, c.gains.k3, c.gains.k4)
            return build_controls(self.sv_params, g, override=c.override, weight=weight)
        laws = []
        for spec in c.laws:
            src = None if spec.source is None else Segment(spec.source.edge, spec.source.start,
                                                           spec.source.stop)
            laws.append(ControlLaw(Segment(spec.edge, spec.start, spec.stop), spec.kind,
                                   spec.gain, src, spec.source_gain, spec.source_map,
                                   label=f"{spec.edge}[{spec.start},{spec.stop})"))
        return laws

    def default_bumps(self, domain):
        cx = 0.5 * (domain.x_min + domain.x_max)
        cy = 0.5 * (domain.y_min + domain.y_max)
        w = 0.05 * (domain.width + domain.height)
        return [{"component": 0, "center": (cx, cy), "width": w, "amplitude": 1.0}]


def _format_errors(exc):
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"  {loc}: {err['msg']}")
    return "invalid config:\n" + "\n".join(lines)


def _set_dotted(data, key, value):
    parts = key.split(".")
    node = data
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set {key}: {part} is not a mapping")
    node[parts[-1]] = value


def load_config(path=None, overrides=(), preset=None, params=()):
    """Parse and validate a config file, then apply ``KEY=VALUE`` overrides.

    Raises
    ------
    ConfigError
        With the offending key path (and line, for YAML syntax errors).
    """
    data = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
            raise ConfigError(f"config parse error{where}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
    if preset is not None:
        data.setdefault("system", {})
        data["system"].pop("matrices", None)
        data["system"]["preset"] = preset
    for item in params:
        key, _, val = item.partition("=")
        if not _:
            raise ConfigError(f"--param expects NAME=VALUE, got {item!r}")
        data.setdefault("system", {"preset": "saint-venant"}).setdefault("params", {})[key] = \
            yaml.safe_load(val)
    for item in overrides:
        key, _, val = item.partition("=")
        if not _:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        _set_dotted(data, key, yaml.safe_load(val))
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None
    except ValueError as exc:
        raise ConfigError(f"invalid config: {exc}") from None
