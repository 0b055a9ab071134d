"""Experiment configuration: YAML parsing, validation, canonical echo and hashing.

Every section rejects unknown keys.  Defaults are filled on parse, so the echo
of a parsed configuration lists every setting and parsing the echo returns an
equal configuration.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import fields
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .environment import EnvParams

KINDS = ("metric", "hbar", "cell_rate", "evolve_rate", "fluctuations", "bias", "invariants",
         "straszewicz", "softmin_stats")


class ConfigError(ValueError):
    """Malformed or invalid configuration; the message lists every problem."""


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


def _nonempty(v):
    if v is not None and len(v) == 0:
        raise ValueError("list must not be empty")
    return v


class EnvironmentConfig(_Section):
    d: int = 2
    q: float = 2.0
    Lambda: float = 1.0
    kind: Literal["deterministic", "periodic", "poisson_bumps", "checkerboard"] = "deterministic"
    intensity: float = 1.0
    bump_radius: float = 0.5
    bump_amplitude: float = 1.0
    V_max: float = 1.0
    cell_size: Optional[float] = None
    smoothing_radius: Optional[float] = None
    zero_fraction: float = 0.5
    period: float = 1.0
    a0: float = 1.0
    a_modulation: float = 0.0
    sigma_kind: Literal["zero", "constant_isotropic", "bump_modulated"] = "zero"
    sigma0: float = 0.0
    sigma_modulation: float = 0.0
    constrained: bool = False

    @model_validator(mode="after")
    def _structural(self):
        problems = self.params(0).problems()
        if problems:
            raise ValueError("; ".join(problems))
        return self

    def params(self, seed: int, replica: int = 0) -> EnvParams:
        names = {f.name for f in fields(EnvParams)} - {"seed", "replica"}
        return EnvParams(**{k: getattr(self, k) for k in names}, seed=int(seed), replica=int(replica))


class SchemeConfig(_Section):
    h: float = Field(0.1, gt=0)
    residual_tol: Optional[float] = Field(None, gt=0)
    max_sweeps: int = Field(100_000, gt=0)
    discretization: Literal["upwind_godunov", "centered"] = "upwind_godunov"


class MetricConfig(_Section):
    mu: float = Field(1.0, gt=0)
    source: list[float] = Field(default_factory=lambda: [0.0, 0.0])
    radius: float = Field(6.0, gt=0)


class HbarConfig(_Section):
    p_list: list[list[float]] = Field(default_factory=lambda: [[0.5, 0.0], [1.0, 0.0]])
    tol: float = Field(0.01, gt=0)
    R: float = Field(20.0, gt=1)
    n_directions: int = Field(64, ge=4)
    mu_min: float = Field(0.25, gt=0)
    mu_max: float = Field(4.0, gt=0)
    _ne = field_validator("p_list")(_nonempty)


class CellConfig(_Section):
    p: list[float] = Field(default_factory=lambda: [1.0, 0.0])
    delta_list: list[float] = Field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    h: float = Field(0.25, gt=0)
    R_factor: float = Field(2.0, gt=0)
    hbar: Optional[float] = None
    hbar_tol: float = Field(0.002, gt=0)
    hbar_R: float = Field(40.0, gt=1)
    hbar_replicas: int = Field(4, ge=1)
    _ne = field_validator("delta_list")(_nonempty)


class EvolveConfig(_Section):
    eps_list: list[float] = Field(default_factory=lambda: [0.2, 0.1, 0.05])
    T: float = Field(1.0, gt=0)
    width: float = Field(1.0, gt=0)
    height: float = Field(1.0, gt=0)
    n_slices: int = Field(10, ge=1)
    spacing: float = Field(0.05, gt=0)
    h_factor: float = Field(0.125, gt=0, le=0.25)
    n_p: int = Field(41, ge=5)
    hbar_tol: float = Field(0.002, gt=0)
    hbar_R: float = Field(40.0, gt=1)
    hbar_replicas: int = Field(4, ge=1)
    mu_min: float = Field(0.005, gt=0)
    _ne = field_validator("eps_list")(_nonempty)


class FluctuationsConfig(_Section):
    mu: float = Field(1.0, gt=0)
    R_list: list[float] = Field(default_factory=lambda: [8.0, 16.0, 32.0])
    direction: Optional[list[float]] = None
    n_lambda: int = Field(12, ge=3)
    max_var_exponent: float = 1.2
    _ne = field_validator("R_list")(_nonempty)


class BiasConfig(_Section):
    mu: float = Field(1.0, gt=0)
    R_list: list[float] = Field(default_factory=lambda: [4.0, 8.0, 16.0, 32.0])
    reference_radii: Optional[list[float]] = None
    direction: Optional[list[float]] = None
    max_exponent: float = 0.85
    sigma: float = Field(0.5, gt=0, le=1)
    t_list: list[float] = Field(default_factory=lambda: [2.0, 4.0])
    pairs: list[list[float]] = Field(default_factory=lambda: [[2.0, 2.0]])
    softmin_R: float = Field(12.0, gt=0)
    softmin_replicas: int = Field(10, ge=1)
    _ne = field_validator("R_list", "t_list")(_nonempty)


class InvariantsConfig(_Section):
    mu: float = Field(1.0, gt=0)
    box_radius: float = Field(6.0, gt=3)
    n_sources: int = Field(6, ge=2)
    n_triples: int = Field(100, ge=1)
    n_levels: int = Field(6, ge=2)
    dpp_t: float = Field(1.5, ge=1)
    n_dpp: int = Field(4, ge=1)


class StraszewiczConfig(_Section):
    n_polygons: int = Field(50, ge=1)
    min_vertices: int = Field(3, ge=3)
    max_vertices: int = Field(12, ge=3)
    r_factors: list[float] = Field(default_factory=lambda: [2.0, 4.0, 8.0])
    tol: float = Field(1e-6, ge=0)
    segment_lengths: list[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0])
    _ne = field_validator("r_factors")(_nonempty)


class SoftminConfig(_Section):
    mu: float = Field(1.0, gt=0)
    sigma: float = Field(0.5, gt=0, le=1)
    t_list: list[float] = Field(default_factory=lambda: [2.0, 3.0, 4.0])
    R: float = Field(10.0, gt=0)
    pairs: list[list[float]] = Field(default_factory=lambda: [[2.0, 2.0]])
    sides: int = Field(1, ge=1, le=2)
    thetas: list[float] = Field(default_factory=lambda: [0.05, 0.1, 0.2])
    n_sources: int = Field(5, ge=1)
    box_radius: float = Field(8.0, gt=3)
    _ne = field_validator("t_list", "thetas")(_nonempty)


class ExperimentConfig(_Section):
    kind: Optional[Literal[KINDS]] = None
    seed: int = Field(0, ge=0, lt=2**64)
    n_replicas: int = Field(50, ge=1)
    output_dir: Optional[str] = None
    environment: EnvironmentConfig = Field(default_factory=EnvironmentConfig)
    scheme: SchemeConfig = Field(default_factory=SchemeConfig)
    metric: MetricConfig = Field(default_factory=MetricConfig)
    hbar: HbarConfig = Field(default_factory=HbarConfig)
    cell: CellConfig = Field(default_factory=CellConfig)
    evolve: EvolveConfig = Field(default_factory=EvolveConfig)
    fluctuations: FluctuationsConfig = Field(default_factory=FluctuationsConfig)
    bias: BiasConfig = Field(default_factory=BiasConfig)
    invariants: InvariantsConfig = Field(default_factory=InvariantsConfig)
    straszewicz: StraszewiczConfig = Field(default_factory=StraszewiczConfig)
    softmin: SoftminConfig = Field(default_factory=SoftminConfig)

    def env_params(self, replica: int = 0) -> EnvParams:
        return self.environment.params(self.seed, replica)

    def canonical(self) -> dict:
        """Plain data of every setting that affects results (the output path does not)."""
        return self.model_dump(mode="json", exclude={"output_dir"})


def _format_errors(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "invalid configuration:\n  " + "\n  ".join(lines)


def config_from_dict(data: dict) -> ExperimentConfig:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping at the top level")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


def parse_config_text(text: str, source: str = "<string>") -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"{source}: parse error at {where}: {problem}") from None
    return config_from_dict(data)


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"configuration file {path} does not exist")
    return parse_config_text(path.read_text(encoding="utf-8"), str(path))


def echo_config(cfg: ExperimentConfig) -> str:
    """Deterministic YAML rendering of the full configuration, keys sorted."""
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=True, default_flow_style=False)


def config_hash(cfg: ExperimentConfig) -> str:
    """sha256 of the canonical JSON form; independent of key order in the source file."""
    blob = json.dumps(cfg.canonical(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
