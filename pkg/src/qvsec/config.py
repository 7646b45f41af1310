"""Run configuration: YAML file values overridden by command-line flags."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import yaml

from .powerflow import SolverOptions
from .qv import SweepOptions
from .scenarios import ZonePolicy


class ConfigError(ValueError):
    pass


SCHEME_FLAGS = {"ppf": ("p_pf",), "pv": ("p_v",), "both": ("p_pf", "p_v")}


@dataclass
class RunConfig:
    case: Optional[str] = None
    out: str = "out"
    seed: int = 0
    k: int = 5
    scheme: str = "both"
    kv_floor: float = 0.0
    v_step: float = 0.01
    v_floor: float = 0.5
    v_start_offset: float = 0.0
    refine_bisection_steps: int = 8
    tol: float = 1e-8
    max_iter: int = 30
    max_switch_rounds: int = 10
    branches: Union[str, list] = "all"
    branch_kv_floor: float = 0.0
    pv_q_limit: Optional[float] = None
    buses: list = field(default_factory=list)
    joint: bool = False
    saturation: float = 30.0
    formats: list = field(default_factory=lambda: ["csv", "svg"])
    workers: int = 1

    def validate(self) -> "RunConfig":
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.scheme not in SCHEME_FLAGS:
            raise ConfigError(f"scheme must be one of {sorted(SCHEME_FLAGS)}")
        if not self.v_step > 0 or not self.v_floor > 0:
            raise ConfigError("v_step and v_floor must be positive")
        if self.saturation <= 0:
            raise ConfigError("saturation must be positive")
        if not (self.branches == "all" or isinstance(self.branches, list)):
            raise ConfigError("branches must be 'all' or a list of branch ids")
        bad = set(self.formats) - {"csv", "svg"}
        if bad:
            raise ConfigError(f"unknown output formats {sorted(bad)}")
        if self.case is not None and not Path(self.case).is_file():
            raise ConfigError(f"case file not found: {self.case}")
        return self

    @property
    def schemes(self) -> tuple[str, ...]:
        return SCHEME_FLAGS[self.scheme]

    def solver_options(self) -> SolverOptions:
        return SolverOptions(tol=self.tol, max_iter=self.max_iter,
                             max_switch_rounds=self.max_switch_rounds)

    def sweep_options(self) -> SweepOptions:
        return SweepOptions(v_start_offset=self.v_start_offset, v_step=self.v_step,
                            v_floor=self.v_floor, refine_bisection_steps=self.refine_bisection_steps)

    def zone_policy(self) -> ZonePolicy:
        return ZonePolicy(kv_floor=self.kv_floor)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def hash(self) -> str:
        """Digest of every result-affecting setting plus the case file contents."""
        d = self.as_dict()
        for key in ("out", "workers", "formats"):
            d.pop(key)
        if self.case:
            d["case"] = hashlib.sha256(Path(self.case).read_bytes()).hexdigest()
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_config(path: Optional[str], overrides: dict) -> RunConfig:
    values: dict = {}
    if path:
        try:
            loaded = yaml.safe_load(Path(path).read_text()) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a mapping")
        values.update(loaded)
    values.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()
