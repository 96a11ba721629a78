"""Run configuration schema (JSON)."""
from __future__ import annotations

import json
from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError
from .library import MODELS, model_config

MODES = ("validate", "solve", "audit", "temporal-study", "spatial-study", "oracle-check")
Mode = Literal["validate", "solve", "audit", "temporal-study", "spatial-study", "oracle-check"]


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class MeshBlock(_Block):
    dim: Literal[1, 2] = 1
    m: int = Field(16, ge=2)


class TimeBlock(_Block):
    T: float = Field(1.0, gt=0)
    N: int = Field(10, ge=1)

    @model_validator(mode="after")
    def _tau_below_one(self):
        if not self.T / self.N < 1.0:
            raise ValueError(f"tau = T/N = {self.T / self.N} must be below 1")
        return self


class SolverBlock(_Block):
    tol: float = Field(1e-10, gt=0)
    max_iters: int = Field(100, ge=1)
    damping: bool = True
    fallback_picard: bool = True


class SamplingBlock(_Block):
    x_samples: int = Field(1000, ge=1)
    xi_samples: int = Field(10_000, ge=2)
    s_samples: int = Field(1000, ge=2)
    s_max: float = Field(100.0, gt=0)
    xi_radius: float = Field(1e3, gt=0)


class AuditBlock(_Block):
    eps: float = Field(0.5, gt=0, lt=1)


class StudyBlock(_Block):
    N_list: List[int] = [8, 16, 32, 64]
    m: int = Field(512, ge=2)
    m_list: List[int] = [8, 16, 32, 64]
    N: int = Field(400, ge=1)


class OracleBlock(_Block):
    instances: int = Field(50, ge=1)
    models: List[str] = list(MODELS)
    grid_resolution: int = Field(11, ge=2)
    tolerance: float = Field(1e-8, gt=0)


class OutputsBlock(_Block):
    dir: str = "out"
    reports: List[str] = ["trajectory", "field", "ledger", "validation", "study", "oracle", "mesh"]


class RunConfig(_Block):
    mode: Mode = "solve"
    problem: dict
    mesh: MeshBlock = MeshBlock()
    time: TimeBlock = TimeBlock()
    solver: SolverBlock = SolverBlock()
    sampling: SamplingBlock = SamplingBlock()
    audit: AuditBlock = AuditBlock()
    study: StudyBlock = StudyBlock()
    oracle: OracleBlock = OracleBlock()
    outputs: OutputsBlock = OutputsBlock()
    seed: int = 0

    def problem_block(self) -> dict:
        """The problem block with a ``model`` shortcut expanded."""
        block = dict(self.problem)
        name = block.pop("model", None)
        if name is None:
            return block
        if name not in MODELS:
            raise ConfigError(f"unknown shipped model {name!r}; choose from {sorted(MODELS)}")
        return model_config(name, **block)


def load_config(path, overrides: Optional[dict] = None) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return parse_config(raw)


def parse_config(raw: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
