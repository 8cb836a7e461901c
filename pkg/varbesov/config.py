"""
Configuration models for varbesov experiments.

Experiment configs are YAML or JSON files (``"schema": 1``) validated by the
pydantic models below. Exponent fields accept numbers, ``.inf`` or ``"inf"``.
"""

import math
import os
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Union

import yaml
from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
)

from .core.error_handling import ConfigError

SCHEMA_VERSION = 1
THREADS_ENV = "VARBESOV_THREADS"

CORPUS_FAMILIES = ("bumps", "modulated_bumps", "piecewise_polys", "random_splines")
WEIGHT_KINDS = ("two_ks", "power_times_2ks", "averaged_power", "custom_grid")


def _parse_exponent(value):
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "+inf", "infinity", ".inf"):
            return math.inf
        return float(text)
    return value


Exponent = Annotated[float, BeforeValidator(_parse_exponent)]


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class NormParams(_Model):
    """Exponents and truncation governing every quasi-norm evaluation."""

    p: Exponent = 2.0
    q: Exponent = 2.0
    r: Exponent = 1.0
    l: int = Field(default=2, ge=1)
    K: int = Field(default=4, ge=0)
    tol: float = Field(default=1e-10, gt=0)
    h_nodes: Optional[int] = Field(default=None, ge=1)
    compact_support: bool = False

    @field_validator("p", "q", "r")
    @classmethod
    def _positive(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("exponents must be positive")
        return v


class MollifierConfig(_Model):
    M: int = Field(default=2, ge=0)
    support_radius: float = Field(default=0.5, gt=0)


class CorpusConfig(_Model):
    seed: int = 0
    dim: int = Field(default=1, ge=1, le=3)
    count: int = Field(default=10, ge=1)
    families: List[str] = Field(default_factory=lambda: ["bumps"])
    box_radius: float = Field(default=2.0, gt=0)
    level: int = Field(default=10, ge=1)
    spline_degree: int = Field(default=2, ge=1)
    spline_level: int = Field(default=2, ge=0)

    @field_validator("families")
    @classmethod
    def _known_families(cls, v: List[str]) -> List[str]:
        unknown = sorted(set(v) - set(CORPUS_FAMILIES))
        if unknown or not v:
            raise ValueError(f"unknown corpus families {unknown}; use {CORPUS_FAMILIES}")
        return v


class WeightGenerator(_Model):
    """Recipe that regenerates a weight sequence at any grid level."""

    kind: str = "two_ks"
    s: float = 0.0
    beta: float = 0.0
    center: float = 0.0
    p: Exponent = 2.0
    r: Optional[Exponent] = None
    sigma1: Optional[Exponent] = None
    sigma2: Optional[Exponent] = None
    dim: int = Field(default=1, ge=1, le=3)
    box_radius: float = Field(default=2.0, gt=0)
    level: int = Field(default=10, ge=1)
    K: int = Field(default=4, ge=0)
    paths: List[str] = Field(default_factory=list)
    bar: bool = False

    @field_validator("kind")
    @classmethod
    def _known_kind(cls, v: str) -> str:
        if v not in WEIGHT_KINDS:
            raise ValueError(f"unknown weight kind {v!r}; use {WEIGHT_KINDS}")
        return v


class WeightManifest(_Model):
    """JSON manifest of a weight sequence: metadata plus CSV levels or a generator."""

    schema_: int = Field(default=SCHEMA_VERSION, alias="schema")
    p: Exponent
    sigma1: Exponent
    sigma2: Exponent
    alpha1: List[float]
    alpha2: List[float]
    alpha3: float = Field(ge=0)
    levels: List[str] = Field(default_factory=list)
    generator: Optional[WeightGenerator] = None

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)


class NormSpec(_Model):
    kind: Literal["conv", "diff", "spline", "fourier", "avgdiff"]
    label: Optional[str] = None
    mollifier: Optional[MollifierConfig] = None
    l: Optional[int] = Field(default=None, ge=1)
    r: Optional[Exponent] = None
    bar: bool = False

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        base = self.kind
        if self.kind == "conv" and self.mollifier is not None:
            base = f"conv_M{self.mollifier.M}"
        return f"{base}_bar" if self.bar else base


class ExperimentConfig(_Model):
    schema_: Literal[1] = Field(alias="schema")
    corpus: CorpusConfig = Field(default_factory=CorpusConfig)
    weights: WeightGenerator = Field(default_factory=WeightGenerator)
    norms: List[NormSpec] = Field(default_factory=lambda: [NormSpec(kind="conv")])
    params: NormParams = Field(default_factory=NormParams)
    mollifier: MollifierConfig = Field(default_factory=MollifierConfig)
    mu: Optional[float] = None
    A: Optional[float] = None
    theta: Optional[float] = None
    pass_drift: float = Field(default=0.15, gt=0)
    refine: bool = True
    force: bool = False

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read a YAML or JSON experiment config."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict) or "schema" not in raw:
        raise ConfigError(f"{path}: config must be a mapping with a 'schema' key")
    if raw["schema"] != SCHEMA_VERSION:
        raise ConfigError(f"{path}: unsupported schema {raw['schema']!r}")
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def thread_count() -> int:
    """Worker count for parallel maps, from VARBESOV_THREADS (default 1)."""
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}")
