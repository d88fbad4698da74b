"""Run configuration: schema, file loading, environment and flag overrides.

Precedence, lowest first: built-in defaults, the config file (YAML or JSON),
``MMGZSL_*`` environment variables, command-line flags. Nested fields are
addressed with a double underscore, e.g. ``MMGZSL_SYNTH__LEARNING_RATE=1e-3``.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .dataio import SplitSpec, SyntheticSpec
from .errors import ConfigError
from .evaluate import ABLATIONS, ClassifierConfig, EvalConfig, ExperimentConfig
from .synth import CpcConfig, SynthTrainConfig
from .transform import CycleTrainConfig

ENV_PREFIX = "MMGZSL_"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class DataSection(_Strict):
    num_classes: int = Field(5, ge=2)
    dim: int = Field(32, ge=2)
    dp_dim: int | None = Field(None, ge=1)
    samples_per_class: int = Field(200, ge=1)
    class_axis_separation: float = Field(4.0, gt=0)
    within_class_stddev: float = Field(1.0, ge=0)
    stddev_slope: float = Field(0.0, ge=0)
    map_noise_stddev: float = Field(0.0, ge=0)
    seed: int = 0

    def to_spec(self) -> SyntheticSpec:
        return SyntheticSpec(**self.model_dump())


class SplitSection(_Strict):
    seen_classes: list[int] = [1, 3, 5]
    unseen_classes: list[int] = [2, 4]
    train_fraction: float = Field(0.8, gt=0, lt=1)

    @model_validator(mode="after")
    def _disjoint(self):
        overlap = set(self.seen_classes) & set(self.unseen_classes)
        if overlap:
            raise ValueError(f"seen and unseen classes overlap: {sorted(overlap)}")
        if not self.seen_classes:
            raise ValueError("at least one seen class is required")
        return self

    def to_spec(self, seed: int = 0) -> SplitSpec:
        return SplitSpec(list(self.seen_classes), list(self.unseen_classes),
                         self.train_fraction, seed)


class CycleSection(_Strict):
    epochs: int = Field(40, ge=0)
    batch_size: int = Field(64, ge=1)
    learning_rate: float = Field(1e-3, gt=0)
    discriminator_learning_rate: float | None = Field(None, gt=0)
    cycle_weight: float = Field(10.0, ge=0)
    generator_hidden: int = Field(64, ge=1)
    discriminator_hidden: int = Field(64, ge=1)
    generator_objective: Literal["minimax", "non_saturating"] = "non_saturating"
    init_stddev: float = Field(0.01, gt=0)
    restarts: int = Field(1, ge=1)

    def to_config(self, seed: int = 0) -> CycleTrainConfig:
        return CycleTrainConfig(seed=seed, **self.model_dump())


class CpcSection(_Strict):
    temperature: float = Field(1.0, gt=0)
    augment_noise_stddev: float = Field(0.1, ge=0)
    augment_dropout_prob: float = Field(0.1, ge=0, lt=1)
    negatives_per_anchor: int = Field(8, ge=1)


class SynthSection(_Strict):
    lambda_c: float = Field(0.1, ge=0)
    lambda_reg: float = Field(0.1, ge=0)
    lambda_E: float = Field(0.1, ge=0)
    lambda_cpc: float = Field(0.2, ge=0)
    lambda_R: float = Field(0.1, ge=0)
    pretrain_epochs: int = Field(300, ge=0)
    joint_epochs: int = Field(100, ge=0)
    batch_size: int = Field(16, ge=1)
    learning_rate: float = Field(1e-3, gt=0)
    latent_dim: int = Field(32, ge=1)
    encoder_hidden: list[int] = [256, 128]
    generator_hidden: list[int] = [128]
    regressor_hidden: list[int] = [128]
    init_stddev: float = Field(0.01, gt=0)
    class_prior: list[int] | None = None
    cpc: CpcSection = CpcSection()

    @field_validator("encoder_hidden", "generator_hidden", "regressor_hidden")
    @classmethod
    def _positive(cls, v):
        if any(h <= 0 for h in v):
            raise ValueError("hidden layer sizes must be positive")
        return v

    def to_config(self, seed: int = 0) -> SynthTrainConfig:
        data = self.model_dump()
        data["cpc"] = CpcConfig(**data["cpc"])
        return SynthTrainConfig(seed=seed, **data)


class ClassifierSection(_Strict):
    epochs: int = Field(100, ge=0)
    batch_size: int = Field(64, ge=1)
    learning_rate: float = Field(1e-2, gt=0)
    hidden: list[int] = []
    init_stddev: float = Field(0.01, gt=0)


class EvalSection(_Strict):
    synth_per_class: int = Field(200, ge=1)
    decoder_stddev: float = Field(1.0, ge=0)
    classifier: ClassifierSection = ClassifierSection()
    seeds: int = Field(5, ge=1)
    base_seed: int = 0
    ablations: list[str] = list(ABLATIONS)
    setting: Literal["A", "B", "both"] = "both"

    @field_validator("ablations")
    @classmethod
    def _known(cls, v):
        unknown = [t for t in v if t not in ABLATIONS]
        if unknown:
            raise ValueError(f"unknown ablation tags {unknown}; choose from {list(ABLATIONS)}")
        return v


class RunConfig(_Strict):
    data: DataSection = DataSection()
    split: SplitSection = SplitSection()
    cycle: CycleSection = CycleSection()
    synth: SynthSection = SynthSection()
    eval: EvalSection = EvalSection()
    out: str = "runs/default"
    ablation: str = "full"

    @field_validator("ablation")
    @classmethod
    def _ablation(cls, v):
        if v not in ABLATIONS:
            raise ValueError(f"unknown ablation {v!r}; choose from {list(ABLATIONS)}")
        return v

    @model_validator(mode="after")
    def _classes_in_range(self):
        declared = set(self.split.seen_classes) | set(self.split.unseen_classes)
        expected = set(range(1, self.data.num_classes + 1))
        if declared != expected:
            raise ValueError(f"split must cover classes 1..{self.data.num_classes} exactly, "
                             f"got {sorted(declared)}")
        return self

    def experiment(self) -> ExperimentConfig:
        """Dataclass configs for the pipeline; per-run seeds are set by the driver."""
        ev = self.eval
        return ExperimentConfig(
            split=self.split.to_spec(),
            cycle=self.cycle.to_config(),
            synth=self.synth.to_config(),
            eval=EvalConfig(ev.synth_per_class, ev.decoder_stddev,
                            ClassifierConfig(**ev.classifier.model_dump()),
                            ev.seeds, ev.base_seed))

    def seeds(self) -> list[int]:
        return [self.eval.base_seed + i for i in range(self.eval.seeds)]


def _format_error(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        where = ".".join(str(p) for p in err["loc"]) or "<root>"
        parts.append(f"{where}: {err['msg']}")
    return "invalid configuration: " + "; ".join(parts)


def _set_path(doc: dict, path: list[str], value):
    node = doc
    for key in path[:-1]:
        child = node.get(key)
        if not isinstance(child, dict):
            child = node[key] = {}
        node = child
    node[path[-1]] = value


def env_overrides(environ=None, prefix: str = ENV_PREFIX) -> dict:
    """Nested override document from ``PREFIX_SECTION__FIELD=value`` variables.

    Values are parsed as YAML scalars/lists, so ``1e-3``, ``true`` and
    ``[1, 3, 5]`` arrive typed.
    """
    environ = os.environ if environ is None else environ
    doc: dict = {}
    for name in sorted(environ):
        if not name.startswith(prefix):
            continue
        path = [p.lower() for p in name[len(prefix):].split("__") if p]
        if not path:
            continue
        # field names such as lambda_E keep their case in the schema
        path = [_schema_case(p) for p in path]
        _set_path(doc, path, _parse_value(environ[name]))
    return doc


def _parse_value(text: str):
    value = yaml.safe_load(text)
    if isinstance(value, str):
        # YAML 1.1 reads exponent forms without a dot (``1e-3``) as strings
        try:
            return float(value)
        except ValueError:
            return value
    return value


_CASED = {"lambda_e": "lambda_E", "lambda_r": "lambda_R"}


def _schema_case(key: str) -> str:
    return _CASED.get(key, key)


def merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = value
    return out


def read_document(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    try:
        doc = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path} must hold a mapping at the top level")
    return doc


def load_config(path: str | Path | None = None, overrides: dict | None = None,
                environ=None) -> RunConfig:
    doc = read_document(path) if path is not None else {}
    doc = merge(doc, env_overrides(environ))
    doc = merge(doc, overrides or {})
    try:
        return RunConfig.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(_format_error(exc)) from None


def dump_config(config: RunConfig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(config.model_dump(), indent=2, sort_keys=True) + "\n")
    return path
