"""Experiment configuration loader.

Loads experiment JSON configuration files from disk and validates them into
an ExperimentConfig. Each experiment has a directory under
experiments/<experiment_id>/config.json; relative data paths inside a config
are resolved against that directory.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticError, model_validator

from graphreg.errors import ValidationError
from graphreg.evaluation import CvConfig, NoiseSpec
from graphreg.harness.datasets import PairingSpec, SyntheticSpec


class ExperimentConfigError(ValidationError):
    """Raised when an experiment configuration cannot be loaded or is invalid."""


_REQUIRED_SECTIONS = ("dataset", "features", "expansion", "noise", "cv", "output")

# Default base path: <project_root>/experiments/
_DEFAULT_BASE_PATH = str(
    Path(__file__).resolve().parent.parent / "experiments"
)

_PATH_FIELDS = ("signals", "coords", "adjacency")


class DatasetSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    source: Literal["csv", "synthetic"]
    signals: str | None = None
    coords: str | None = None
    adjacency: str | None = None
    synthetic: SyntheticSpec = Field(default_factory=SyntheticSpec)
    pairing: PairingSpec = Field(default_factory=PairingSpec)
    train_count: int | None = Field(default=None, ge=1)
    test_count: int | None = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _csv_needs_files(self):
        if self.source == "csv":
            if self.signals is None:
                raise ValueError("csv dataset needs a signals file")
            if self.coords is None and self.adjacency is None:
                raise ValueError("csv dataset needs a coords or adjacency file")
        return self


class FeatureSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["identity", "random-sigmoid"] = "identity"
    K: int | None = Field(default=None, ge=1)
    k_multiplier: float | None = Field(default=None, gt=0)
    seed: int = 0

    def resolve_K(self, input_dim: int) -> int:
        if self.kind == "identity":
            return input_dim
        if self.K is not None:
            return self.K
        return max(1, round((self.k_multiplier or 2.0) * input_dim))


class ExpansionSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    m0: int = Field(default=5, ge=1)
    m_max: int | None = Field(default=None, ge=1)
    order: list[int] | None = None
    neighbors: int | None = Field(default=None, ge=0)
    verify: bool = False

    @model_validator(mode="after")
    def _sizes(self):
        if self.m_max is not None and self.m_max < self.m0:
            raise ValueError(f"m_max ({self.m_max}) is below m0 ({self.m0})")
        if self.order is not None and sorted(self.order) != list(range(len(self.order))):
            raise ValueError("order must be a permutation of 0..M-1")
        return self


class CvSpec(CvConfig):
    select_at: Literal["initial", "full"] = "initial"
    retune_per_size: bool = False


class PinnedHyperparameters(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(gt=0)
    beta: float = Field(ge=0)
    lr_alpha: float | None = Field(default=None, gt=0)


class OutputSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    path: str
    aggregate: bool = True


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    dataset: DatasetSpec
    features: FeatureSpec
    expansion: ExpansionSpec
    noise: NoiseSpec
    cv: CvSpec
    output: OutputSpec
    pinned: PinnedHyperparameters | None = None
    n_sweep: list[int] | None = None
    trials: int = Field(default=1, ge=1)
    seed: int = 0
    record_wall_time: bool = False

    @model_validator(mode="after")
    def _sweep(self):
        if self.n_sweep is not None:
            if not self.n_sweep:
                raise ValueError("n_sweep must not be empty")
            if any(n < 1 for n in self.n_sweep):
                raise ValueError("n_sweep values must be positive")
            cross_validated = self.pinned is None or self.cv.retune_per_size
            if cross_validated and min(self.n_sweep) < self.cv.folds:
                raise ValueError(
                    f"n_sweep value {min(self.n_sweep)} is below the {self.cv.folds} CV folds"
                )
        return self


def _resolve_paths(config: dict, base_dir: str) -> dict:
    dataset = dict(config.get("dataset") or {})
    for key in _PATH_FIELDS:
        value = dataset.get(key)
        if value and not os.path.isabs(value):
            dataset[key] = os.path.normpath(os.path.join(base_dir, value))
    output = dict(config.get("output") or {})
    if output.get("path") and not os.path.isabs(output["path"]):
        output["path"] = os.path.normpath(os.path.join(base_dir, output["path"]))
    return {**config, "dataset": dataset, "output": output}


def load_experiment_config(
    experiment: str,
    base_path: str | None = None,
) -> ExperimentConfig:
    """Load an experiment configuration from a JSON file.

    Args:
        experiment: Path to a config JSON file, or a directory name under
                    the experiments folder (e.g. "temperature_synthetic").
        base_path: Root directory containing experiment folders.
                   Defaults to <project_root>/experiments/.

    Returns:
        Validated ExperimentConfig with data paths made absolute.

    Raises:
        ExperimentConfigError: If the config file is missing, invalid, or
                               lacks required sections.
    """
    if base_path is None:
        base_path = _DEFAULT_BASE_PATH

    if os.path.isfile(experiment):
        config_path = experiment
    else:
        config_path = os.path.join(base_path, experiment, "config.json")

    if not os.path.isfile(config_path):
        raise ExperimentConfigError(
            f"Experiment configuration not found: {config_path}"
        )

    try:
        with open(config_path, "r") as f:
            config = json.load(f)
    except json.JSONDecodeError as e:
        raise ExperimentConfigError(
            f"Experiment configuration has invalid JSON: {config_path}: {e}"
        ) from e

    # Validate required sections
    for section in _REQUIRED_SECTIONS:
        if section not in config:
            raise ExperimentConfigError(
                f"Experiment configuration missing required section '{section}': "
                f"{config_path}"
            )

    config = _resolve_paths(config, os.path.dirname(os.path.abspath(config_path)))
    try:
        return ExperimentConfig.model_validate(config)
    except PydanticError as e:
        raise ExperimentConfigError(
            f"Experiment configuration is invalid: {config_path}: {e}"
        ) from e
