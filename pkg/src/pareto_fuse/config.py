"""Experiment config file: one JSON document fully determines every output."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .datagen import DEFAULT_TARGET_RATES, ObjectiveSet
from .errors import ConfigurationError
from .formula import EvalMetricSpec, FusionFormula
from .ippo import IppoConfig
from .pantheon import PantheonConfig
from .ranking import RankingConfig

SCHEMA_VERSION = 1


@dataclass
class DatagenConfig:
    n_users: int = 2000
    n_items: int = 1000
    latent_dim: int = 8
    n_train: int = 50000
    n_valid: int = 10000
    n_eval: int = 10000
    # Engagement objectives share most of their taste signal; the sparse
    # follow/like objectives are more idiosyncratic.
    objective_correlation: dict | float = field(
        default_factory=lambda: {"wtr": 0.5, "ltr": 0.5, "lvtr": 0.9,
                                 "ctr": 0.9, "evtr": 0.9, "inlvtr": 0.9,
                                 "inevtr": 0.9})
    target_rates: dict = field(default_factory=lambda: dict(DEFAULT_TARGET_RATES))

    @property
    def n_features(self) -> int:
        return 3 * self.latent_dim


@dataclass
class ExperimentConfig:
    seed: int = 7
    output_dir: str = "runs/default"
    datagen: DatagenConfig = field(default_factory=DatagenConfig)
    ranking: RankingConfig = field(default_factory=RankingConfig)
    ranking_pretrain_steps: int = 6000
    batch_size: int = 32
    pantheon: PantheonConfig = field(default_factory=PantheonConfig)
    # Warm-start loss weights mirror the offline metric's emphasis, with extra
    # mass on the effective-view objective whose BCE term is otherwise
    # dominated by the denser click/long-view terms.
    ippo: IppoConfig = field(default_factory=lambda: IppoConfig(
        initial_weights={"wtr": 1.0, "ltr": 1.0, "lvtr": 5.0, "ctr": 3.0,
                         "evtr": 3.0, "inlvtr": 1.0, "inevtr": 1.0}))
    formula: FusionFormula = field(default_factory=FusionFormula.default)
    formula_budget: int = 512
    metric_weights: dict | None = None
    objectives: ObjectiveSet = field(default_factory=ObjectiveSet)

    # Derived sub-seeds; offsets are part of the artifact contract.
    @property
    def universe_seed(self): return self.seed
    @property
    def train_seed(self): return self.seed + 1
    @property
    def valid_seed(self): return self.seed + 2
    @property
    def eval_seed(self): return self.seed + 3
    @property
    def ranking_seed(self): return self.seed + 4
    @property
    def pantheon_seed(self): return self.seed + 5
    @property
    def search_seed(self): return self.seed + 6

    def metric_spec(self) -> EvalMetricSpec:
        if self.metric_weights:
            return EvalMetricSpec(dict(self.metric_weights))
        return EvalMetricSpec.default(self.objectives)

    def validate(self):
        self.ranking.validate()
        self.pantheon.validate()
        if self.pantheon.feature_dim != self.ranking.tower_output_dim:
            raise ConfigurationError(
                "pantheon.feature_dim must equal the ranking tower output dim "
                f"({self.pantheon.feature_dim} vs {self.ranking.tower_output_dim})")
        self.formula.validate(self.objectives)
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")

    def out_path(self, name: str) -> Path:
        return Path(self.output_dir) / name


def _take(section: dict, cls, **renames):
    try:
        return cls(**section)
    except TypeError as exc:
        raise ConfigurationError(f"bad config section for {cls.__name__}: {exc}")


def load_config(path, seed_override: int | None = None,
                out_override: str | None = None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file is not valid JSON: {exc}")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ConfigurationError(
            f"unsupported schema_version {doc.get('schema_version')!r}")

    cfg = ExperimentConfig()
    cfg.seed = int(doc.get("seed", cfg.seed))
    cfg.output_dir = doc.get("output_dir", cfg.output_dir)
    if "datagen" in doc:
        cfg.datagen = _take(doc["datagen"], DatagenConfig)
    if "ranking" in doc:
        section = dict(doc["ranking"])
        cfg.ranking_pretrain_steps = int(section.pop("pretrain_steps",
                                                     cfg.ranking_pretrain_steps))
        cfg.ranking = _take(section, RankingConfig)
    cfg.batch_size = int(doc.get("batch_size", cfg.batch_size))
    if "pantheon" in doc:
        cfg.pantheon = _take(doc["pantheon"], PantheonConfig)
    if "ippo" in doc:
        cfg.ippo = _take(doc["ippo"], IppoConfig)
    if "formula" in doc:
        section = dict(doc["formula"])
        cfg.formula_budget = int(section.pop("budget", cfg.formula_budget))
        cfg.metric_weights = section.pop("metric_weights", None)
        try:
            cfg.formula = FusionFormula(
                multiplicative=[tuple(t) for t in section["multiplicative"]],
                additive=[tuple(t) for t in section["additive"]],
                bounds={k: tuple(v) for k, v in section["bounds"].items()})
        except KeyError as exc:
            raise ConfigurationError(f"formula section missing key {exc}")
    if seed_override is not None:
        cfg.seed = seed_override
    if out_override is not None:
        cfg.output_dir = out_override
    cfg.validate()
    return cfg
