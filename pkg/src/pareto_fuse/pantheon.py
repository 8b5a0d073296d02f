"""Fusion head: assembles stop-gradient tower states plus unshared learnable
user/item features, encodes them to one score in (0,1), and trains with a
weighted multi-objective BCE against that shared score."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datagen import Batch, ObjectiveSet
from .errors import ConfigurationError, ContractViolation, NumericError, UsageError
from .nn import (Dense, GradientTape, MLP, ParameterStore, SelfAttention,
                 Tensor, bce_loss, concat, gather_rows, glorot_uniform,
                 optimizer_step, stack, stop_gradient)
from .ranking import OOV_ROW, RankingModel, TaskOutputs

SCORE_EPS = 1e-7

VALID_VARIANTS = {("pxtr", "mlp"), ("hidden_state", "mlp"),
                  ("hidden_state", "transformer")}


@dataclass
class PantheonConfig:
    input_variant: str = "hidden_state"
    encoder_variant: str = "mlp"
    encoder_dims: list = field(default_factory=lambda: [64, 32])
    feature_dim: int = 16  # unshared user/item feature dim, = tower output dim
    learning_rate: float = 3e-3
    optimizer: str = "adam"

    def validate(self):
        if (self.input_variant, self.encoder_variant) not in VALID_VARIANTS:
            raise ConfigurationError(
                f"unsupported variant pair ({self.input_variant!r}, "
                f"{self.encoder_variant!r})")


class WeightVector:
    """Strictly positive per-objective loss weights."""

    def __init__(self, weights: dict, normalized: bool = False):
        for name, w in weights.items():
            if w <= 0.0:
                raise ContractViolation(
                    f"objective weight for {name!r} must be strictly positive")
        self.weights = dict(weights)
        self.normalized = normalized

    @classmethod
    def uniform(cls, objectives: ObjectiveSet) -> "WeightVector":
        n = len(objectives)
        return cls({name: 1.0 / n for name in objectives.names}, normalized=True)

    def __getitem__(self, name: str) -> float:
        return self.weights[name]

    def scaled(self, k: float) -> "WeightVector":
        if k <= 0.0:
            raise ContractViolation("scale factor must be positive")
        return WeightVector({n: k * w for n, w in self.weights.items()})

    def normalize(self) -> "WeightVector":
        total = sum(self.weights.values())
        return WeightVector({n: w / total for n, w in self.weights.items()},
                            normalized=True)

    def adjusted(self, name: str, delta: float) -> "WeightVector":
        if delta <= 0.0:
            raise ContractViolation("weight delta must be positive")
        out = dict(self.weights)
        out[name] = out[name] + delta
        return WeightVector(out).normalize()

    def ratio(self, i: str, j: str) -> float:
        return self.weights[i] / self.weights[j]

    def to_dict(self) -> dict:
        return dict(self.weights)


@dataclass
class FusionInput:
    """Ordered blocks [ItemFea, per-objective block(s), UserFea] plus the
    provenance flag of each block."""
    variant: str
    blocks: list          # list of Tensor, each (B, width)
    provenance: list      # "trainable" | "stop_gradient" per block

    @property
    def flat(self) -> Tensor:
        return concat(self.blocks, axis=1)

    def tokens(self) -> Tensor:
        widths = {b.shape[-1] for b in self.blocks}
        if len(widths) != 1:
            raise UsageError("token view requires equal-width blocks")
        return stack(self.blocks, axis=1)  # (B, T, d)


class PantheonModel:
    def __init__(self, config: PantheonConfig, objectives: ObjectiveSet,
                 n_users: int, n_items: int, seed: int):
        config.validate()
        self.config = config
        self.objectives = objectives
        self.n_users = n_users
        self.n_items = n_items
        self.store = ParameterStore()
        rng = np.random.default_rng(seed)
        d = config.feature_dim
        self.store.add("user_fea", glorot_uniform(rng, n_users + 1, d, (n_users + 1, d)))
        self.store.add("item_fea", glorot_uniform(rng, n_items + 1, d, (n_items + 1, d)))
        if config.encoder_variant == "mlp":
            if config.input_variant == "hidden_state":
                in_dim = (len(objectives) + 2) * d
            else:
                in_dim = 2 * d + len(objectives)
            self.encoder = MLP(self.store, "encoder", in_dim, config.encoder_dims, rng)
            self.head = Dense(self.store, "head", self.encoder.out_dim, 1,
                              "none", rng)
            self.attention = None
        else:
            self.attention = SelfAttention(self.store, "attn", d, rng)
            self.encoder = None
            self.head = Dense(self.store, "head", d, 1, "none", rng)

    def _fea(self, ids: np.ndarray, table: str, vocab: int) -> Tensor:
        rows = np.where((ids >= 0) & (ids < vocab), ids + 1, OOV_ROW)
        return gather_rows(self.store[table], rows)

    def assemble_input(self, task_outputs: TaskOutputs, user_ids: np.ndarray,
                       item_ids: np.ndarray) -> FusionInput:
        """[ItemFea, stop-gradient objective blocks ..., UserFea]."""
        item_fea = self._fea(item_ids, "item_fea", self.n_items)
        user_fea = self._fea(user_ids, "user_fea", self.n_users)
        blocks = [item_fea]
        provenance = ["trainable"]
        if self.config.input_variant == "hidden_state":
            for name in self.objectives.names:
                blocks.append(stop_gradient(task_outputs.hidden[name]))
                provenance.append("stop_gradient")
        else:
            pxtr_cols = [stop_gradient(task_outputs.pxtr[name]).reshape(-1, 1)
                         for name in self.objectives.names]
            blocks.append(concat(pxtr_cols, axis=1))
            provenance.append("stop_gradient")
        blocks.append(user_fea)
        provenance.append("trainable")
        return FusionInput(self.config.input_variant, blocks, provenance)

    def ensemble_encode(self, fusion_input: FusionInput) -> Tensor:
        """Score in (0,1); shape (B,)."""
        if fusion_input.variant != self.config.input_variant:
            raise UsageError(
                f"input assembled for variant {fusion_input.variant!r}, "
                f"encoder configured for {self.config.input_variant!r}")
        if self.config.encoder_variant == "mlp":
            h = self.encoder(fusion_input.flat)
        else:
            tokens = self.attention(fusion_input.tokens())
            h = tokens.mean(axis=1)
        logits = self.head(h).reshape(-1)
        return logits.sigmoid().clip(SCORE_EPS, 1.0 - SCORE_EPS)

    def score(self, ranking: RankingModel, batch: Batch, chunk: int = 2048) -> np.ndarray:
        parts = []
        for lo in range(0, len(batch), chunk):
            sub = batch.slice(lo, lo + chunk)
            task_outputs = ranking.forward(sub)
            fi = self.assemble_input(task_outputs, sub.user_ids, sub.item_ids)
            parts.append(self.ensemble_encode(fi).data.copy())
        return np.concatenate(parts)

    def train_step(self, ranking: RankingModel, batch: Batch,
                   weights: WeightVector, method: str | None = None) -> float:
        """One optimizer step on Pantheon parameters only; the ranking model is
        isolated behind stop-gradient and is not updated here."""
        task_outputs = ranking.forward(batch)
        fi = self.assemble_input(task_outputs, batch.user_ids, batch.item_ids)
        score = self.ensemble_encode(fi)
        total, _ = pantheon_loss(score, batch.labels, weights, self.objectives)
        if not np.isfinite(total.item()):
            raise NumericError(
                f"non-finite fusion loss at batch ordinal {int(batch.ordinals[0])}")
        tape = GradientTape(self.store)
        tape.record(total)
        optimizer_step(self.store, tape, self.config.learning_rate,
                       method or self.config.optimizer)
        return total.item()


def pantheon_loss(score, labels, weights: WeightVector,
                  objectives: ObjectiveSet):
    """Weighted sum over objectives of BCE(score, y^xtr), every term against
    the single shared score.  Returns (total, per-objective dict)."""
    score_t = score if isinstance(score, Tensor) else Tensor(score)
    labels = np.atleast_2d(np.asarray(labels, dtype=np.float64))
    per_obj = {}
    total = None
    for i, name in enumerate(objectives.names):
        w = weights[name]  # raises on missing; WeightVector enforces positivity
        term = bce_loss(score_t, labels[:, i])
        per_obj[name] = term.item()
        weighted = w * term
        total = weighted if total is None else total + weighted
    return total, per_obj
