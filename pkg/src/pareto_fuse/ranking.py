"""Multi-task ranking model: shared ID embeddings, MMoE trunk, per-objective
towers and sigmoid prediction heads."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datagen import Batch, ObjectiveSet
from .errors import ConfigurationError, NumericError
from .nn import (Dense, GradientTape, MLP, ParameterStore, Tensor, bce_loss,
                 concat, gather_rows, glorot_uniform, optimizer_step)

OOV_ROW = 0  # reserved embedding row for out-of-vocabulary ids


@dataclass
class RankingConfig:
    n_experts: int = 4
    expert_hidden_dims: list = field(default_factory=lambda: [32])
    tower_hidden_dims: list = field(default_factory=lambda: [32, 16])
    embedding_dim: int = 8
    learning_rate: float = 1e-3
    optimizer: str = "adam"

    @property
    def tower_output_dim(self) -> int:
        return self.tower_hidden_dims[-1]

    def validate(self):
        if self.n_experts < 1:
            raise ConfigurationError("n_experts must be >= 1")
        for dims in (self.expert_hidden_dims, self.tower_hidden_dims):
            if not dims or any(d < 1 for d in dims):
                raise ConfigurationError("hidden dims must be >= 1")
        if self.embedding_dim < 1:
            raise ConfigurationError("embedding_dim must be >= 1")


@dataclass
class TaskOutputs:
    """Per-objective tower hidden states and predicted probabilities.

    Values are batched: hidden[name] is (B, d), pxtr[name] is (B,).
    """
    hidden: dict
    pxtr: dict


class RankingModel:
    def __init__(self, config: RankingConfig, objectives: ObjectiveSet,
                 n_users: int, n_items: int, n_features: int, seed: int):
        config.validate()
        self.config = config
        self.objectives = objectives
        self.n_users = n_users
        self.n_items = n_items
        self.n_features = n_features
        self.store = ParameterStore()
        rng = np.random.default_rng(seed)
        e = config.embedding_dim
        self.store.add("user_emb", glorot_uniform(rng, n_users + 1, e, (n_users + 1, e)))
        self.store.add("item_emb", glorot_uniform(rng, n_items + 1, e, (n_items + 1, e)))
        in_dim = 2 * e + n_features
        self.experts = [
            MLP(self.store, f"expert.{j}", in_dim, config.expert_hidden_dims, rng)
            for j in range(config.n_experts)
        ]
        expert_dim = config.expert_hidden_dims[-1]
        self.gates = {
            name: Dense(self.store, f"gate.{name}", in_dim, config.n_experts,
                        "none", rng)
            for name in objectives.names
        }
        self.towers = {
            name: MLP(self.store, f"tower.{name}", expert_dim,
                      config.tower_hidden_dims, rng)
            for name in objectives.names
        }
        self.heads = {
            name: Dense(self.store, f"head.{name}", config.tower_output_dim, 1,
                        "sigmoid", rng)
            for name in objectives.names
        }

    def _embed_ids(self, ids: np.ndarray, table_name: str, vocab: int) -> Tensor:
        rows = np.where((ids >= 0) & (ids < vocab), ids + 1, OOV_ROW)
        return gather_rows(self.store[table_name], rows)

    def build_input(self, batch: Batch) -> Tensor:
        """v = [user embedding, item embedding, dense features], shape (B, F)."""
        if batch.features.shape[1] != self.n_features:
            raise ConfigurationError(
                f"expected {self.n_features} dense features, got {batch.features.shape[1]}")
        return concat([
            self._embed_ids(batch.user_ids, "user_emb", self.n_users),
            self._embed_ids(batch.item_ids, "item_emb", self.n_items),
            Tensor(batch.features),
        ], axis=1)

    def moe_forward(self, v: Tensor) -> dict:
        """Per-objective softmax-gated mixture over the shared experts."""
        expert_out = [expert(v) for expert in self.experts]
        mixtures = {}
        for name in self.objectives.names:
            gate = self.gates[name](v).softmax(axis=-1)  # (B, n_experts)
            mix = None
            for j, eo in enumerate(expert_out):
                term = gate_slice(gate, j) * eo
                mix = term if mix is None else mix + term
            mixtures[name] = mix
        return mixtures

    def forward(self, batch: Batch) -> TaskOutputs:
        v = self.build_input(batch)
        mixtures = self.moe_forward(v)
        hidden, pxtr = {}, {}
        for name in self.objectives.names:
            t = self.towers[name](mixtures[name])
            hidden[name] = t
            pxtr[name] = self.heads[name](t).reshape(-1)
        return TaskOutputs(hidden=hidden, pxtr=pxtr)

    def predict(self, batch: Batch, chunk: int = 2048) -> dict:
        """Inference-only pxtrs over an arbitrarily large window."""
        out = {name: [] for name in self.objectives.names}
        for lo in range(0, len(batch), chunk):
            t = self.forward(batch.slice(lo, lo + chunk))
            for name in self.objectives.names:
                out[name].append(t.pxtr[name].data.copy())
        return {name: np.concatenate(parts) for name, parts in out.items()}

    def train_step(self, batch: Batch) -> dict:
        """One optimizer step on the unweighted sum of per-objective mean BCE."""
        outputs = self.forward(batch)
        per_obj = {}
        total = None
        for i, name in enumerate(self.objectives.names):
            term = bce_loss(outputs.pxtr[name], batch.labels[:, i])
            per_obj[name] = term.item()
            total = term if total is None else total + term
        if not np.isfinite(total.item()):
            raise NumericError(
                f"non-finite ranking loss at batch ordinal {int(batch.ordinals[0])}")
        tape = GradientTape(self.store)
        tape.record(total)
        optimizer_step(self.store, tape, self.config.learning_rate,
                       self.config.optimizer)
        return per_obj


def gate_slice(gate: Tensor, j: int) -> Tensor:
    """Column j of the gate as a (B, 1) tensor (keeps broadcasting explicit)."""
    out = Tensor(gate.data[..., j:j + 1], _prev=(gate,))

    def backward(g):
        if gate.requires_grad:
            full = np.zeros_like(gate.data)
            full[..., j:j + 1] = g
            gate._accumulate(full)

    out._backward = backward
    return out
