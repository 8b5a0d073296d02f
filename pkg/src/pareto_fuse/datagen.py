"""Seeded synthetic multi-objective interaction stream.

Labels follow a funnel: in-room objectives are gated on click, and long-view
positives are a subset of effective-view positives.  Per-objective biases are
calibrated at generation time so empirical positive rates land near the
configured targets, with densities spread over at least a 5x range.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ContractViolation

DEFAULT_OBJECTIVES = ["wtr", "ltr", "lvtr", "ctr", "evtr", "inlvtr", "inevtr"]
DEFAULT_FUNNEL_EDGES = [
    ("ctr", "inevtr"),
    ("ctr", "inlvtr"),
    ("inevtr", "inlvtr"),
    ("evtr", "lvtr"),
]
# Marginal positive-rate targets; prerequisites must stay above dependents.
DEFAULT_TARGET_RATES = {
    "wtr": 0.03, "ltr": 0.06, "lvtr": 0.10, "ctr": 0.30,
    "evtr": 0.22, "inlvtr": 0.07, "inevtr": 0.13,
}


@dataclass(frozen=True)
class ObjectiveSet:
    names: tuple = tuple(DEFAULT_OBJECTIVES)
    funnel_edges: tuple = tuple(DEFAULT_FUNNEL_EDGES)

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ConfigurationError("objective names must be unique")
        for pre, dep in self.funnel_edges:
            if pre not in self.names or dep not in self.names:
                raise ConfigurationError(f"funnel edge ({pre}, {dep}) names unknown objective")
        self._toposort()  # raises on cycles

    def _toposort(self) -> list[str]:
        incoming = {n: set() for n in self.names}
        for pre, dep in self.funnel_edges:
            incoming[dep].add(pre)
        order, ready = [], [n for n in self.names if not incoming[n]]
        remaining = dict(incoming)
        while ready:
            n = ready.pop(0)
            order.append(n)
            for dep, pres in remaining.items():
                if n in pres:
                    pres.discard(n)
                    if not pres and dep not in order and dep not in ready:
                        ready.append(dep)
        if len(order) != len(self.names):
            raise ConfigurationError("funnel edges contain a cycle")
        return order

    def prerequisites(self, name: str) -> list[str]:
        return [pre for pre, dep in self.funnel_edges if dep == name]

    def index(self, name: str) -> int:
        return self.names.index(name)

    def __len__(self):
        return len(self.names)


@dataclass
class UserProfile:
    user_id: int
    latent: np.ndarray
    activity: float


@dataclass
class ItemProfile:
    item_id: int
    latent: np.ndarray
    popularity_bias: float


@dataclass
class ImpressionLog:
    user_id: int
    item_id: int
    dense_features: np.ndarray
    labels: dict
    ordinal: int


@dataclass
class Universe:
    objectives: ObjectiveSet
    users: list = field(default_factory=list)
    items: list = field(default_factory=list)
    affinity: dict = field(default_factory=dict)   # objective -> (k, k) matrix
    bias: dict = field(default_factory=dict)       # objective -> scalar
    target_rates: dict = field(default_factory=dict)
    latent_dim: int = 8

    @property
    def n_users(self):
        return len(self.users)

    @property
    def n_items(self):
        return len(self.items)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _ancestors(objectives: ObjectiveSet, name: str) -> set:
    """All objectives whose positive label gates this one, transitively."""
    out: set = set()
    frontier = list(objectives.prerequisites(name))
    while frontier:
        pre = frontier.pop()
        if pre not in out:
            out.add(pre)
            frontier.extend(objectives.prerequisites(pre))
    return out


def generate_universe(seed: int, n_users: int, n_items: int, latent_dim: int = 8,
                      objectives: ObjectiveSet | None = None,
                      target_rates: dict | None = None,
                      objective_correlation: float = 0.7) -> Universe:
    if n_users < 1 or n_items < 1 or latent_dim < 1:
        raise ConfigurationError("counts and latent_dim must be >= 1")
    objectives = objectives or ObjectiveSet()
    if isinstance(objective_correlation, dict):
        correlations = {n: float(objective_correlation.get(n, 0.0))
                        for n in objectives.names}
    else:
        correlations = {n: float(objective_correlation)
                        for n in objectives.names}
    for rho in correlations.values():
        if not 0.0 <= rho < 1.0:
            raise ConfigurationError("objective_correlation must be in [0, 1)")
    targets = dict(target_rates or DEFAULT_TARGET_RATES)
    rng = np.random.default_rng(seed)

    users = [UserProfile(u, rng.standard_normal(latent_dim),
                         float(rng.lognormal(0.0, 1.0)))
             for u in range(n_users)]
    items = [ItemProfile(i, rng.standard_normal(latent_dim),
                         float(rng.normal(0.0, 0.5)))
             for i in range(n_items)]

    uni = Universe(objectives=objectives, users=users, items=items,
                   target_rates=targets, latent_dim=latent_dim)
    # Calibrate per-objective bias so mean sigmoid hits the conditional target.
    m = 20000
    cu = rng.integers(0, n_users, size=m)
    ci = rng.integers(0, n_items, size=m)
    ul = np.stack([users[u].latent for u in cu])
    il = np.stack([items[i].latent for i in ci])
    # Engagement objectives share part of their taste signal: each affinity
    # matrix mixes a common component with an idiosyncratic one, so a single
    # fused score can rank correlated objectives well without the trade-off
    # being trivial.  The mix can differ per objective.
    shared = rng.standard_normal((latent_dim, latent_dim)) / np.sqrt(latent_dim)
    raws = {}
    for name in objectives.names:
        rho = correlations[name]
        own = rng.standard_normal((latent_dim, latent_dim)) / np.sqrt(latent_dim)
        a = rho * shared + np.sqrt(1.0 - rho * rho) * own
        uni.affinity[name] = a
        raws[name] = np.einsum("bk,kl,bl->b", ul, a, il)
    # Calibrate in funnel order so each bias can account for its ancestors.
    # The masked positive probability of a row is the product of the raw
    # sigmoids of the objective and all of its funnel ancestors (their
    # Bernoulli draws are independent given the latents), so we bisect the
    # bias until that masked mean hits the marginal target.
    probs = {}
    for name in objectives._toposort():
        gate = np.ones(m)
        for anc in _ancestors(objectives, name):
            gate = gate * probs[anc]
        target = min(targets[name], 0.95 * float(gate.mean()))
        raw = raws[name]
        lo, hi = -60.0, 60.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if (_sigmoid(raw + mid) * gate).mean() < target:
                lo = mid
            else:
                hi = mid
        uni.bias[name] = 0.5 * (lo + hi)
        probs[name] = _sigmoid(raw + uni.bias[name])
    return uni


def check_funnel(labels: dict, objectives: ObjectiveSet) -> bool:
    return all(labels[dep] <= labels[pre] for pre, dep in objectives.funnel_edges)


def stream_impressions(universe: Universe, seed: int,
                       n_impressions: int, noise_sigma: float = 0.1,
                       start_ordinal: int = 0) -> list[ImpressionLog]:
    """Draw users by activity, items by popularity, labels by funnel-masked
    Bernoulli(sigmoid(u . A . i + b)); fully determined by (universe, seed)."""
    rng = np.random.default_rng(seed)
    objectives = universe.objectives
    order = objectives._toposort()
    activity = np.array([u.activity for u in universe.users])
    p_user = activity / activity.sum()
    pop = np.exp(np.array([i.popularity_bias for i in universe.items]))
    p_item = pop / pop.sum()

    if n_impressions == 0:
        return []
    uids = rng.choice(universe.n_users, size=n_impressions, p=p_user)
    iids = rng.choice(universe.n_items, size=n_impressions, p=p_item)
    ul = np.stack([universe.users[u].latent for u in uids])
    il = np.stack([universe.items[i].latent for i in iids])
    label_cols: dict[str, np.ndarray] = {}
    for name in order:
        raw = np.einsum("bk,kl,bl->b", ul, universe.affinity[name], il)
        draw = (rng.random(n_impressions) < _sigmoid(raw + universe.bias[name]))
        draw = draw.astype(np.int64)
        for pre in objectives.prerequisites(name):
            draw &= label_cols[pre]
        label_cols[name] = draw
    k = universe.latent_dim
    feats = np.concatenate([
        ul + noise_sigma * rng.standard_normal((n_impressions, k)),
        il + noise_sigma * rng.standard_normal((n_impressions, k)),
        ul * il + noise_sigma * rng.standard_normal((n_impressions, k)),
    ], axis=1)
    logs = []
    for n in range(n_impressions):
        labels = {name: int(label_cols[name][n]) for name in objectives.names}
        logs.append(ImpressionLog(int(uids[n]), int(iids[n]), feats[n],
                                  labels, start_ordinal + n))
    return logs


def write_jsonl(logs: list[ImpressionLog], path) -> None:
    with open(path, "w") as fh:
        for log in logs:
            fh.write(json.dumps({
                "user_id": log.user_id,
                "item_id": log.item_id,
                "features": log.dense_features.tolist(),
                "labels": {k: int(v) for k, v in log.labels.items()},
                "ordinal": log.ordinal,
            }, sort_keys=True) + "\n")


def read_jsonl(path) -> list[ImpressionLog]:
    logs = []
    with open(path) as fh:
        for line in fh:
            rec = json.loads(line)
            logs.append(ImpressionLog(
                rec["user_id"], rec["item_id"],
                np.asarray(rec["features"], dtype=np.float64),
                rec["labels"], rec["ordinal"]))
    return logs


@dataclass
class Batch:
    """Array view of a list of impressions, in stream order."""
    user_ids: np.ndarray
    item_ids: np.ndarray
    features: np.ndarray
    labels: np.ndarray  # (B, n_objectives) in ObjectiveSet order
    ordinals: np.ndarray

    def __len__(self):
        return len(self.user_ids)

    @classmethod
    def from_logs(cls, logs: list[ImpressionLog], objectives: ObjectiveSet) -> "Batch":
        if not logs:
            raise ContractViolation("batch must be nonempty")
        return cls(
            user_ids=np.array([l.user_id for l in logs], dtype=np.int64),
            item_ids=np.array([l.item_id for l in logs], dtype=np.int64),
            features=np.stack([l.dense_features for l in logs]),
            labels=np.array([[l.labels[n] for n in objectives.names] for l in logs],
                            dtype=np.float64),
            ordinals=np.array([l.ordinal for l in logs], dtype=np.int64),
        )

    def slice(self, lo: int, hi: int) -> "Batch":
        return Batch(self.user_ids[lo:hi], self.item_ids[lo:hi],
                     self.features[lo:hi], self.labels[lo:hi], self.ordinals[lo:hi])
