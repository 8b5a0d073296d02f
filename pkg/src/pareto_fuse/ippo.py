"""Iterative Pareto weight-search loop.

A fixed base model serves as the benchmark while a reference model keeps
training; strict all-metric GAUC dominance promotes the reference to the new
base, anything else bumps the worst objective's loss weight by 0.1/N and
renormalizes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .datagen import ObjectiveSet
from .errors import ContractViolation
from .metrics import GaucReport, compare_reports
from .pantheon import WeightVector

DOMINANCE_EPS = 1e-6  # float-noise guard on strict per-objective improvement


@dataclass
class PolicyAction:
    kind: str                 # "replace_base" | "adjust_weight"
    target: str | None = None
    delta: float = 0.0

    def to_dict(self):
        return {"kind": self.kind, "target": self.target, "delta": self.delta}


@dataclass
class IppoConfig:
    rounds: int = 30
    steps_per_round: int = 400
    delta_rule: str = "0.1/N"
    warm_start: bool = True
    epsilon: float = DOMINANCE_EPS
    # Warm-start loss weights (normalized before use); None means uniform.
    initial_weights: dict | None = None

    def initial_weight_vector(self, objectives: ObjectiveSet) -> "WeightVector":
        if self.initial_weights is None:
            return WeightVector.uniform(objectives)
        missing = set(objectives.names) - set(self.initial_weights)
        if missing:
            raise ContractViolation(
                f"initial_weights missing objectives {sorted(missing)}")
        return WeightVector({n: float(self.initial_weights[n])
                             for n in objectives.names}).normalize()

    def delta(self, n_objectives: int) -> float:
        if self.delta_rule != "0.1/N":
            raise ContractViolation(f"unknown delta rule {self.delta_rule!r}")
        return 0.1 / n_objectives


@dataclass
class ParetoState:
    objectives: ObjectiveSet
    weights: WeightVector
    base_report: GaucReport | None = None
    round: int = 0
    history: list = field(default_factory=list)
    truncated: bool = False

    def record(self, base_report: GaucReport, ref_report: GaucReport,
               reward: int, action: PolicyAction):
        self.history.append({
            "round": self.round,
            "weights": self.weights.to_dict(),
            "base_gauc": dict(base_report.gauc),
            "reference_gauc": dict(ref_report.gauc),
            "reward": reward,
            "action": action.to_dict(),
        })


def compute_reward(base_report: GaucReport, ref_report: GaucReport,
                   epsilon: float = DOMINANCE_EPS) -> int:
    """1 iff the reference strictly beats the base on every objective."""
    diff = compare_reports(ref_report, base_report)
    return int(np.all(diff > epsilon))


def select_action(reward: int, base_report: GaucReport, ref_report: GaucReport,
                  state: ParetoState, config: IppoConfig) -> PolicyAction:
    if reward == 1:
        return PolicyAction("replace_base")
    # Bump the objective where the reference lags the base the most; ties break
    # toward the earlier objective in declared order.
    gaps = {name: base_report.gauc[name] - ref_report.gauc[name]
            for name in state.objectives.names}
    target = max(state.objectives.names, key=lambda n: (gaps[n], -state.objectives.index(n)))
    return PolicyAction("adjust_weight", target=target,
                        delta=config.delta(len(state.objectives)))


def apply_action(action: PolicyAction, state: ParetoState,
                 ref_report: GaucReport | None = None,
                 environment=None) -> ParetoState:
    if action.kind == "replace_base":
        if environment is not None:
            environment.promote_reference()
        if ref_report is not None:
            state.base_report = ref_report
    elif action.kind == "adjust_weight":
        state.weights = state.weights.adjusted(action.target, action.delta)
    else:
        raise ContractViolation(f"unknown action kind {action.kind!r}")
    state.round += 1
    return state


def run_ippo(environment, objectives: ObjectiveSet, config: IppoConfig,
             initial_weights: WeightVector | None = None) -> ParetoState:
    """Round loop: train the reference, evaluate both models on the shared
    window, reward, act.  Terminates early with a truncation flag if the
    environment runs out of training data."""
    state = ParetoState(
        objectives=objectives,
        weights=initial_weights or config.initial_weight_vector(objectives))
    if config.rounds == 0:
        return state
    state.base_report = environment.evaluate_base()
    for _ in range(config.rounds):
        done = environment.train_reference(state.weights, config.steps_per_round)
        ref_report = environment.evaluate_reference()
        base_report = state.base_report
        reward = compute_reward(base_report, ref_report, config.epsilon)
        action = select_action(reward, base_report, ref_report, state, config)
        state.record(base_report, ref_report, reward, action)
        apply_action(action, state, ref_report=ref_report, environment=environment)
        if not config.warm_start:
            environment.reset_reference_to_base()
        if not done:
            state.truncated = True
            break
    return state


def write_trail(state: ParetoState, path) -> None:
    with open(path, "w") as fh:
        for rec in state.history:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
