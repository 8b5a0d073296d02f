"""Legacy formula-based ensemble sort: configurable fusion formula, a
hand-weighted GAUC objective, and a seeded random + golden-section search."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .datagen import ObjectiveSet
from .errors import ConfigurationError, ContractViolation
from .metrics import EvalWindow, gauc

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
DEFAULT_BOUNDS = (0.0, 4.0)


@dataclass
class FusionFormula:
    """Score = prod (1 + pxtr)^exponent * ... + sum coefficient * pxtr."""
    multiplicative: list  # [(objective, parameter name), ...]
    additive: list        # [(objective, parameter name), ...]
    bounds: dict          # parameter name -> (lo, hi)

    @classmethod
    def default(cls) -> "FusionFormula":
        return cls(multiplicative=[("ctr", "alpha"), ("lvtr", "beta")],
                   additive=[("evtr", "gamma")],
                   bounds={"alpha": DEFAULT_BOUNDS, "beta": DEFAULT_BOUNDS,
                           "gamma": DEFAULT_BOUNDS})

    def validate(self, objectives: ObjectiveSet):
        for obj, name in self.multiplicative + self.additive:
            if obj not in objectives.names:
                raise ConfigurationError(f"formula references unknown objective {obj!r}")
            if name not in self.bounds:
                raise ConfigurationError(f"no bounds for parameter {name!r}")
        for name, (lo, hi) in self.bounds.items():
            if not lo < hi:
                raise ConfigurationError(f"bounds for {name!r} must satisfy lo < hi")

    @property
    def parameter_names(self) -> list:
        return [name for _, name in self.multiplicative + self.additive]


@dataclass
class EvalMetricSpec:
    weights: dict = field(default_factory=dict)

    @classmethod
    def default(cls, objectives: ObjectiveSet) -> "EvalMetricSpec":
        weights = {name: 1.0 for name in objectives.names}
        weights["ctr"] = 2.0
        weights["lvtr"] = 5.0
        return cls(weights)

    def validate(self):
        for name, w in self.weights.items():
            if w <= 0.0:
                raise ConfigurationError(f"metric weight for {name!r} must be positive")


def formula_score(pxtrs: dict, params: dict, formula: FusionFormula) -> np.ndarray:
    """Evaluate the fusion formula; pxtr values may be scalars or arrays."""
    for name in formula.parameter_names:
        if name not in params:
            raise ConfigurationError(f"formula parameter {name!r} is not bound")
    mult = 1.0
    for obj, name in formula.multiplicative:
        mult = mult * np.power(1.0 + np.asarray(pxtrs[obj], dtype=np.float64),
                               params[name])
    add = 0.0
    for obj, name in formula.additive:
        add = add + params[name] * np.asarray(pxtrs[obj], dtype=np.float64)
    return mult + add


def eval_metric(scores, window: EvalWindow, spec: EvalMetricSpec) -> float:
    """Sum over objectives of metric weight times GAUC of the shared fused
    score against that objective's labels."""
    return sum(w * gauc(scores, window, name) for name, w in spec.weights.items())


def _golden_max(f, lo: float, hi: float, iters: int = 24):
    """Golden-section maximization on [lo, hi]; returns evaluated points."""
    evaluated = []
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    evaluated += [(c, fc), (d, fd)]
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
            evaluated.append((c, fc))
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
            evaluated.append((d, fd))
    return evaluated


def tune_params(formula: FusionFormula, window: EvalWindow,
                spec: EvalMetricSpec, budget: int = 512, seed: int = 0,
                refine_sweeps: int = 3, max_workers: int = 1):
    """Two-phase seeded search: uniform random sampling within bounds, then
    coordinate-wise golden-section refinement from the best sample.

    Returns (best params, best metric, trace); the trace is ordered by
    candidate index and is deterministic in the seed.
    """
    if budget < 1:
        raise ContractViolation("budget must be >= 1")
    if len(window) == 0:
        raise ContractViolation("evaluation window is empty")
    formula.validate(window.objectives)
    spec.validate()
    if not window.pxtrs:
        raise ContractViolation("window carries no pxtrs to fuse")
    names = formula.parameter_names
    rng = np.random.default_rng(seed)

    def evaluate(params: dict) -> float:
        return eval_metric(formula_score(window.pxtrs, params, formula),
                           window, spec)

    candidates = []
    for _ in range(budget):
        candidates.append({name: float(rng.uniform(*formula.bounds[name]))
                           for name in names})
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            values = list(pool.map(evaluate, candidates))
    else:
        values = [evaluate(c) for c in candidates]
    trace = [{"params": c, "metric": v} for c, v in zip(candidates, values)]

    best_idx = int(np.argmax(values))
    best_params = dict(candidates[best_idx])
    best_metric = values[best_idx]
    for _ in range(refine_sweeps):
        for name in names:
            lo, hi = formula.bounds[name]
            base = dict(best_params)

            def along(x, _name=name, _base=base):
                return evaluate({**_base, _name: x})

            for x, v in _golden_max(along, lo, hi):
                trace.append({"params": {**base, name: x}, "metric": v})
                if v > best_metric:
                    best_metric = v
                    best_params = {**base, name: x}
    return best_params, best_metric, trace
