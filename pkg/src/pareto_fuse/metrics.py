"""Evaluation machinery: AUC, exposure-weighted grouped AUC, Kendall's tau,
Pareto dominance between reports, and mean-variance score calibration."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import kendalltau, rankdata

from .datagen import Batch, ObjectiveSet
from .errors import (ContractViolation, DegenerateDistributionError,
                     UndefinedMetricError)

CALIBRATION_CLIP = (1e-6, 1.0 - 1e-6)


def auc(scores, labels):
    """Probability a random positive outranks a random negative (ties 0.5).

    Returns None when the labels are single-class (undefined AUC).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ContractViolation(
            f"scores/labels length mismatch: {scores.shape} vs {labels.shape}")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(scores, method="average")
    return (ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


@dataclass
class EvalWindow:
    """One evaluation slice, grouped by user, with optional cached pxtrs."""
    window_id: str
    objectives: ObjectiveSet
    user_ids: np.ndarray
    labels: np.ndarray  # (n, n_objectives)
    pxtrs: dict = field(default_factory=dict)  # objective -> (n,) scores
    _groups: list = None

    @classmethod
    def from_batch(cls, batch: Batch, objectives: ObjectiveSet,
                   window_id: str = "eval") -> "EvalWindow":
        return cls(window_id, objectives, batch.user_ids, batch.labels)

    def groups(self):
        """(user_id, row-index array) pairs, users in ascending id order."""
        if self._groups is None:
            order = np.argsort(self.user_ids, kind="stable")
            sorted_ids = self.user_ids[order]
            boundaries = np.flatnonzero(np.diff(sorted_ids)) + 1
            self._groups = [
                (int(sorted_ids[idx[0]]), idx)
                for idx in np.split(order, boundaries)
            ]
        return self._groups

    def __len__(self):
        return len(self.user_ids)


def gauc(scores, window: EvalWindow, objective: str) -> float:
    """Exposure-weighted per-user AUC; single-class users are excluded and the
    exposure weights renormalized over the included ones."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape[0] != len(window):
        raise ContractViolation("scores not aligned with window")
    col = window.objectives.index(objective)
    labels = window.labels[:, col]
    num = 0.0
    exposures = 0
    for _, idx in window.groups():
        a = auc(scores[idx], labels[idx])
        if a is None:
            continue
        num += len(idx) * a
        exposures += len(idx)
    if exposures == 0:
        raise UndefinedMetricError(
            f"no user has both classes for objective {objective!r}")
    return num / exposures


@dataclass
class GaucReport:
    window_id: str
    gauc: dict            # objective -> value in [0, 1]
    counted_users: dict   # objective -> included user count
    excluded_users: dict  # objective -> excluded user count

    def vector(self, objectives: ObjectiveSet) -> np.ndarray:
        return np.array([self.gauc[n] for n in objectives.names])

    def to_dict(self):
        return {"window_id": self.window_id, "gauc": dict(self.gauc),
                "counted_users": dict(self.counted_users),
                "excluded_users": dict(self.excluded_users)}


def gauc_report(scores, window: EvalWindow) -> GaucReport:
    scores = np.asarray(scores, dtype=np.float64)
    out, counted, excluded = {}, {}, {}
    for name in window.objectives.names:
        col = window.objectives.index(name)
        labels = window.labels[:, col]
        num, exposures, n_inc, n_exc = 0.0, 0, 0, 0
        for _, idx in window.groups():
            a = auc(scores[idx], labels[idx])
            if a is None:
                n_exc += 1
                continue
            num += len(idx) * a
            exposures += len(idx)
            n_inc += 1
        if exposures == 0:
            raise UndefinedMetricError(f"GAUC undefined for objective {name!r}")
        out[name] = num / exposures
        counted[name] = n_inc
        excluded[name] = n_exc
    return GaucReport(window.window_id, out, counted, excluded)


def kendall_tau(x, y) -> float:
    """Tie-corrected Kendall's tau-b."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ContractViolation("kendall_tau needs two equal-length vectors")
    if len(x) < 2:
        raise ContractViolation("kendall_tau needs length >= 2")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise UndefinedMetricError("kendall_tau undefined for an all-tied vector")
    tau, _ = kendalltau(x, y)
    return float(tau)


def compare_reports(a: GaucReport, b: GaucReport) -> np.ndarray:
    names_a, names_b = sorted(a.gauc), sorted(b.gauc)
    if names_a != names_b:
        raise ContractViolation(
            f"objective sets differ: {names_a} vs {names_b}")
    return np.array([a.gauc[n] - b.gauc[n] for n in names_a])


def dominates(a: GaucReport, b: GaucReport) -> int:
    """Standard Pareto dominance: a >= b everywhere, a > b somewhere."""
    diff = compare_reports(a, b)
    return int(np.all(diff >= 0.0) and np.any(diff > 0.0))


@dataclass
class CalibrationTransform:
    scale: float
    shift: float
    source_mean: float
    source_var: float
    target_mean: float
    target_var: float

    def apply(self, scores, clip: bool = True) -> np.ndarray:
        """s' = scale * s + shift, optionally clipped to the open unit interval."""
        scores = np.asarray(scores, dtype=np.float64)
        out = scores * self.scale + self.shift
        if clip:
            out = np.clip(out, *CALIBRATION_CLIP)
        return out

    def to_dict(self):
        return {"scale": self.scale, "shift": self.shift,
                "source_mean": self.source_mean, "source_var": self.source_var,
                "target_mean": self.target_mean, "target_var": self.target_var}


def fit_calibration(experimental, baseline) -> CalibrationTransform:
    """Affine moment matching of experimental scores to the baseline moments."""
    exp = np.asarray(experimental, dtype=np.float64)
    base = np.asarray(baseline, dtype=np.float64)
    if exp.size == 0 or base.size == 0:
        raise ContractViolation("calibration needs nonempty score samples")
    mu_e, var_e = float(exp.mean()), float(exp.var())
    mu_b, var_b = float(base.mean()), float(base.var())
    if var_e == 0.0:
        raise DegenerateDistributionError("experimental scores have zero variance")
    scale = float(np.sqrt(var_b) / np.sqrt(var_e))
    shift = mu_b - scale * mu_e
    return CalibrationTransform(scale=scale, shift=shift,
                                source_mean=mu_e, source_var=var_e,
                                target_mean=mu_b, target_var=var_b)


def apply_calibration(transform: CalibrationTransform, scores,
                      clip: bool = True) -> np.ndarray:
    return transform.apply(scores, clip=clip)
