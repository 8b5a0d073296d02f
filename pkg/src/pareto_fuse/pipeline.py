"""Joint training environment wiring the ranking model, the fusion head, the
data stream, and the evaluation window together for the weight-search loop."""

from __future__ import annotations

import numpy as np

from .datagen import Batch, ObjectiveSet
from .errors import ContractViolation
from .metrics import EvalWindow, GaucReport, gauc_report
from .pantheon import PantheonModel, WeightVector
from .ranking import RankingModel


class StreamCursor:
    """Sequential batches over a preloaded stream, optionally cycling."""

    def __init__(self, data: Batch, batch_size: int, cycle: bool = True):
        if batch_size < 1 or batch_size > len(data):
            raise ContractViolation("batch_size must be in [1, stream length]")
        self.data = data
        self.batch_size = batch_size
        self.cycle = cycle
        self.pos = 0
        self.exhausted = False

    def next(self) -> Batch | None:
        if self.pos + self.batch_size > len(self.data):
            if not self.cycle:
                self.exhausted = True
                return None
            self.pos = 0
        out = self.data.slice(self.pos, self.pos + self.batch_size)
        self.pos += self.batch_size
        return out


class JointEnvironment:
    """Owns the live (reference) models and frozen base snapshots.

    The base report is cached: the evaluation window is fixed and scoring is
    deterministic, so the base only needs re-scoring when it is replaced.
    """

    def __init__(self, ranking: RankingModel, pantheon: PantheonModel,
                 cursor: StreamCursor, window: EvalWindow,
                 train_ranking: bool = True):
        self.ranking = ranking
        self.pantheon = pantheon
        self.cursor = cursor
        self.window = window
        self.window_batch: Batch | None = None
        self.train_ranking = train_ranking
        self._base_rank = ranking.store.snapshot()
        self._base_pant = pantheon.store.snapshot()
        self._base_report: GaucReport | None = None

    def attach_window_batch(self, batch: Batch) -> None:
        self.window_batch = batch

    def train_reference(self, weights: WeightVector, steps: int) -> bool:
        for _ in range(steps):
            batch = self.cursor.next()
            if batch is None:
                return False
            if self.train_ranking:
                self.ranking.train_step(batch)
            self.pantheon.train_step(self.ranking, batch, weights)
        return True

    def _score_current(self) -> np.ndarray:
        return self.pantheon.score(self.ranking, self.window_batch)

    def evaluate_reference(self) -> GaucReport:
        return gauc_report(self._score_current(), self.window)

    def base_scores(self) -> np.ndarray:
        live_rank = self.ranking.store.snapshot()
        live_pant = self.pantheon.store.snapshot()
        self.ranking.store.restore(self._base_rank)
        self.pantheon.store.restore(self._base_pant)
        try:
            return self._score_current()
        finally:
            self.ranking.store.restore(live_rank)
            self.pantheon.store.restore(live_pant)

    def evaluate_base(self) -> GaucReport:
        if self._base_report is None:
            self._base_report = gauc_report(self.base_scores(), self.window)
        return self._base_report

    def promote_reference(self) -> None:
        self._base_rank = self.ranking.store.snapshot()
        self._base_pant = self.pantheon.store.snapshot()
        self._base_report = None

    def reset_reference_to_base(self) -> None:
        self.ranking.store.restore(self._base_rank)
        self.pantheon.store.restore(self._base_pant)

    def base_snapshots(self):
        return self._base_rank, self._base_pant


def pretrain_ranking(model: RankingModel, cursor: StreamCursor,
                     steps: int) -> list:
    """Train the ranking model alone; returns the per-step loss curve."""
    curve = []
    for step in range(steps):
        batch = cursor.next()
        if batch is None:
            break
        losses = model.train_step(batch)
        curve.append({"step": step, "losses": losses})
    return curve


def build_window(batch: Batch, objectives: ObjectiveSet,
                 window_id: str = "eval") -> EvalWindow:
    return EvalWindow.from_batch(batch, objectives, window_id)
