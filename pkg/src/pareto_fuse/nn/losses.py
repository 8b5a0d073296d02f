"""Binary cross-entropy with epsilon clamping."""

from __future__ import annotations

import numpy as np

from ..errors import NumericError
from .autograd import Tensor

PROB_EPS = 1e-7


def bce_loss(p, y) -> Tensor:
    """Mean binary cross-entropy -(y*log p + (1-y)*log(1-p)).

    p may be a Tensor (graph-tracked) or array-like; y is 0/1 array-like.
    Predictions are clamped to [1e-7, 1-1e-7] before the log.
    """
    p = p if isinstance(p, Tensor) else Tensor(p)
    y = np.asarray(y, dtype=np.float64)
    if np.any(p.data < 0.0) or np.any(p.data > 1.0):
        raise NumericError("probabilities outside [0, 1]")
    pc = p.clip(PROB_EPS, 1.0 - PROB_EPS)
    term = Tensor(y) * pc.log() + Tensor(1.0 - y) * (1.0 - pc).log()
    return -(term.mean())
