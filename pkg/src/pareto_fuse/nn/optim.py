"""SGD and Adam over a ParameterStore/GradientTape pair."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError, NumericError
from .params import GradientTape, ParameterStore

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def optimizer_step(params: ParameterStore, tape: GradientTape,
                   learning_rate: float, method: str = "sgd") -> None:
    if method not in ("sgd", "adam"):
        raise ConfigurationError(f"unknown optimizer {method!r}")
    for name, g in tape.grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {name!r}")
    params.step_count += 1
    if method == "sgd":
        for name, p in params.entries.items():
            p.data -= learning_rate * tape.grads[name]
        return
    t = params.step_count
    for name, p in params.entries.items():
        state = params.optimizer_state.setdefault(name, {
            "m": np.zeros_like(p.data), "v": np.zeros_like(p.data),
        })
        g = tape.grads[name]
        state["m"] = ADAM_BETA1 * state["m"] + (1.0 - ADAM_BETA1) * g
        state["v"] = ADAM_BETA2 * state["v"] + (1.0 - ADAM_BETA2) * g * g
        m_hat = state["m"] / (1.0 - ADAM_BETA1 ** t)
        v_hat = state["v"] / (1.0 - ADAM_BETA2 ** t)
        p.data -= learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
