"""Named parameter collections, gradient tapes, and snapshot files."""

from __future__ import annotations

import json

import numpy as np

from ..errors import ConfigurationError, NumericError
from .autograd import Tensor

SNAPSHOT_VERSION = 1


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int,
                   shape: tuple) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class ParameterStore:
    """Named trainable tensors for one model, with optimizer state attached.

    Shapes are fixed at creation; snapshot/restore round-trips bit-exactly.
    """

    def __init__(self):
        self.entries: dict[str, Tensor] = {}
        self.step_count: int = 0
        self.optimizer_state: dict[str, dict[str, np.ndarray]] = {}

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self.entries:
            raise ConfigurationError(f"duplicate parameter name {name!r}")
        t = Tensor(np.asarray(value, dtype=np.float64), requires_grad=True)
        self.entries[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self.entries[name]

    def names(self) -> list[str]:
        return list(self.entries)

    def snapshot(self) -> dict:
        return {
            "entries": {k: v.data.copy() for k, v in self.entries.items()},
            "step_count": self.step_count,
            "optimizer_state": {
                k: {sk: sv.copy() for sk, sv in st.items()}
                for k, st in self.optimizer_state.items()
            },
        }

    def restore(self, snap: dict) -> None:
        for name, arr in snap["entries"].items():
            if name not in self.entries:
                raise ConfigurationError(f"snapshot has unknown entry {name!r}")
            if self.entries[name].data.shape != arr.shape:
                raise ConfigurationError(
                    f"shape mismatch restoring {name!r}: "
                    f"{self.entries[name].data.shape} vs {arr.shape}")
            self.entries[name].data = arr.copy()
            self.entries[name].grad = None
        self.step_count = snap["step_count"]
        self.optimizer_state = {
            k: {sk: sv.copy() for sk, sv in st.items()}
            for k, st in snap["optimizer_state"].items()
        }

    # ---- file interchange format ----------------------------------------

    def to_manifest(self, component: str, header: dict | None = None) -> dict:
        doc = {
            "version": SNAPSHOT_VERSION,
            "component": component,
            "step_count": self.step_count,
            "shapes": {k: list(v.data.shape) for k, v in self.entries.items()},
            "entries": {k: v.data.ravel().tolist() for k, v in self.entries.items()},
            "optimizer_state": {
                k: {"shapes": {sk: list(sv.shape) for sk, sv in st.items()},
                    "values": {sk: sv.ravel().tolist() for sk, sv in st.items()}}
                for k, st in self.optimizer_state.items()
            },
        }
        if header:
            doc["header"] = header
        return doc

    def load_manifest(self, doc: dict) -> dict:
        if doc.get("version") != SNAPSHOT_VERSION:
            raise ConfigurationError(f"unsupported snapshot version {doc.get('version')!r}")
        snap = {
            "entries": {
                k: np.asarray(doc["entries"][k], dtype=np.float64).reshape(shape)
                for k, shape in doc["shapes"].items()
            },
            "step_count": doc["step_count"],
            "optimizer_state": {
                k: {sk: np.asarray(st["values"][sk], dtype=np.float64).reshape(sh)
                    for sk, sh in st["shapes"].items()}
                for k, st in doc["optimizer_state"].items()
            },
        }
        self.restore(snap)
        return doc.get("header", {})

    def save(self, path, component: str, header: dict | None = None) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_manifest(component, header), fh, sort_keys=True)

    def load(self, path) -> dict:
        with open(path) as fh:
            return self.load_manifest(json.load(fh))


class GradientTape:
    """Accumulated gradients for one ParameterStore.

    Recording is additive and linear in the optional scale factor; parameters
    never touched by a recorded loss keep exactly-zero gradient entries.
    """

    def __init__(self, store: ParameterStore):
        self.store = store
        self.grads: dict[str, np.ndarray] = {
            name: np.zeros_like(p.data) for name, p in store.entries.items()
        }

    def record(self, loss: Tensor, scale: float = 1.0) -> None:
        loss.backward()
        for name, p in self.store.entries.items():
            if p.grad is not None:
                self.grads[name] += scale * p.grad
                p.grad = None

    def reset(self) -> None:
        for g in self.grads.values():
            g[:] = 0.0

    def check_finite(self) -> None:
        for name, g in self.grads.items():
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient for parameter {name!r}")
