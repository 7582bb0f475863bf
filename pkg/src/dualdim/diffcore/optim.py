"""Named parameter storage, optimizers, and the checkpoint format."""

from __future__ import annotations

import json
import struct

import numpy as np

from ..errors import ContractError, VocabLookupError
from .tensor import Tensor

CHECKPOINT_MAGIC = b"DDCKPT"
CHECKPOINT_VERSION = 1


class ParameterStore:
    """name -> Tensor map with per-parameter Adam moments and a step counter."""

    def __init__(self):
        self.params: dict[str, Tensor] = {}
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step_count = 0

    def add(self, name: str, values) -> Tensor:
        if name in self.params:
            raise ContractError(f"duplicate parameter name {name!r}")
        t = Tensor(values)
        self.params[name] = t
        self.m[name] = np.zeros_like(t.data)
        self.v[name] = np.zeros_like(t.data)
        return t

    def __getitem__(self, name: str) -> Tensor:
        try:
            return self.params[name]
        except KeyError:
            raise VocabLookupError(f"unknown parameter {name!r}") from None

    def __contains__(self, name):
        return name in self.params

    def names(self) -> list[str]:
        return list(self.params)

    def copy(self) -> "ParameterStore":
        other = ParameterStore()
        for name, t in self.params.items():
            other.add(name, t.data.copy())
            other.m[name] = self.m[name].copy()
            other.v[name] = self.v[name].copy()
        other.step_count = self.step_count
        return other

    def load_values_from(self, other: "ParameterStore"):
        """Overwrite values and optimizer state in place (same names/shapes)."""
        for name, t in self.params.items():
            t.data[...] = other.params[name].data
            self.m[name][...] = other.m[name]
            self.v[name][...] = other.v[name]
        self.step_count = other.step_count

    def grads_from_tape(self, tape) -> dict[str, np.ndarray]:
        """Collect this store's gradients from a tape after backward."""
        out = {}
        for name, t in self.params.items():
            g = tape.grad(t)
            if g is not None:
                out[name] = g
        return out


def sgd_step(store: ParameterStore, grads: dict[str, np.ndarray], lr: float):
    for name, g in grads.items():
        if name not in store:
            raise VocabLookupError(f"unknown parameter {name!r}")
        store.params[name].data -= lr * g
    store.step_count += 1


def adam_step(store: ParameterStore, grads: dict[str, np.ndarray], lr: float,
              betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
    """Bias-corrected Adam descent step, applied in place."""
    b1, b2 = betas
    store.step_count += 1
    t = store.step_count
    for name, g in grads.items():
        if name not in store:
            raise VocabLookupError(f"unknown parameter {name!r}")
        m = store.m[name]
        v = store.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * (g * g)
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        store.params[name].data -= lr * m_hat / (np.sqrt(v_hat) + eps)


def clip_grad_norm(grads: dict[str, np.ndarray], max_norm: float) -> dict[str, np.ndarray]:
    """Scale all gradients so the global L2 norm is at most max_norm."""
    if max_norm <= 0:
        raise ContractError("max_norm must be positive")
    total = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if total <= max_norm:
        return grads
    factor = max_norm / total
    return {name: g * factor for name, g in grads.items()}


def accumulate(into: dict[str, np.ndarray], grads: dict[str, np.ndarray], weight: float = 1.0):
    for name, g in grads.items():
        if name in into:
            into[name] += weight * g
        else:
            into[name] = weight * g


def save_checkpoint(store: ParameterStore, path: str):
    """Self-describing little-endian checkpoint (values + Adam state)."""
    header = {
        "version": CHECKPOINT_VERSION,
        "step_count": store.step_count,
        "params": [{"name": n, "shape": list(t.shape)} for n, t in store.params.items()],
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for name, t in store.params.items():
            fh.write(t.data.astype("<f8").tobytes())
            fh.write(store.m[name].astype("<f8").tobytes())
            fh.write(store.v[name].astype("<f8").tobytes())


def load_checkpoint(path: str) -> ParameterStore:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ContractError(f"{path}: not a checkpoint file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header["version"] != CHECKPOINT_VERSION:
            raise ContractError(f"unsupported checkpoint version {header['version']}")
        store = ParameterStore()
        for rec in header["params"]:
            shape = tuple(rec["shape"])
            count = int(np.prod(shape))
            vals = np.frombuffer(fh.read(8 * count), dtype="<f8").reshape(shape)
            store.add(rec["name"], vals.copy())
            store.m[rec["name"]] = np.frombuffer(
                fh.read(8 * count), dtype="<f8").reshape(shape).copy()
            store.v[rec["name"]] = np.frombuffer(
                fh.read(8 * count), dtype="<f8").reshape(shape).copy()
        store.step_count = header["step_count"]
    return store
