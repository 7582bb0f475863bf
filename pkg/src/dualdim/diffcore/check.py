"""Central-difference gradient validation."""

from __future__ import annotations

import numpy as np

from .optim import ParameterStore
from .tensor import Tape, backward


def finite_difference_check(fn, store: ParameterStore, eps: float = 1e-4) -> float:
    """Max relative error between analytic and central-difference gradients.

    `fn` maps the store to a scalar Tensor and must be deterministic.
    The error metric per coordinate is |analytic - numeric| / max(1, |numeric|).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    with Tape() as tape:
        loss = fn(store)
    backward(tape, loss)
    analytic = {name: tape.grad(t) for name, t in store.params.items()}

    worst = 0.0
    for name, t in store.params.items():
        flat = t.data.reshape(-1)
        a = analytic[name]
        a = np.zeros_like(t.data) if a is None else a
        a_flat = a.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            up = fn(store).item()
            flat[idx] = orig - eps
            down = fn(store).item()
            flat[idx] = orig
            numeric = (up - down) / (2 * eps)
            err = abs(a_flat[idx] - numeric) / max(1.0, abs(numeric))
            worst = max(worst, err)
    return worst
