"""Reverse-mode automatic differentiation over dense float64 tensors.

Tensors are thin wrappers around 2-D numpy arrays.  Operations executed
while a Tape is active are recorded; ``backward`` replays the tape in
reverse and accumulates gradients keyed by node id.  Without an active
tape every operation is a plain numpy computation, which is the fast
path used by decoding and evaluation.

Broadcasting is deliberately limited: elementwise ops accept identical
shapes or a (1, n) operand against an (m, n) one (a leading batch
dimension).  Everything is float64; tolerance-level oracle checks
elsewhere depend on double precision.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError, TapeConsumedError, VocabLookupError, ContractError

_TAPE_STACK: list["Tape"] = []


class Tape:
    """Recorded primitive applications, in topological order.

    A tape is single-use: one forward recording followed by at most one
    ``backward``.
    """

    def __init__(self):
        self._inputs: list[tuple[int, ...]] = []
        self._backward_fns: list = []
        self._consumed = False
        self.gradients: dict[int, np.ndarray] = {}

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc):
        _TAPE_STACK.pop()
        return False

    def _register(self, tensor: "Tensor", inputs: tuple[int, ...], backward_fn) -> int:
        node_id = len(self._inputs)
        self._inputs.append(inputs)
        self._backward_fns.append(backward_fn)
        tensor._tape = self
        tensor.node_id = node_id
        return node_id

    def _node_of(self, tensor: "Tensor") -> int:
        if tensor._tape is not self:
            return self._register(tensor, (), None)
        return tensor.node_id

    def grad(self, tensor: "Tensor") -> np.ndarray | None:
        """Gradient accumulated for `tensor` during backward, if any."""
        if tensor._tape is not self:
            return None
        return self.gradients.get(tensor.node_id)


def active_tape() -> Tape | None:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


class Tensor:
    """Dense real array, optionally attached to the active tape."""

    __slots__ = ("data", "node_id", "_tape")

    def __init__(self, data):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        self.data = arr
        self.node_id: int | None = None
        self._tape: Tape | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() on non-scalar tensor of shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        return f"Tensor(shape={self.shape})"

    # Convenience operators used by tests; models call the functions below.
    def __add__(self, other):
        return add(self, other if isinstance(other, Tensor) else Tensor(other))

    def __mul__(self, other):
        return mul(self, other if isinstance(other, Tensor) else Tensor(other))

    def __matmul__(self, other):
        return matmul(self, other)


def _record(out: Tensor, inputs: tuple[Tensor, ...], backward_fn) -> Tensor:
    tape = active_tape()
    if tape is not None:
        ids = tuple(tape._node_of(t) for t in inputs)
        tape._register(out, ids, backward_fn)
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    if int(np.prod(shape)) == 1:
        return grad.sum().reshape(shape)
    if shape[0] == 1 and grad.shape[0] != 1 and grad.shape[1:] == shape[1:]:
        return grad.sum(axis=0, keepdims=True)
    raise ShapeError(f"cannot reduce gradient {grad.shape} to {shape}")


def _check_elementwise(kind: str, a: Tensor, b: Tensor):
    if a.shape == b.shape:
        return
    if a.data.size == 1 or b.data.size == 1:
        return
    if a.shape[1:] == b.shape[1:] and (a.shape[0] == 1 or b.shape[0] == 1):
        return
    raise ShapeError(f"{kind}: incompatible shapes {a.shape} and {b.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_elementwise("add", a, b)
    out = Tensor(a.data + b.data)
    sa, sb = a.shape, b.shape

    def bwd(g):
        return _unbroadcast(g, sa), _unbroadcast(g, sb)

    return _record(out, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_elementwise("mul", a, b)
    out = Tensor(a.data * b.data)
    ad, bd = a.data, b.data

    def bwd(g):
        return _unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)

    return _record(out, (a, b), bwd)


def scale(a: Tensor, c: float) -> Tensor:
    out = Tensor(a.data * c)
    return _record(out, (a,), lambda g: (g * c,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    out = Tensor(a.data @ b.data)
    ad, bd = a.data, b.data

    def bwd(g):
        return g @ bd.T, ad.T @ g

    return _record(out, (a, b), bwd)


def concat(tensors: list[Tensor], axis: int = 1) -> Tensor:
    if not tensors:
        raise ContractError("concat: empty input list")
    if axis not in (0, 1):
        raise ShapeError(f"concat: axis must be 0 or 1, got {axis}")
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        if axis == 1:
            return tuple(g[:, offsets[i]:offsets[i + 1]] for i in range(len(sizes)))
        return tuple(g[offsets[i]:offsets[i + 1], :] for i in range(len(sizes)))

    return _record(out, tuple(tensors), bwd)


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    out = Tensor(a.data[:, start:stop])
    shape = a.shape

    def bwd(g):
        full = np.zeros(shape)
        full[:, start:stop] = g
        return (full,)

    return _record(out, (a,), bwd)


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    out = Tensor(a.data[start:stop, :])
    shape = a.shape

    def bwd(g):
        full = np.zeros(shape)
        full[start:stop, :] = g
        return (full,)

    return _record(out, (a,), bwd)


def transpose(a: Tensor) -> Tensor:
    out = Tensor(a.data.T)
    return _record(out, (a,), lambda g: (g.T,))


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    out = Tensor(y)
    return _record(out, (a,), lambda g: (g * (1.0 - y * y),))


def sigmoid(a: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-a.data))
    out = Tensor(y)
    return _record(out, (a,), lambda g: (g * y * (1.0 - y),))


def softmax(a: Tensor) -> Tensor:
    x = a.data
    y = np.exp(x - x.max(axis=-1, keepdims=True))
    y /= y.sum(axis=-1, keepdims=True)
    out = Tensor(y)

    def bwd(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return _record(out, (a,), bwd)


def log_softmax(a: Tensor) -> Tensor:
    x = a.data
    shifted = x - x.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    y = shifted - lse
    out = Tensor(y)
    sm = np.exp(y)

    def bwd(g):
        return (g - sm * g.sum(axis=-1, keepdims=True),)

    return _record(out, (a,), bwd)


def embedding_lookup(table: Tensor, ids) -> Tensor:
    idx = np.asarray(ids, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise VocabLookupError(
            f"embedding_lookup: id out of range for table with {table.shape[0]} rows"
        )
    out = Tensor(table.data[idx])
    shape = table.shape

    def bwd(g):
        full = np.zeros(shape)
        np.add.at(full, idx, g)
        return (full,)

    return _record(out, (table,), bwd)


def log(a: Tensor) -> Tensor:
    out = Tensor(np.log(a.data))
    ad = a.data
    return _record(out, (a,), lambda g: (g / ad,))


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)
    out = Tensor(y)
    return _record(out, (a,), lambda g: (g * y,))


def neg(a: Tensor) -> Tensor:
    out = Tensor(-a.data)
    return _record(out, (a,), lambda g: (-g,))


def add_const(a: Tensor, c: float) -> Tensor:
    out = Tensor(a.data + c)
    return _record(out, (a,), lambda g: (g,))


def tsum(a: Tensor) -> Tensor:
    out = Tensor(np.array([[a.data.sum()]]))
    shape = a.shape
    return _record(out, (a,), lambda g: (np.full(shape, g.reshape(-1)[0]),))


PRIMITIVES = {
    "matmul": matmul,
    "add": add,
    "mul": mul,
    "concat": concat,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "softmax": softmax,
    "log_softmax": log_softmax,
    "embedding_lookup": embedding_lookup,
}


def primitive_forward(kind: str, *inputs) -> Tensor:
    """Apply a named primitive; the entry point the contract tests use."""
    if kind not in PRIMITIVES:
        raise ContractError(f"unknown primitive kind {kind!r}")
    if kind == "concat":
        return concat(list(inputs[0]) if len(inputs) == 1 else list(inputs))
    return PRIMITIVES[kind](*inputs)


def lstm_cell(x_t: Tensor, h_prev: Tensor, c_prev: Tensor,
              W: Tensor, U: Tensor, b: Tensor,
              zx_t: Tensor | None = None) -> tuple[Tensor, Tensor]:
    """One LSTM step with gate order (input, forget, output, candidate).

    `zx_t` optionally carries the precomputed x_t @ W row so callers can
    batch the input projection over a whole sequence.
    """
    hidden = h_prev.shape[1]
    if U.shape[0] != hidden or U.shape[1] != 4 * hidden:
        raise ShapeError(f"lstm_cell: U shape {U.shape} does not match hidden {hidden}")
    if zx_t is None:
        zx_t = matmul(x_t, W)
    z = add(add(zx_t, matmul(h_prev, U)), b)
    gates = sigmoid(slice_cols(z, 0, 3 * hidden))
    g = tanh(slice_cols(z, 3 * hidden, 4 * hidden))
    i = slice_cols(gates, 0, hidden)
    f = slice_cols(gates, hidden, 2 * hidden)
    o = slice_cols(gates, 2 * hidden, 3 * hidden)
    c_t = add(mul(f, c_prev), mul(i, g))
    h_t = mul(o, tanh(c_t))
    return h_t, c_t


def backward(tape: Tape, loss: Tensor) -> dict[int, np.ndarray]:
    """Reverse sweep from a scalar loss; returns gradients keyed by node id."""
    if tape._consumed:
        raise TapeConsumedError("tape already consumed by a previous backward pass")
    tape._consumed = True
    if loss._tape is not tape:
        raise ContractError("loss tensor was not recorded on this tape")
    if loss.data.size != 1:
        raise ContractError(f"backward: loss must be scalar, got shape {loss.shape}")

    grads = tape.gradients
    grads[loss.node_id] = np.ones_like(loss.data)
    for node_id in range(loss.node_id, -1, -1):
        g = grads.get(node_id)
        fn = tape._backward_fns[node_id]
        if g is None or fn is None:
            continue
        input_grads = fn(g)
        for in_id, in_g in zip(tape._inputs[node_id], input_grads):
            if in_id in grads:
                grads[in_id] = grads[in_id] + in_g
            else:
                grads[in_id] = in_g
    return grads
