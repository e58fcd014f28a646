"""Reverse-mode automatic differentiation over dense float64 tensors.

A Tape records every forward operation in execution order; backward() walks
the records in exact reverse order, pushing adjoints from each output to its
inputs. Gradients of Parameters accumulate (+=) across backward calls, so
backpropagating two losses in sequence equals backpropagating their sum.
Only the operations the hierarchical dialog model needs are provided, plus
a central finite-difference gradient checker and a plain SGD step.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.special import expit

MAGIC = b"SENTACT-CKPT 1"


class NonFiniteError(ValueError):
    """Raised whenever a NaN or Inf would be stored in a Tensor."""


class ShapeError(ValueError):
    pass


class Tensor:
    """Dense float64 array plus an optional back-reference to its Parameter."""

    __slots__ = ("data", "param")

    def __init__(self, data, _checked=False):
        arr = np.asarray(data, dtype=np.float64)
        if not _checked and not np.isfinite(arr).all():
            raise NonFiniteError("non-finite value in tensor")
        self.data = arr
        self.param = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"


def _out(arr) -> Tensor:
    """Wrap an op result, enforcing the no-NaN/Inf invariant."""
    if not np.isfinite(arr).all():
        raise NonFiniteError("operation produced a non-finite value")
    return Tensor(arr, _checked=True)


class Parameter:
    """Named trainable tensor with a persistent gradient accumulator."""

    def __init__(self, name: str, data):
        if not name or any(c.isspace() for c in name):
            raise ValueError(f"parameter name must be non-empty, no whitespace: {name!r}")
        self.name = name
        self.value = Tensor(data)
        self.value.param = self
        self.grad = np.zeros_like(self.value.data)

    def zero_grad(self):
        self.grad[:] = 0.0

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.value.shape})"


class Tape:
    """Ordered record of forward ops, sufficient to replay them backward."""

    __slots__ = ("nodes",)

    def __init__(self):
        self.nodes = []  # (out tensor, input tensors, backward fn)

    def record(self, out, inputs, backward_fn):
        self.nodes.append((out, inputs, backward_fn))

    def __len__(self):
        return len(self.nodes)


def backward(tape: Tape, loss: Tensor) -> None:
    """Accumulate d(loss)/d(param) into every reachable Parameter's grad.

    Adjoints of intermediate tensors live only for the duration of this call;
    Parameter.grad persists and accumulates across calls.
    """
    if loss.size != 1:
        raise ShapeError(f"backward requires a scalar loss, got shape {loss.shape}")
    adjoint = {id(loss): np.ones_like(loss.data)}
    tensors = {id(loss): loss}
    for out, inputs, backward_fn in reversed(tape.nodes):
        g = adjoint.pop(id(out), None)
        tensors.pop(id(out), None)
        if g is None:
            continue
        for t, gt in zip(inputs, backward_fn(g)):
            if gt is None:
                continue
            if t.param is not None:
                t.param.grad += gt
            else:
                key = id(t)
                if key in adjoint:
                    adjoint[key] += gt
                else:
                    adjoint[key] = gt.copy() if isinstance(gt, np.ndarray) else gt
                    tensors[key] = t
    # a loss that is itself a parameter leaf (degenerate but legal)
    for key, t in tensors.items():
        if t.param is not None:
            t.param.grad += adjoint[key]


# ---------------------------------------------------------------------------
# forward ops
# ---------------------------------------------------------------------------

def matmul(tape, a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; dA = dC B^T, dB = A^T dC."""
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    out = _out(a.data @ b.data)
    if tape is not None:
        ad, bd = a.data, b.data

        def bwd(g):
            return g @ bd.T, ad.T @ g

        tape.record(out, (a, b), bwd)
    return out


def add(tape, a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; also broadcasts a bias vector over the rows of a matrix."""
    if a.shape == b.shape:
        broadcast = False
    elif a.data.ndim == 2 and b.data.ndim == 1 and b.shape[0] == a.shape[1]:
        broadcast = True
    else:
        raise ShapeError(f"add shape mismatch: {a.shape} + {b.shape}")
    out = _out(a.data + b.data)
    if tape is not None:
        if broadcast:
            bwd = lambda g: (g, g.sum(axis=0))
        else:
            bwd = lambda g: (g, g)
        tape.record(out, (a, b), bwd)
    return out


def mul(tape, a: Tensor, b: Tensor) -> Tensor:
    """Elementwise (Hadamard) product of same-shape tensors."""
    if a.shape != b.shape:
        raise ShapeError(f"mul shape mismatch: {a.shape} * {b.shape}")
    out = _out(a.data * b.data)
    if tape is not None:
        ad, bd = a.data, b.data
        tape.record(out, (a, b), lambda g: (g * bd, g * ad))
    return out


def sigmoid(tape, a: Tensor) -> Tensor:
    y = expit(a.data)
    out = _out(y)
    if tape is not None:
        tape.record(out, (a,), lambda g: (g * y * (1.0 - y),))
    return out


def tanh(tape, a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    out = _out(y)
    if tape is not None:
        tape.record(out, (a,), lambda g: (g * (1.0 - y * y),))
    return out


def relu(tape, a: Tensor) -> Tensor:
    # subgradient at 0 is taken to be 0
    mask = a.data > 0.0
    out = _out(np.where(mask, a.data, 0.0))
    if tape is not None:
        tape.record(out, (a,), lambda g: (g * mask,))
    return out


def concat(tape, a: Tensor, b: Tensor, axis: int = 0) -> Tensor:
    if a.data.ndim != b.data.ndim:
        raise ShapeError(f"concat rank mismatch: {a.shape} vs {b.shape}")
    for ax in range(a.data.ndim):
        if ax != axis and a.shape[ax] != b.shape[ax]:
            raise ShapeError(f"concat shape mismatch on axis {ax}: {a.shape} vs {b.shape}")
    out = _out(np.concatenate([a.data, b.data], axis=axis))
    if tape is not None:
        cut = a.shape[axis]

        def bwd(g):
            left, right = np.split(g, [cut], axis=axis)
            return left, right

        tape.record(out, (a, b), bwd)
    return out


def embedding_lookup(tape, table: Tensor, indices) -> Tensor:
    """Gather rows of an embedding matrix; backward scatter-adds row grads."""
    idx = np.asarray(indices, dtype=np.intp)
    if idx.ndim != 1:
        raise ShapeError("indices must be a flat sequence")
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise IndexError(
            f"embedding index out of range [0, {table.shape[0]}): {indices}"
        )
    out = _out(table.data[idx])
    if tape is not None:
        param = table.param

        def bwd(g):
            if param is not None:
                np.add.at(param.grad, idx, g)
                return (None,)
            dense = np.zeros_like(table.data)
            np.add.at(dense, idx, g)
            return (dense,)

        tape.record(out, (table,), bwd)
    return out


def dropout(tape, a: Tensor, rate: float, training: bool, rng) -> Tensor:
    """Inverted dropout: zero with probability `rate`, scale survivors by
    1/(1-rate) at training time; identity at inference."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return a
    keep = 1.0 - rate
    mask = (rng.random(a.shape) >= rate) / keep
    out = _out(a.data * mask)
    if tape is not None:
        tape.record(out, (a,), lambda g: (g * mask,))
    return out


def softmax_cross_entropy(tape, logits: Tensor, gold: int) -> Tensor:
    """-log softmax(logits)[gold] with max-subtraction; grad is softmax - onehot."""
    flat = logits.data.reshape(-1)
    k = flat.shape[0]
    if k < 2:
        raise ShapeError("need at least 2 classes")
    if not 0 <= gold < k:
        raise IndexError(f"gold class {gold} out of range [0, {k})")
    shifted = flat - flat.max()
    log_z = np.log(np.exp(shifted).sum())
    loss = log_z - shifted[gold]
    out = _out(np.asarray(loss))
    if tape is not None:
        probs = np.exp(shifted - log_z)

        def bwd(g):
            d = probs.copy()
            d[gold] -= 1.0
            return (float(g) * d.reshape(logits.shape),)

        tape.record(out, (logits,), bwd)
    return out


# ---------------------------------------------------------------------------
# optimization and verification
# ---------------------------------------------------------------------------

def sgd_step(params, lr: float) -> None:
    """value <- value - lr * grad for every parameter, then zero the grads."""
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    for p in params:
        p.value.data -= lr * p.grad
        p.zero_grad()


def grad_check(f, params, eps: float = 1e-3):
    """Compare analytic gradients of the scalar f(params) against central
    finite differences, coordinate by coordinate.

    Relative error uses max(|analytic|, |numeric|, 1) as the denominator, so
    near-zero gradients are judged on absolute error. Returns the worst error
    together with the parameter name and flat coordinate where it occurs.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    for p in params:
        p.zero_grad()
    tape = Tape()
    loss = f(tape)
    if loss.size != 1:
        raise ShapeError("grad_check needs a scalar function")
    backward(tape, loss)
    analytic = {p.name: p.grad.copy() for p in params}

    worst = (0.0, None, None)
    for p in params:
        flat = p.value.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = f(None).data.item()
            flat[i] = orig - eps
            f_minus = f(None).data.item()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = analytic[p.name].reshape(-1)[i]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1.0)
            if err > worst[0]:
                worst = (err, p.name, i)
    for p in params:
        p.zero_grad()
    return worst


# ---------------------------------------------------------------------------
# parameter checkpoints
# ---------------------------------------------------------------------------

def save_parameters(params, path) -> None:
    """Versioned binary checkpoint: per parameter a header line with name and
    shape, then raw little-endian float64 bytes. Byte-identical across runs."""
    params = list(params)
    with Path(path).open("wb") as fh:
        fh.write(MAGIC + b"\n")
        fh.write(f"params {len(params)}\n".encode())
        for p in params:
            dims = " ".join(str(d) for d in p.value.shape)
            fh.write(f"{p.name} {p.value.data.ndim} {dims}".rstrip().encode() + b"\n")
            fh.write(np.ascontiguousarray(p.value.data, dtype="<f8").tobytes())


def load_parameters(path) -> dict:
    """Read a checkpoint back as a name -> float64 array mapping."""
    with Path(path).open("rb") as fh:
        if fh.readline().rstrip(b"\n") != MAGIC:
            raise ValueError(f"{path}: not a sentact checkpoint")
        head = fh.readline().split()
        if len(head) != 2 or head[0] != b"params":
            raise ValueError(f"{path}: corrupt checkpoint header")
        count = int(head[1])
        out = {}
        for _ in range(count):
            fields = fh.readline().decode().split()
            name, ndim = fields[0], int(fields[1])
            shape = tuple(int(d) for d in fields[2 : 2 + ndim])
            n = int(np.prod(shape)) if shape else 1
            raw = fh.read(8 * n)
            if len(raw) != 8 * n:
                raise ValueError(f"{path}: truncated checkpoint at {name}")
            out[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    return out
