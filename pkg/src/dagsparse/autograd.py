"""Minimal reverse-mode automatic differentiation on numpy arrays.

A :class:`Tape` records every primitive in forward order; :func:`backward`
replays the records strictly in reverse.  Only the primitives needed by
the DAG networks are provided: convolutions (incl. strided and 1x1),
ReLU, batch norm, global average pooling, linear layers, tanh-scaled
aggregation helpers, softmax cross-entropy and the L1-of-tanh penalty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .dag import EdgeParams


class Tensor:
    """A value on the tape.  Leaves (parameters, inputs) have op=None."""

    __slots__ = ("data", "grad", "name")

    def __init__(self, data, name: str | None = None):
        self.data = np.asarray(data)
        self.grad = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data, dtype=self.data.dtype)
        self.grad += g

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, name={self.name})"


@dataclass
class Record:
    op: str
    out: Tensor
    backward: callable


@dataclass
class Tape:
    records: list[Record] = field(default_factory=list)

    def add(self, op: str, out: Tensor, backward) -> Tensor:
        self.records.append(Record(op, out, backward))
        return out


def backward(tape: Tape, loss: Tensor) -> None:
    """Seed d(loss)/d(loss)=1 and run all records in reverse order.

    Gradients accumulate into each Tensor's ``.grad``; tensors never
    reached from the loss keep ``grad=None`` and their records are
    skipped (their parameters receive no contribution, i.e. zero).
    """
    if loss.data.ndim != 0 and loss.data.size != 1:
        raise ValueError("loss must be a scalar")
    if not any(r.out is loss for r in tape.records):
        raise ValueError("loss tensor was not produced on this tape")
    loss.grad = np.ones_like(loss.data)
    for rec in reversed(tape.records):
        if rec.out.grad is not None:
            rec.backward(rec.out.grad)


# ---------------------------------------------------------------------------
# primitives


def add(tape: Tape, a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data)

    def bwd(g):
        a.accumulate(g)
        b.accumulate(g)

    return tape.add("add", out, bwd)


def scale(tape: Tape, x: Tensor, s: Tensor) -> Tensor:
    """Multiply a tensor by a scalar (0-d) tensor."""
    out = Tensor(x.data * s.data)

    def bwd(g):
        x.accumulate(g * s.data)
        s.accumulate(np.sum(g * x.data, dtype=x.data.dtype))

    return tape.add("scale", out, bwd)


def index(tape: Tape, vec: Tensor, i: int) -> Tensor:
    out = Tensor(vec.data[i])

    def bwd(g):
        if vec.grad is None:
            vec.grad = np.zeros_like(vec.data)
        vec.grad[i] += g

    return tape.add("index", out, bwd)


def tanh(tape: Tape, x: Tensor) -> Tensor:
    t = np.tanh(x.data)
    out = Tensor(t)

    def bwd(g):
        x.accumulate(g * (1.0 - t * t))

    return tape.add("tanh", out, bwd)


def relu(tape: Tape, x: Tensor) -> Tensor:
    mask = x.data > 0
    out = Tensor(np.where(mask, x.data, 0))

    def bwd(g):
        x.accumulate(g * mask)

    return tape.add("relu", out, bwd)


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    # xp: (B, C, Hp, Wp) -> (B, C, OH, OW, kh, kw)
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    return win[:, :, ::stride, ::stride, :, :]


def conv2d(tape: Tape, x: Tensor, k: Tensor, stride: int = 1,
           padding: int | None = None) -> Tensor:
    """2-D convolution (cross-correlation), NCHW input, (OC,C,kh,kw) kernel.

    Default padding keeps the spatial size for stride 1 ("same" for odd
    kernels); pass padding explicitly for strided reductions.
    """
    oc, ic, kh, kw = k.data.shape
    if padding is None:
        padding = kh // 2
    b, c, h, w = x.data.shape
    if c != ic:
        raise ValueError(f"conv2d channel mismatch: input {c}, kernel {ic}")
    if kh == 1 and kw == 1 and stride == 1 and padding == 0:
        return _conv1x1(tape, x, k)
    hp, wp = h + 2 * padding, w + 2 * padding
    if hp < kh or wp < kw:
        raise ValueError("input too small for kernel")
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    cols = _im2col(xp, kh, kw, stride)  # (B, C, OH, OW, kh, kw)
    # sum over C, kh, kw
    out_data = np.tensordot(cols, k.data, axes=([1, 4, 5], [1, 2, 3]))
    out_data = np.ascontiguousarray(out_data.transpose(0, 3, 1, 2))
    out = Tensor(out_data)
    oh, ow = out_data.shape[2], out_data.shape[3]

    def bwd(g):
        # g: (B, OC, OH, OW)
        dk = np.tensordot(g, cols, axes=([0, 2, 3], [0, 2, 3]))
        k.accumulate(dk.astype(k.data.dtype, copy=False))
        dcols = np.tensordot(g, k.data, axes=([1], [0]))  # (B,OH,OW,C,kh,kw)
        dcols = dcols.transpose(0, 3, 1, 2, 4, 5)  # (B,C,OH,OW,kh,kw)
        dxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                dxp[:, :, i:i + stride * oh:stride,
                    j:j + stride * ow:stride] += dcols[:, :, :, :, i, j]
        if padding:
            dxp = dxp[:, :, padding:padding + h, padding:padding + w]
        x.accumulate(dxp)

    return tape.add("conv2d", out, bwd)


def _conv1x1(tape: Tape, x: Tensor, k: Tensor) -> Tensor:
    b, c, h, w = x.data.shape
    oc = k.data.shape[0]
    km = k.data.reshape(oc, c)
    xm = x.data.transpose(0, 2, 3, 1).reshape(-1, c)
    out = Tensor(np.ascontiguousarray(
        (xm @ km.T).reshape(b, h, w, oc).transpose(0, 3, 1, 2)))

    def bwd(g):
        gm = g.transpose(0, 2, 3, 1).reshape(-1, oc)
        k.accumulate((gm.T @ xm).reshape(k.data.shape).astype(k.data.dtype, copy=False))
        x.accumulate((gm @ km).reshape(b, h, w, c).transpose(0, 3, 1, 2))

    return tape.add("conv1x1", out, bwd)


def add_channel_bias(tape: Tape, x: Tensor, b: Tensor) -> Tensor:
    out = Tensor(x.data + b.data.reshape(1, -1, 1, 1))

    def bwd(g):
        x.accumulate(g)
        b.accumulate(g.sum(axis=(0, 2, 3)).astype(b.data.dtype, copy=False))

    return tape.add("bias", out, bwd)


class BatchNormState:
    """Running statistics for one batch-norm layer (not trainable)."""

    __slots__ = ("mean", "var", "momentum")

    def __init__(self, channels: int, momentum: float = 0.1, dtype=np.float64):
        self.mean = np.zeros(channels, dtype=dtype)
        self.var = np.ones(channels, dtype=dtype)
        self.momentum = momentum


def batch_norm(tape: Tape, x: Tensor, gamma: Tensor, beta: Tensor,
               state: BatchNormState, training: bool, eps: float = 1e-5) -> Tensor:
    """Per-channel batch norm over (B, H, W); updates running stats in
    train mode, consumes them in eval mode."""
    b, c, h, w = x.data.shape
    axes = (0, 2, 3)
    m = b * h * w
    if training:
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        state.mean = (1 - state.momentum) * state.mean + state.momentum * mu
        denom = max(m - 1, 1)
        state.var = (1 - state.momentum) * state.var + state.momentum * var * m / denom
        inv = 1.0 / np.sqrt(var + eps)
        xhat = (x.data - mu.reshape(1, c, 1, 1)) * inv.reshape(1, c, 1, 1)
    else:
        inv = 1.0 / np.sqrt(state.var + eps)
        xhat = (x.data - state.mean.reshape(1, c, 1, 1)) * inv.reshape(1, c, 1, 1)
    out = Tensor(xhat * gamma.data.reshape(1, c, 1, 1) + beta.data.reshape(1, c, 1, 1))

    def bwd(g):
        gamma.accumulate(np.sum(g * xhat, axis=axes).astype(gamma.data.dtype, copy=False))
        beta.accumulate(np.sum(g, axis=axes).astype(beta.data.dtype, copy=False))
        gxhat = g * gamma.data.reshape(1, c, 1, 1)
        if training:
            # full backward through the batch statistics
            t1 = gxhat
            t2 = np.mean(gxhat, axis=axes).reshape(1, c, 1, 1)
            t3 = xhat * np.mean(gxhat * xhat, axis=axes).reshape(1, c, 1, 1)
            dx = (t1 - t2 - t3) * inv.reshape(1, c, 1, 1)
        else:
            dx = gxhat * inv.reshape(1, c, 1, 1)
        x.accumulate(dx)

    return tape.add("batch_norm", out, bwd)


def global_avg_pool(tape: Tape, x: Tensor) -> Tensor:
    b, c, h, w = x.data.shape
    out = Tensor(x.data.mean(axis=(2, 3)))

    def bwd(g):
        x.accumulate(np.broadcast_to(g.reshape(b, c, 1, 1) / (h * w), x.data.shape))

    return tape.add("gap", out, bwd)


def linear(tape: Tape, x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    out = Tensor(x.data @ w.data + b.data)

    def bwd(g):
        w.accumulate((x.data.T @ g).astype(w.data.dtype, copy=False))
        b.accumulate(g.sum(axis=0).astype(b.data.dtype, copy=False))
        x.accumulate(g @ w.data.T)

    return tape.add("linear", out, bwd)


def softmax_cross_entropy(tape: Tape, logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean cross-entropy over the batch; labels are integer class ids."""
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    ez = np.exp(z)
    p = ez / ez.sum(axis=1, keepdims=True)
    b = z.shape[0]
    nll = -np.log(np.maximum(p[np.arange(b), labels], 1e-30))
    out = Tensor(np.asarray(nll.mean(), dtype=logits.data.dtype))

    def bwd(g):
        dz = p.copy()
        dz[np.arange(b), labels] -= 1.0
        logits.accumulate(dz * (g / b))

    return tape.add("cross_entropy", out, bwd)


def abs_sum(tape: Tape, x: Tensor) -> Tensor:
    """Sum of absolute values; subgradient at 0 taken as 0."""
    s = np.sign(x.data)
    out = Tensor(np.asarray(np.abs(x.data).sum(), dtype=x.data.dtype))

    def bwd(g):
        x.accumulate(g * s)

    return tape.add("abs_sum", out, bwd)


def weighted_sum(tape: Tape, srcs: list[Tensor], weights: Tensor,
                 idxs: list[int]) -> Tensor:
    """Sum of equally-shaped tensors, each scaled by ``weights[idxs[i]]``.

    One record for a whole in-edge aggregation group; gradients flow to
    every source and to the selected weight entries.
    """
    stacked = np.stack([s.data for s in srcs])
    w = weights.data[idxs]
    out = Tensor(np.tensordot(w, stacked, axes=1))

    def bwd(g):
        dw = np.tensordot(stacked.reshape(len(srcs), -1), g.reshape(-1), axes=1)
        if weights.grad is None:
            weights.grad = np.zeros_like(weights.data)
        np.add.at(weights.grad, idxs, dw.astype(weights.data.dtype, copy=False))
        for i, s in enumerate(srcs):
            s.accumulate(g * w[i])

    return tape.add("weighted_sum", out, bwd)


def sum_tensors(tape: Tape, ts: list[Tensor]) -> Tensor:
    """Sum of equally-shaped tensors (edge aggregation helper)."""
    out = Tensor(np.sum([t.data for t in ts], axis=0))

    def bwd(g):
        for t in ts:
            t.accumulate(g)

    return tape.add("sum", out, bwd)


def mul_const(tape: Tape, x: Tensor, c: float) -> Tensor:
    out = Tensor(x.data * c)

    def bwd(g):
        x.accumulate(g * c)

    return tape.add("mul_const", out, bwd)


def add_scalars(tape: Tape, a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data)

    def bwd(g):
        a.accumulate(g)
        b.accumulate(g)

    return tape.add("add_scalars", out, bwd)


# ---------------------------------------------------------------------------
# closed-form gradient of the sparsity penalty


def grad_of_sparsity(edges: EdgeParams) -> np.ndarray:
    """d/dw of sum |tanh w|: sign(tanh w)(1 - tanh^2 w); 0 at w=0."""
    t = np.tanh(edges.raw)
    return np.sign(t) * (1.0 - t * t)


def sparsity_value_and_grad(raw: np.ndarray) -> tuple[float, np.ndarray]:
    t = np.tanh(raw)
    return float(np.abs(t).sum()), np.sign(t) * (1.0 - t * t)


def finite_difference(f, x: np.ndarray, eps: float = 1e-3) -> np.ndarray:
    """Central finite differences of a scalar function, one entry at a time.

    The reference oracle for gradient checks; independent of the tape.
    """
    g = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = f()
        flat[i] = orig - eps
        fm = f()
        flat[i] = orig
        gf[i] = (fp - fm) / (2 * eps)
    return g
