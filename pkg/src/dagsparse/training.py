"""SGD training loop: cross-entropy plus the tanh-L1 edge penalty.

Momentum SGD with a step learning-rate schedule.  Weight decay applies to
the block parameters only; the edge raw weights are regularized by the
sparsity term instead (an override flag restores global decay).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import autograd as ag
from . import network as net
from .dag import DagSpec, EdgeParams, init_edge_params, is_connected


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    lr: float = 0.1
    momentum: float = 0.9
    batch_size: int = 128
    weight_decay: float = 1e-4
    lr_drop_epochs: tuple[int, ...] = (80, 90)
    lr_drop_factor: float = 10.0
    lambda_sparsity: float = 1e-3
    seed: int = 0
    weight_decay_on_edges: bool = False
    snapshot_every: int = 50
    dtype: str = "float32"
    grad_clip: float | None = None

    def __post_init__(self):
        if self.epochs < 1 or self.lr <= 0 or self.batch_size < 1:
            raise ValueError("epochs, lr and batch_size must be positive")
        if self.lr_drop_factor <= 0:
            raise ValueError("lr_drop_factor must be positive")
        for e in self.lr_drop_epochs:
            if not 1 <= e <= self.epochs:
                raise ValueError(f"lr drop epoch {e} outside [1, {self.epochs}]")

    def lr_at(self, epoch: int) -> float:
        drops = sum(1 for d in self.lr_drop_epochs if epoch >= d)
        return self.lr / self.lr_drop_factor ** drops


@dataclass
class TrainLog:
    train_loss: list[float] = field(default_factory=list)
    sparsity_loss: list[float] = field(default_factory=list)
    test_accuracy: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    snapshot_steps: list[int] = field(default_factory=list)
    snapshots: list[np.ndarray] = field(default_factory=list)

    def epoch_rows(self):
        for i in range(len(self.train_loss)):
            yield (i + 1, self.lr[i], self.train_loss[i],
                   self.sparsity_loss[i], self.test_accuracy[i])


@dataclass
class TrainState:
    """Everything needed to continue a run bit-identically."""

    epochs_done: int
    step: int
    params: net.NetworkParams
    raw: np.ndarray
    velocities: dict[str, np.ndarray]
    rng_state: dict
    log: TrainLog


def train(g: DagSpec, cfg: net.NetConfig, tcfg: TrainConfig, data,
          edge_init: EdgeParams | None = None,
          resume: TrainState | None = None,
          on_epoch_end=None) -> tuple[net.NetworkParams, EdgeParams, TrainLog]:
    """Run the full regime on ``data`` (needs train/test image+label arrays).

    ``on_epoch_end(state)`` fires after every epoch with the live
    :class:`TrainState` (used for checkpointing).  Pass ``resume`` to
    continue a checkpointed run; the continuation matches an
    uninterrupted run exactly.
    """
    dtype = np.dtype(tcfg.dtype)
    if resume is None:
        params = net.build_network(g, cfg, seed=tcfg.seed, dtype=dtype)
        if edge_init is None:
            edge_init = init_edge_params(g)
        raw = edge_init.raw.astype(dtype).copy()
        velocities = {}
        rng = np.random.default_rng(tcfg.seed)
        log = TrainLog()
        start_epoch, step = 1, 0
    else:
        params = resume.params
        raw = resume.raw
        velocities = resume.velocities
        rng = np.random.default_rng()
        rng.bit_generator.state = resume.rng_state
        log = resume.log
        start_epoch, step = resume.epochs_done + 1, resume.step

    raw_t = ag.Tensor(raw, name="edges.raw")
    n_train = len(data.train_images)
    lam = tcfg.lambda_sparsity

    def vel(name, like):
        if name not in velocities:
            velocities[name] = np.zeros_like(like)
        return velocities[name]

    for epoch in range(start_epoch, tcfg.epochs + 1):
        lr = tcfg.lr_at(epoch)
        perm = rng.permutation(n_train)
        losses = []
        for lo in range(0, n_train, tcfg.batch_size):
            idx = perm[lo:lo + tcfg.batch_size]
            xb = data.train_images[idx]
            yb = data.train_labels[idx]
            params.zero_grad()
            raw_t.grad = None
            tape = ag.Tape()
            logits = net.forward(g, cfg, params, raw_t, xb, training=True,
                                 tape=tape)
            loss = ag.softmax_cross_entropy(tape, logits, yb)
            if not math.isfinite(float(loss.data)):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch}, step {step}")
            ag.backward(tape, loss)
            losses.append(float(loss.data))

            # sparsity term enters through its closed-form gradient
            if raw_t.grad is None:
                raw_t.grad = np.zeros_like(raw_t.data)
            if lam != 0.0:
                _, gs = ag.sparsity_value_and_grad(raw_t.data)
                raw_t.grad += (lam * gs).astype(dtype, copy=False)
            if tcfg.weight_decay_on_edges:
                raw_t.grad += tcfg.weight_decay * raw_t.data

            if tcfg.grad_clip is not None:
                sq = float((raw_t.grad ** 2).sum())
                sq += sum(float((t.grad ** 2).sum())
                          for t in params.tensors.values() if t.grad is not None)
                norm = math.sqrt(sq)
                if norm > tcfg.grad_clip:
                    fac = tcfg.grad_clip / norm
                    raw_t.grad *= fac
                    for t in params.tensors.values():
                        if t.grad is not None:
                            t.grad *= fac

            for name, t in params.tensors.items():
                if t.grad is None:
                    continue
                gr = t.grad + tcfg.weight_decay * t.data
                v = vel(name, t.data)
                v *= tcfg.momentum
                v -= lr * gr
                t.data += v
            v = vel("edges.raw", raw_t.data)
            v *= tcfg.momentum
            v -= lr * raw_t.grad
            raw_t.data += v

            step += 1
            if tcfg.snapshot_every and step % tcfg.snapshot_every == 0:
                log.snapshot_steps.append(step)
                log.snapshots.append(np.abs(np.tanh(raw_t.data)).astype(np.float64))

        edges_now = EdgeParams(g.edges, raw_t.data.astype(np.float64))
        log.train_loss.append(float(np.mean(losses)))
        log.sparsity_loss.append(float(edges_now.magnitudes().sum()))
        log.test_accuracy.append(net.accuracy(
            g, cfg, params, edges_now, data.test_images, data.test_labels))
        log.lr.append(lr)
        if on_epoch_end is not None:
            on_epoch_end(TrainState(epoch, step, params, raw_t.data,
                                    velocities, rng.bit_generator.state, log))

    final_edges = EdgeParams(g.edges, raw_t.data.astype(np.float64))
    return params, final_edges, log


def retrain(pruned_g: DagSpec, cfg: net.NetConfig, tcfg: TrainConfig, data,
            new_seed: int, lambda_sparsity: float = 0.0,
            fit_param_target: int | None = None,
            ) -> tuple[net.NetworkParams, EdgeParams, TrainLog, net.NetConfig]:
    """Train a pruned topology from scratch with a fresh initialization.

    Edge raws restart at artanh(0.5) on the retained edges; the sparsity
    coefficient defaults to 0 since the topology is already chosen.  With
    ``fit_param_target`` the base channel count is refit to that budget.
    """
    if not is_connected(pruned_g):
        raise ValueError("pruned graph has no input->output path")
    if fit_param_target is not None:
        c = net.fit_channels(pruned_g, cfg, fit_param_target)
        cfg = replace(cfg, base_channels=c)
    tcfg = replace(tcfg, seed=new_seed, lambda_sparsity=lambda_sparsity)
    params, edges, log = train(pruned_g, cfg, tcfg, data,
                               edge_init=init_edge_params(pruned_g))
    return params, edges, log, cfg
