"""Build a feed-forward tensor network from a staged DAG.

Every node is an aggregate -> ReLU -> Conv -> BatchNorm block with a
Conv-1x1 residual; cross-stage edges read the source node's output
through a chain of stride-2 reduce steps (shared per source node so the
downsampled activation is computed once and reused by all targets at the
same stage gap).  The output node feeds global average pooling and a
linear head.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import BatchNormState, Tape, Tensor
from .dag import DagSpec, EdgeParams, topo_order


#: gain multiplier on the He init of the residual 1x1 convs
RESIDUAL_INIT_SCALE = 0.1


@dataclass(frozen=True)
class NetConfig:
    base_channels: int
    input_resolution: int
    input_channels: int
    num_classes: int
    kernel_size: int = 3

    def __post_init__(self):
        if self.base_channels < 1 or self.input_resolution < 1:
            raise ValueError("channels and resolution must be positive")
        if self.kernel_size % 2 != 1:
            raise ValueError("kernel_size must be odd")

    def stage_channels(self, s: int) -> int:
        return self.base_channels * (2 ** s)

    def stage_resolution(self, s: int) -> int:
        r = self.input_resolution
        for i in range(s):
            if r % 2 != 0:
                raise ValueError(
                    f"resolution {r} at stage {i} is not divisible by 2"
                )
            r //= 2
        if r < 1:
            raise ValueError(f"resolution underflow at stage {s}")
        return r


class NetworkParams:
    """All block parameters keyed by a flat name; edge weights live apart."""

    def __init__(self):
        self.tensors: dict[str, Tensor] = {}
        self.bn_states: dict[str, BatchNormState] = {}

    def add(self, name: str, data: np.ndarray) -> Tensor:
        t = Tensor(data, name=name)
        self.tensors[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def zero_grad(self):
        for t in self.tensors.values():
            t.grad = None

    def num_scalars(self) -> int:
        return sum(t.data.size for t in self.tensors.values())

    def subset(self, node_map: dict[int, int]) -> "NetworkParams":
        """Re-key node-scoped entries from original ids to new ids.

        ``node_map`` maps new (pruned-graph) node id -> original node id.
        Head and stem entries are shared as-is; tensors are shared, not
        copied, so the subset evaluates with the original weights.
        """
        inv = {}
        out = NetworkParams()
        for new, orig in node_map.items():
            inv[orig] = new
        for name, t in self.tensors.items():
            out_name = _rekey(name, inv)
            if out_name is not None:
                out.tensors[out_name] = t
        for name, s in self.bn_states.items():
            out_name = _rekey(name, inv)
            if out_name is not None:
                out.bn_states[out_name] = s
        return out


def _rekey(name: str, inv: dict[int, int]) -> str | None:
    if not name.startswith("node"):
        return name
    head, rest = name.split(".", 1)
    orig = int(head[4:])
    if orig not in inv:
        return None
    return f"node{inv[orig]}.{rest}"


def _max_gap(g: DagSpec, u: int) -> int:
    gaps = [g.stage_of[v] - g.stage_of[u] for (uu, v) in g.edges if uu == u]
    return max(gaps, default=0)


def build_network(g: DagSpec, cfg: NetConfig, seed: int,
                  dtype=np.float64) -> NetworkParams:
    """Allocate and He-initialize every parameter tensor from one seed."""
    # validate the resolution schedule up front, naming the failing stage
    for s in range(g.num_stages):
        cfg.stage_resolution(s)
    rng = np.random.default_rng(seed)
    p = NetworkParams()
    k = cfg.kernel_size

    def he_conv(name, oc, ic, kh, kw):
        fan_in = ic * kh * kw
        p.add(name, (rng.standard_normal((oc, ic, kh, kw))
                     * np.sqrt(2.0 / fan_in)).astype(dtype))

    def bn(name, c):
        p.add(name + ".gamma", np.ones(c, dtype=dtype))
        p.add(name + ".beta", np.zeros(c, dtype=dtype))
        p.bn_states[name] = BatchNormState(c, dtype=dtype)

    for v in range(g.node_count):
        c = cfg.stage_channels(g.stage_of[v])
        if v == g.input_node:
            he_conv("stem.conv", c, cfg.input_channels, k, k)
            bn("stem.bn", c)
        else:
            he_conv(f"node{v}.conv", c, c, k, k)
            bn(f"node{v}.bn", c)
            # damped init: the residual path is the only unnormalized route
            # through a node, and with constant 0.5 edge weights a full-gain
            # chain of them diverges geometrically on dense graphs
            he_conv(f"node{v}.res", c, c, 1, 1)
            p[f"node{v}.res"].data *= RESIDUAL_INIT_SCALE
            p.add(f"node{v}.res_b", np.zeros(c, dtype=dtype))
        for d in range(1, _max_gap(g, v) + 1):
            ic, oc = c * 2 ** (d - 1), c * 2 ** d
            he_conv(f"node{v}.red{d}.conv", oc, ic, 3, 3)
            bn(f"node{v}.red{d}.bn", oc)
    c_out = cfg.stage_channels(g.stage_of[g.output_node])
    p.add("head.W", (rng.standard_normal((c_out, cfg.num_classes))
                     * np.sqrt(1.0 / c_out)).astype(dtype))
    p.add("head.b", np.zeros(cfg.num_classes, dtype=dtype))
    return p


def param_count(g: DagSpec, cfg: NetConfig) -> int:
    """Scalar parameter count (edge weights excluded, 1 per edge apart)."""
    k = cfg.kernel_size
    total = 0
    for v in range(g.node_count):
        c = cfg.stage_channels(g.stage_of[v])
        if v == g.input_node:
            total += c * cfg.input_channels * k * k + 2 * c
        else:
            total += c * c * k * k + 2 * c          # conv + norm affine
            total += c * c + c                       # 1x1 residual + bias
        for d in range(1, _max_gap(g, v) + 1):
            ic, oc = c * 2 ** (d - 1), c * 2 ** d
            total += oc * ic * 9 + 2 * oc
    c_out = cfg.stage_channels(g.stage_of[g.output_node])
    total += c_out * cfg.num_classes + cfg.num_classes
    return total


def fit_channels(g: DagSpec, cfg: NetConfig, target_params: int) -> int:
    """Largest base channel count whose parameter count fits the budget."""

    def count(c):
        return param_count(g, NetConfig(c, cfg.input_resolution,
                                        cfg.input_channels, cfg.num_classes,
                                        cfg.kernel_size))

    if count(1) > target_params:
        warnings.warn("target parameter budget unreachable; using C=1")
        return 1
    hi = 1
    while count(hi) <= target_params:
        hi *= 2
    lo = hi // 2
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if count(mid) <= target_params:
            lo = mid
        else:
            hi = mid
    return lo


def edge_raw_tensor(edges: EdgeParams, dtype=np.float64) -> Tensor:
    """Wrap edge raw weights as a trainable leaf tensor."""
    return Tensor(edges.raw.astype(dtype).copy(), name="edges.raw")


def forward(g: DagSpec, cfg: NetConfig, params: NetworkParams,
            edge_raw: Tensor, x: np.ndarray, training: bool,
            tape: Tape | None = None) -> Tensor:
    """Run the network on an image batch (B, C_in, H, W); returns logits.

    ``edge_raw`` is the raw edge-weight vector aligned with ``g.edges``;
    effective weights tanh(raw) are applied to each in-edge contribution.
    """
    if tape is None:
        tape = Tape()
    b, cin, h, w = x.shape
    if cin != cfg.input_channels or h != cfg.input_resolution or w != cfg.input_resolution:
        raise ValueError("batch shape does not match the network config")
    dtype = params["head.W"].data.dtype
    xt = Tensor(np.asarray(x, dtype=dtype))
    eff = ag.tanh(tape, edge_raw)
    eidx = g.edge_index()
    outs: dict[int, Tensor] = {}
    reduced: dict[tuple[int, int], Tensor] = {}

    def reduce_to(u: int, gap: int) -> Tensor:
        key = (u, gap)
        if key not in reduced:
            src = outs[u] if gap == 1 else reduce_to(u, gap - 1)
            name = f"node{u}.red{gap}"
            hdl = ag.conv2d(tape, src, params[name + ".conv"], stride=2, padding=1)
            reduced[key] = ag.batch_norm(
                tape, hdl, params[name + ".bn.gamma"], params[name + ".bn.beta"],
                params.bn_states[name + ".bn"], training)
        return reduced[key]

    for v in topo_order(g):
        c = cfg.stage_channels(g.stage_of[v])
        res = cfg.stage_resolution(g.stage_of[v])
        if v == g.input_node:
            hdl = ag.conv2d(tape, xt, params["stem.conv"])
            out_v = ag.batch_norm(tape, hdl, params["stem.bn.gamma"],
                                  params["stem.bn.beta"],
                                  params.bn_states["stem.bn"], training)
        else:
            srcs, idxs = [], []
            for (uu, vv) in g.in_edges(v):
                gap = g.stage_of[vv] - g.stage_of[uu]
                srcs.append(outs[uu] if gap == 0 else reduce_to(uu, gap))
                idxs.append(eidx[(uu, vv)])
            if srcs:
                agg = ag.weighted_sum(tape, srcs, eff, idxs)
            else:
                agg = Tensor(np.zeros((b, c, res, res), dtype=dtype))
            hdl = ag.relu(tape, agg)
            hdl = ag.conv2d(tape, hdl, params[f"node{v}.conv"])
            hdl = ag.batch_norm(tape, hdl, params[f"node{v}.bn.gamma"],
                                params[f"node{v}.bn.beta"],
                                params.bn_states[f"node{v}.bn"], training)
            resid = ag.conv2d(tape, agg, params[f"node{v}.res"], padding=0)
            resid = ag.add_channel_bias(tape, resid, params[f"node{v}.res_b"])
            out_v = ag.add(tape, hdl, resid)
        if not np.isfinite(out_v.data).all():
            raise FloatingPointError(f"non-finite activation at node {v}")
        outs[v] = out_v

    pooled = ag.global_avg_pool(tape, outs[g.output_node])
    logits = ag.linear(tape, pooled, params["head.W"], params["head.b"])
    return logits


def predict(g: DagSpec, cfg: NetConfig, params: NetworkParams,
            edges: EdgeParams, x: np.ndarray) -> np.ndarray:
    """Eval-mode logits from frozen edge params (no gradient tracking)."""
    raw = edge_raw_tensor(edges, dtype=params["head.W"].data.dtype)
    return forward(g, cfg, params, raw, x, training=False).data


def accuracy(g: DagSpec, cfg: NetConfig, params: NetworkParams,
             edges: EdgeParams, images: np.ndarray, labels: np.ndarray,
             batch_size: int = 256) -> float:
    """Eval-mode top-1 accuracy over a labelled image set."""
    hits = 0
    for i in range(0, len(images), batch_size):
        logits = predict(g, cfg, params, edges, images[i:i + batch_size])
        hits += int((logits.argmax(axis=1) == labels[i:i + batch_size]).sum())
    return hits / len(images)
