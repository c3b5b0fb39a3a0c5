"""Staged directed acyclic graphs and their trainable edge weights.

Nodes are dense integers 0..n-1.  Every graph has a distinguished input
node (in-degree 0) and output node (out-degree 0), and each node belongs
to a stage; edges never go from a higher stage to a lower one.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

Edge = tuple[int, int]

#: raw weight giving an effective (tanh) weight of exactly 0.5
INIT_RAW_WEIGHT = math.atanh(0.5)


@dataclass(frozen=True)
class DagSpec:
    """A staged DAG.  Immutable after construction; validated eagerly."""

    node_count: int
    stage_of: tuple[int, ...]
    edges: tuple[Edge, ...]
    input_node: int = 0
    output_node: int = -1

    def __post_init__(self):
        if self.output_node < 0:
            object.__setattr__(self, "output_node", self.node_count - 1)
        # canonical sorted edge order doubles as the edge-id order
        object.__setattr__(self, "edges", tuple(sorted(set(map(tuple, self.edges)))))
        object.__setattr__(self, "stage_of", tuple(self.stage_of))
        self._validate()

    def _validate(self):
        n = self.node_count
        if n < 2:
            raise ValueError(f"need at least 2 nodes, got {n}")
        if len(self.stage_of) != n:
            raise ValueError("stage_of length must equal node_count")
        for u, v in self.edges:
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u},{v}) out of node range")
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if self.stage_of[u] > self.stage_of[v]:
                raise ValueError(f"edge ({u},{v}) goes to a lower stage")
        if any(v == self.input_node for _, v in self.edges):
            raise ValueError("input node must have in-degree 0")
        if any(u == self.output_node for u, _ in self.edges):
            raise ValueError("output node must have out-degree 0")
        topo_order(self)  # raises on cycles

    @property
    def num_stages(self) -> int:
        return max(self.stage_of) + 1

    def in_edges(self, v: int) -> list[Edge]:
        return [e for e in self.edges if e[1] == v]

    def out_edges(self, u: int) -> list[Edge]:
        return [e for e in self.edges if e[0] == u]

    def edge_index(self) -> dict[Edge, int]:
        return {e: i for i, e in enumerate(self.edges)}


@dataclass(frozen=True)
class EdgeParams:
    """Raw trainable weight per edge, aligned with ``graph.edges`` order.

    The effective weight of an edge is tanh(raw); analysis code only ever
    looks at its magnitude.
    """

    edges: tuple[Edge, ...]
    raw: np.ndarray = field(compare=False)

    def __post_init__(self):
        object.__setattr__(self, "raw", np.asarray(self.raw, dtype=np.float64))
        self.raw.setflags(write=False)
        if self.raw.shape != (len(self.edges),):
            raise ValueError("raw weight vector does not match edge count")

    def raw_of(self, e: Edge) -> float:
        return float(self.raw[self.edges.index(e)])

    def effective(self, e: Edge) -> float:
        return math.tanh(self.raw_of(e))

    def magnitudes(self) -> np.ndarray:
        """|tanh raw| for every edge, in edge order."""
        return np.abs(np.tanh(self.raw))

    def restrict(self, kept: tuple[Edge, ...]) -> "EdgeParams":
        """Sub-view holding only ``kept`` edges (original raw values)."""
        idx = self.edges.index
        return EdgeParams(tuple(kept), self.raw[[idx(e) for e in kept]])


def build_full_dag(node_count: int, num_stages: int = 3) -> DagSpec:
    """Fully connected staged DAG: all edges i<j, contiguous equal stages."""
    if node_count < 2:
        raise ValueError(f"node_count must be >= 2, got {node_count}")
    if num_stages < 1:
        raise ValueError(f"num_stages must be >= 1, got {num_stages}")
    if node_count % num_stages != 0:
        raise ValueError(
            f"node_count {node_count} not divisible by num_stages {num_stages}"
        )
    per = node_count // num_stages
    stage_of = tuple(i // per for i in range(node_count))
    edges = tuple(
        (i, j) for i in range(node_count) for j in range(i + 1, node_count)
    )
    return DagSpec(node_count, stage_of, edges, 0, node_count - 1)


def topo_order(g: DagSpec) -> list[int]:
    """Kahn's algorithm with ties broken by smallest node id (deterministic)."""
    import heapq

    indeg = [0] * g.node_count
    succ: list[list[int]] = [[] for _ in range(g.node_count)]
    for u, v in g.edges:
        indeg[v] += 1
        succ[u].append(v)
    heap = [i for i in range(g.node_count) if indeg[i] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        u = heapq.heappop(heap)
        order.append(u)
        for v in succ[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                heapq.heappush(heap, v)
    if len(order) != g.node_count:
        raise ValueError("graph contains a cycle")
    return order


def init_edge_params(g: DagSpec) -> EdgeParams:
    """Constant init: every effective weight starts at exactly 0.5."""
    return EdgeParams(g.edges, np.full(len(g.edges), INIT_RAW_WEIGHT))


def is_connected(g: DagSpec) -> bool:
    """True iff at least one input->output path exists."""
    succ: dict[int, list[int]] = {}
    for u, v in g.edges:
        succ.setdefault(u, []).append(v)
    seen = {g.input_node}
    stack = [g.input_node]
    while stack:
        u = stack.pop()
        if u == g.output_node:
            return True
        for v in succ.get(u, ()):
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return False


def sparsity_loss(edges: EdgeParams) -> float:
    """Sum of |tanh raw| over all edges."""
    return float(edges.magnitudes().sum())


# ---------------------------------------------------------------------------
# DOT interchange

def to_dot(g: DagSpec, edges: EdgeParams | None = None, name: str = "dag") -> str:
    """DOT text with node attribute "stage" and edge attribute "w"."""
    lines = [f"digraph {name} {{"]
    for v in range(g.node_count):
        lines.append(f'  {v} [stage={g.stage_of[v]}];')
    for e in g.edges:
        w = edges.effective(e) if edges is not None else 0.0
        lines.append(f'  {e[0]} -> {e[1]} [w={w:.6f}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


_NODE_RE = re.compile(r"^\s*(\d+)\s*\[stage=(\d+)\]")
_EDGE_RE = re.compile(r"^\s*(\d+)\s*->\s*(\d+)\s*\[w=([-0-9.eE+]+)\]")


def from_dot(text: str) -> tuple[DagSpec, EdgeParams]:
    """Parse the DOT dialect written by :func:`to_dot`."""
    stages: dict[int, int] = {}
    edge_w: dict[Edge, float] = {}
    for line in text.splitlines():
        m = _NODE_RE.match(line)
        if m:
            stages[int(m.group(1))] = int(m.group(2))
            continue
        m = _EDGE_RE.match(line)
        if m:
            edge_w[(int(m.group(1)), int(m.group(2)))] = float(m.group(3))
    if not stages:
        raise ValueError("no nodes found in DOT input")
    n = max(stages) + 1
    if sorted(stages) != list(range(n)):
        raise ValueError("DOT nodes are not dense 0..n-1")
    es = tuple(sorted(edge_w))
    g = DagSpec(n, tuple(stages[i] for i in range(n)), es)
    raw = np.array([math.atanh(max(-0.999999, min(0.999999, edge_w[e]))) for e in g.edges])
    return g, EdgeParams(g.edges, raw)
