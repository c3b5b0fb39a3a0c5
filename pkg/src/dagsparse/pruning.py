"""Magnitude thresholding, dead-path excision and threshold sweeps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import network as net
from .dag import DagSpec, Edge, EdgeParams, is_connected

#: threshold used throughout the structural analyses
DEFAULT_TAU = 0.006
#: sweep grid: 0.001..0.012 in steps of 0.001 (0.008 is on the grid)
DEFAULT_TAU_GRID = tuple(round(0.001 * i, 3) for i in range(1, 13))


@dataclass(frozen=True)
class PrunedGraph:
    graph: DagSpec                      # renumbered to dense 0..m-1
    node_map: tuple[int, ...]           # new node id -> original node id
    retained_edges: tuple[Edge, ...]    # in original node ids
    tau: float
    disconnected: bool

    def original_nodes(self) -> tuple[int, ...]:
        return self.node_map


def threshold_edges(g: DagSpec, edges: EdgeParams, tau: float) -> tuple[Edge, ...]:
    """Edges with |tanh raw| >= tau (strictly smaller magnitudes go)."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    mags = edges.magnitudes()
    idx = {e: i for i, e in enumerate(edges.edges)}
    return tuple(e for e in g.edges if mags[idx[e]] >= tau)


def excise_dead_paths(g: DagSpec, kept_edges: tuple[Edge, ...],
                      tau: float = 0.0) -> PrunedGraph:
    """Iteratively drop interior nodes with no inputs or no outputs.

    Kahn-style fixed point: removing a node removes its incident edges,
    which can orphan further nodes.  The input and output nodes always
    survive; if no input->output path remains the result is flagged
    disconnected rather than treated as an error.
    """
    edges = set(kept_edges)
    alive = set(range(g.node_count))
    changed = True
    while changed:
        changed = False
        indeg = {v: 0 for v in alive}
        outdeg = {v: 0 for v in alive}
        for u, v in edges:
            outdeg[u] += 1
            indeg[v] += 1
        for v in sorted(alive):
            if v in (g.input_node, g.output_node):
                continue
            if indeg[v] == 0 or outdeg[v] == 0:
                alive.discard(v)
                edges = {e for e in edges if v not in e}
                changed = True
    node_map = tuple(sorted(alive))
    renum = {orig: new for new, orig in enumerate(node_map)}
    sub = DagSpec(
        len(node_map),
        tuple(g.stage_of[orig] for orig in node_map),
        tuple((renum[u], renum[v]) for u, v in edges),
        renum[g.input_node],
        renum[g.output_node],
    )
    return PrunedGraph(sub, node_map, tuple(sorted(edges)), tau,
                       disconnected=not is_connected(sub))


def prune(g: DagSpec, edges: EdgeParams, tau: float) -> PrunedGraph:
    """Threshold then excise; the standard two-step pruning."""
    return excise_dead_paths(g, threshold_edges(g, edges, tau), tau)


def sparsity(pg: PrunedGraph, original: DagSpec) -> float:
    """Fraction of the original edges erased (after excision)."""
    return 1.0 - len(pg.retained_edges) / len(original.edges)


def per_stage_sparsity(pg: PrunedGraph, original: DagSpec) -> dict[int, float | None]:
    """Erased fraction of within-stage edges, per stage.

    Both endpoints must lie in the stage; cross-stage edges only count in
    the overall sparsity.  Stages with no within-stage edges originally
    report ``None``.
    """
    out: dict[int, float | None] = {}
    kept = set(pg.retained_edges)
    for s in range(original.num_stages):
        orig_s = [e for e in original.edges
                  if original.stage_of[e[0]] == s and original.stage_of[e[1]] == s]
        if not orig_s:
            out[s] = None
        else:
            kept_s = sum(1 for e in orig_s if e in kept)
            out[s] = 1.0 - kept_s / len(orig_s)
    return out


def pruned_params(pg: PrunedGraph, params: net.NetworkParams) -> net.NetworkParams:
    """Original weights re-keyed onto the pruned graph's node ids."""
    return params.subset({new: orig for new, orig in enumerate(pg.node_map)})


def pruned_edge_params(pg: PrunedGraph, edges: EdgeParams) -> EdgeParams:
    """Surviving raw weights, re-keyed and aligned with the subgraph."""
    renum = {orig: new for new, orig in enumerate(pg.node_map)}
    orig_by_new = {}
    for (u, v) in pg.retained_edges:
        orig_by_new[(renum[u], renum[v])] = (u, v)
    idx = {e: i for i, e in enumerate(edges.edges)}
    raw = np.array([edges.raw[idx[orig_by_new[e]]] for e in pg.graph.edges])
    return EdgeParams(pg.graph.edges, raw)


def evaluate_pruned(pg: PrunedGraph, original: DagSpec, cfg: net.NetConfig,
                    params: net.NetworkParams, edges: EdgeParams,
                    images: np.ndarray, labels: np.ndarray) -> float:
    """Eval accuracy of the pruned graph with the surviving weights."""
    sub_params = pruned_params(pg, params)
    sub_edges = pruned_edge_params(pg, edges)
    return net.accuracy(pg.graph, cfg, sub_params, sub_edges, images, labels)


def sweep(g: DagSpec, edges: EdgeParams, params: net.NetworkParams,
          cfg: net.NetConfig, data, taus) -> list[dict]:
    """Prune at each threshold and measure sparsity and test accuracy.

    No fine-tuning happens anywhere; the surviving weights are used as
    they came out of training.
    """
    taus = list(taus)
    if taus != sorted(taus):
        raise ValueError("taus must be sorted ascending")
    rows = []
    for tau in taus:
        pg = prune(g, edges, tau)
        acc = evaluate_pruned(pg, g, cfg, params, edges,
                              data.test_images, data.test_labels)
        rows.append({
            "tau": tau,
            "sparsity": sparsity(pg, g),
            "accuracy": acc,
            "nodes": pg.graph.node_count,
            "edges": len(pg.retained_edges),
            "disconnected": pg.disconnected,
            "pruned": pg,
        })
    return rows
