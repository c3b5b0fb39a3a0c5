"""Graph characteristics of pruned networks.

Path statistics by exact DAG dynamic programming, input-output
communicability via the (finite) adjacency power series, global edge
connectivity, and the elongation of the stress-minimizing 2-D embedding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import networkx as nx
import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.sparse.csgraph

from .dag import DagSpec, is_connected, topo_order


@dataclass
class GraphFeatures:
    """One row of structural + graph characteristics for a pruned graph."""

    sparsity_all: float
    sparsity_stage0: float | None
    sparsity_stage1: float | None
    sparsity_stage2: float | None
    nodes_all: int
    nodes_stage0: int
    nodes_stage1: int
    nodes_stage2: int
    parameters: int
    log_paths: float
    mean_path: float
    max_path: float
    ln_communicability: float
    edge_connectivity: int
    mean_degree: float
    pca_elongation: float
    q1d: bool

    @classmethod
    def column_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> list:
        return [getattr(self, f.name) for f in fields(self)]

    #: columns entering similarity analysis (parameter count excluded)
    SIMILARITY_COLUMNS = (
        "sparsity_all", "sparsity_stage0", "sparsity_stage1",
        "sparsity_stage2", "nodes_all", "nodes_stage0", "nodes_stage1",
        "nodes_stage2", "log_paths", "mean_path", "max_path",
        "ln_communicability", "edge_connectivity", "mean_degree",
        "pca_elongation",
    )


def path_stats(g: DagSpec) -> tuple[float, float, int]:
    """(ln of path count, mean path length, max path length), input->output.

    Path counts use exact integer DP; lengths are in edges.  Mean is over
    all distinct input->output paths via a paired (count, length-sum) DP.
    """
    if not is_connected(g):
        raise ValueError("graph has no input->output path")
    order = topo_order(g)
    count = {v: 0 for v in range(g.node_count)}
    lensum = {v: 0 for v in range(g.node_count)}
    longest = {v: None for v in range(g.node_count)}
    count[g.input_node] = 1
    longest[g.input_node] = 0
    preds: dict[int, list[int]] = {v: [] for v in range(g.node_count)}
    for u, v in g.edges:
        preds[v].append(u)
    for v in order:
        if v == g.input_node:
            continue
        for u in preds[v]:
            if count[u]:
                count[v] += count[u]
                lensum[v] += lensum[u] + count[u]
            if longest[u] is not None:
                cand = longest[u] + 1
                if longest[v] is None or cand > longest[v]:
                    longest[v] = cand
    n = count[g.output_node]
    if n == 0:
        raise ValueError("graph has no input->output path")
    # ln of an arbitrarily large integer, exactly via int.bit_length scaling
    log_paths = _ln_big(n)
    mean_path = lensum[g.output_node] / n
    return log_paths, mean_path, longest[g.output_node]


def _ln_big(n: int) -> float:
    if n.bit_length() <= 512:
        return math.log(n)
    shift = n.bit_length() - 512
    return math.log(n >> shift) + shift * math.log(2)


def brute_force_paths(g: DagSpec) -> list[list[int]]:
    """All input->output paths by DFS enumeration (small-graph oracle)."""
    succ: dict[int, list[int]] = {v: [] for v in range(g.node_count)}
    for u, v in g.edges:
        succ[u].append(v)
    paths = []

    def walk(v, acc):
        if v == g.output_node:
            paths.append(acc[:])
            return
        for w in succ[v]:
            acc.append(w)
            walk(w, acc)
            acc.pop()

    walk(g.input_node, [g.input_node])
    return paths


def communicability_series(g: DagSpec) -> float:
    """[exp(A)]_{input,output} as the finite sum over walk lengths.

    On a DAG the series terminates at the longest path length; this is
    the reference computation for :func:`ln_communicability`.
    """
    n = g.node_count
    a = np.zeros((n, n))
    for u, v in g.edges:
        a[u, v] = 1.0
    vec = np.zeros(n)
    vec[g.input_node] = 1.0
    total = 1.0 if g.input_node == g.output_node else 0.0
    fact = 1.0
    for k in range(1, n):
        vec = vec @ a
        fact *= k
        total += vec[g.output_node] / fact
        if not vec.any():
            break
    return total


def ln_communicability(g: DagSpec) -> float:
    val = communicability_series(g)
    if val <= 0:
        raise ValueError("input and output are not connected by any walk")
    return math.log(val)


def communicability_expm(g: DagSpec) -> float:
    """Same entry via the general matrix exponential (cross-check route)."""
    n = g.node_count
    a = np.zeros((n, n))
    for u, v in g.edges:
        a[u, v] = 1.0
    return float(scipy.linalg.expm(a)[g.input_node, g.output_node])


def _undirected(g: DagSpec) -> nx.Graph:
    u = nx.Graph()
    u.add_nodes_from(range(g.node_count))
    u.add_edges_from(g.edges)
    return u


def edge_connectivity(g: DagSpec) -> int:
    """Global edge connectivity of the underlying undirected graph."""
    if g.node_count < 2:
        raise ValueError("need at least 2 nodes")
    u = _undirected(g)
    if u.number_of_edges() == 0 or not nx.is_connected(u):
        return 0
    return nx.edge_connectivity(u)


def brute_force_edge_connectivity(g: DagSpec) -> int:
    """Exhaustive minimum-cut search (oracle for graphs up to ~8 nodes)."""
    import itertools

    u = _undirected(g)
    if not nx.is_connected(u):
        return 0
    edges = list(u.edges)
    for k in range(0, len(edges) + 1):
        for cut in itertools.combinations(edges, k):
            h = u.copy()
            h.remove_edges_from(cut)
            if not nx.is_connected(h):
                return k
    return len(edges)


def mean_degree(g: DagSpec) -> float:
    """2 |E| / |V| on the underlying undirected graph."""
    if g.node_count < 1:
        raise ValueError("empty graph")
    return 2.0 * len(set(map(frozenset, g.edges))) / g.node_count


# ---------------------------------------------------------------------------
# stress-minimizing embedding and its elongation


def _stress(coords: np.ndarray, d: np.ndarray) -> float:
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt((diff ** 2).sum(-1))
    iu = np.triu_indices(len(coords), 1)
    return float((((dist[iu] - d[iu]) ** 2) / (2.0 * d[iu] ** 2)).sum())


def kamada_kawai_embed(g: DagSpec, seed: int = 0, max_iter: int = 10_000,
                       tol: float = 1e-9) -> np.ndarray:
    """2-D coordinates minimizing the shortest-path-distance stress.

    Deterministic: seeded jitter on a circular initialization, refined by
    L-BFGS on the stress (1/d^2 pair weights) until the relative change
    drops below ``tol``.
    """
    n = g.node_count
    und = np.zeros((n, n))
    for u, v in g.edges:
        und[u, v] = und[v, u] = 1.0
    d = scipy.sparse.csgraph.shortest_path(und, method="D", unweighted=True)
    if np.isinf(d).any():
        raise ValueError("graph is disconnected; embedding undefined")
    if n == 1:
        return np.zeros((1, 2))
    rng = np.random.default_rng(seed)
    ang = 2 * np.pi * np.arange(n) / n
    coords = np.stack([np.cos(ang), np.sin(ang)], axis=1) * d.max() / 2
    coords += rng.normal(0, 1e-3, coords.shape)

    w = np.zeros_like(d)
    mask = ~np.eye(n, dtype=bool)
    w[mask] = 1.0 / (2.0 * d[mask] ** 2)

    def objective(flat):
        x = flat.reshape(n, 2)
        diff = x[:, None, :] - x[None, :, :]
        dist = np.sqrt((diff ** 2).sum(-1))
        np.fill_diagonal(dist, 1.0)
        delta = dist - d
        np.fill_diagonal(delta, 0.0)
        val = 0.5 * (w * delta ** 2).sum()  # each pair counted twice
        coef = 2.0 * w * delta / dist
        grad = (coef[:, :, None] * diff).sum(axis=1)
        return val, grad.ravel()

    res = scipy.optimize.minimize(
        objective, coords.ravel(), jac=True, method="L-BFGS-B",
        options={"maxiter": max_iter, "ftol": tol, "gtol": 1e-12})
    return res.x.reshape(n, 2)


def best_embedding(g: DagSpec, seeds=(0, 1, 2)) -> np.ndarray:
    """Lowest-stress embedding over a few restarts (stabilizes elongation)."""
    n = g.node_count
    und = np.zeros((n, n))
    for u, v in g.edges:
        und[u, v] = und[v, u] = 1.0
    d = scipy.sparse.csgraph.shortest_path(und, method="D", unweighted=True)
    best, best_s = None, np.inf
    for s in seeds:
        c = kamada_kawai_embed(g, seed=s)
        st = _stress(c, d)
        if st < best_s:
            best, best_s = c, st
    return best


def pca_elongation(coords: np.ndarray) -> float:
    """2 * (first principal component's explained variance ratio) - 1."""
    if len(coords) < 2:
        raise ValueError("need at least 2 points")
    centered = coords - coords.mean(axis=0)
    cov = centered.T @ centered
    evals = np.sort(np.linalg.eigvalsh(cov))[::-1]
    total = evals.sum()
    if total <= 1e-30:
        return 0.0  # all points coincide
    return float(2.0 * evals[0] / total - 1.0)


def q1d(elongation: float, connectivity: int) -> bool:
    """Quasi-1-dimensional: elongated yet not splittable by one cut."""
    return elongation > 0.25 and connectivity > 1


def graph_elongation(g: DagSpec, seeds=(0, 1, 2)) -> float:
    return pca_elongation(best_embedding(g, seeds))
