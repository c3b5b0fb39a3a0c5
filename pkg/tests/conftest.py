import numpy as np
import pytest

from dagsparse.dag import DagSpec


def random_dag(rng, max_nodes=7, require_connected=True, num_stages=3):
    """Random staged DAG on up to max_nodes nodes, edges only forward.

    Node 0 is the input, the last node is the output.  When connectivity
    is required, a random input->output spine is added first.
    """
    while True:
        n = int(rng.integers(3, max_nodes + 1))
        stages = np.sort(rng.integers(0, num_stages, n))
        stages[0] = 0
        stages[-1] = num_stages - 1
        edges = set()
        if require_connected:
            spine = [0] + sorted(
                rng.choice(np.arange(1, n - 1), size=int(rng.integers(0, n - 1)),
                           replace=False).tolist()) + [n - 1]
            edges.update(zip(spine, spine[1:]))
        for u in range(n):
            for v in range(u + 1, n):
                if rng.random() < 0.4:
                    edges.add((u, v))
        edges = {(u, v) for (u, v) in edges if v != 0 and u != n - 1}
        if not edges:
            continue
        used = {0, n - 1} | {x for e in edges for x in e}
        if len(used) < n:
            continue
        if any(v == 0 for _, v in edges) or any(u == n - 1 for u, _ in edges):
            continue
        try:
            return DagSpec(n, tuple(int(s) for s in stages),
                           tuple(sorted(edges)))
        except ValueError:
            continue


@pytest.fixture
def rng():
    return np.random.default_rng(0)
