import numpy as np
import pytest

from dagsparse import autograd as ag
from dagsparse import network as net
from dagsparse.dag import (DagSpec, build_full_dag, init_edge_params)

from conftest import random_dag


class TestNetConfig:
    def test_stage_schedule(self):
        cfg = net.NetConfig(11, 32, 3, 10)
        assert [cfg.stage_channels(s) for s in range(3)] == [11, 22, 44]
        assert [cfg.stage_resolution(s) for s in range(3)] == [32, 16, 8]

    def test_odd_resolution_rejected(self):
        cfg = net.NetConfig(4, 12, 1, 4)
        assert cfg.stage_resolution(2) == 3
        bad = net.NetConfig(4, 6, 1, 4)
        with pytest.raises(ValueError):
            bad.stage_resolution(2)

    def test_even_kernel_rejected(self):
        with pytest.raises(ValueError):
            net.NetConfig(4, 16, 1, 4, kernel_size=4)


class TestParamCount:
    def test_paper_scale_budget(self):
        # 60-node full DAG at C=11 on 32x32x3 input, against the 863.3k
        # reference budget; the shared-reduce convention lands within 10%
        g = build_full_dag(60, 3)
        cfg = net.NetConfig(11, 32, 3, 10)
        count = net.param_count(g, cfg)
        assert abs(count - 863_300) / 863_300 < 0.10
        assert count == 908_786

    def test_matches_allocation(self, rng):
        for _ in range(5):
            g = random_dag(rng)
            cfg = net.NetConfig(3, 8, 1, 4)
            params = net.build_network(g, cfg, seed=0)
            assert params.num_scalars() == net.param_count(g, cfg)

    def test_fit_channels_round_trip(self):
        g = build_full_dag(60, 3)
        cfg = net.NetConfig(1, 32, 3, 10)
        c = net.fit_channels(g, cfg, 908_786)
        assert c == 11

    def test_fit_channels_monotone(self):
        g = build_full_dag(12, 3)
        cfg = net.NetConfig(1, 16, 1, 4)
        c_small = net.fit_channels(g, cfg, 50_000)
        c_big = net.fit_channels(g, cfg, 500_000)
        assert c_small <= c_big
        assert net.param_count(g, net.NetConfig(c_big, 16, 1, 4)) <= 500_000

    def test_unreachable_budget_warns(self):
        g = build_full_dag(12, 3)
        cfg = net.NetConfig(1, 16, 1, 4)
        with pytest.warns(UserWarning):
            assert net.fit_channels(g, cfg, 10) == 1


class TestForward:
    def test_logit_shape_and_determinism(self):
        g = build_full_dag(9, 3)
        cfg = net.NetConfig(2, 8, 1, 5)
        params = net.build_network(g, cfg, seed=1)
        edges = init_edge_params(g)
        x = np.random.default_rng(0).uniform(size=(3, 1, 8, 8))
        a = net.predict(g, cfg, params, edges, x)
        b = net.predict(g, cfg, params, edges, x)
        assert a.shape == (3, 5)
        assert np.array_equal(a, b)

    def test_zero_edge_weights_cut_information(self):
        # with every edge at raw weight 0 the logits are input-independent
        g = build_full_dag(9, 3)
        cfg = net.NetConfig(2, 8, 1, 4)
        params = net.build_network(g, cfg, seed=2)
        edges = init_edge_params(g)
        zero = type(edges)(edges.edges, np.zeros(len(edges.edges)))
        rng = np.random.default_rng(1)
        a = net.predict(g, cfg, params, zero, rng.uniform(size=(2, 1, 8, 8)))
        b = net.predict(g, cfg, params, zero, rng.uniform(size=(2, 1, 8, 8)))
        assert np.allclose(a, b)

    def test_wrong_input_shape_rejected(self):
        g = build_full_dag(6, 3)
        cfg = net.NetConfig(2, 8, 1, 4)
        params = net.build_network(g, cfg, seed=0)
        edges = init_edge_params(g)
        with pytest.raises(ValueError):
            net.predict(g, cfg, params, edges, np.zeros((2, 1, 16, 16)))

    def test_batchnorm_stats_updated_in_training(self):
        g = build_full_dag(6, 3)
        cfg = net.NetConfig(2, 8, 1, 4)
        params = net.build_network(g, cfg, seed=0)
        raw = net.edge_raw_tensor(init_edge_params(g))
        before = params.bn_states["stem.bn"].mean.copy()
        x = np.random.default_rng(2).uniform(size=(4, 1, 8, 8)) + 1.0
        net.forward(g, cfg, params, raw, x, training=True)
        assert not np.allclose(before, params.bn_states["stem.bn"].mean)

    def test_cross_stage_reduce_shared(self):
        # two stage-2 targets of one stage-0 source share a reduce chain
        g = DagSpec(6, (0, 0, 1, 1, 2, 2),
                    ((0, 1), (1, 4), (1, 5), (2, 3), (0, 2), (3, 4), (3, 5),
                     (4, 5), (2, 4)))
        cfg = net.NetConfig(2, 8, 1, 3)
        params = net.build_network(g, cfg, seed=0)
        names = set(params.tensors)
        assert "node1.red1.conv" in names
        assert "node1.red2.conv" in names
        assert not any(n.startswith("node4.red") for n in names)


class TestSubset:
    def test_rekeyed_names(self):
        g = build_full_dag(6, 3)
        cfg = net.NetConfig(2, 8, 1, 4)
        params = net.build_network(g, cfg, seed=0)
        sub = params.subset({0: 0, 1: 2, 2: 5})
        assert "node1.conv" in sub.tensors           # was node2
        assert "node2.bn.gamma" in sub.tensors       # was node5
        assert "head.W" in sub.tensors
        assert sub["node1.conv"] is params["node2.conv"]   # shared storage

    def test_absent_nodes_dropped(self):
        g = build_full_dag(6, 3)
        params = net.build_network(g, net.NetConfig(2, 8, 1, 4), seed=0)
        sub = params.subset({0: 0, 1: 5})
        assert not any(n.startswith("node2") or n.startswith("node3")
                       for n in sub.tensors)
