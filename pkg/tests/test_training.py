import copy

import numpy as np
import pytest

from dagsparse import data as ds
from dagsparse import network as net
from dagsparse import training as tr
from dagsparse.dag import DagSpec, build_full_dag, init_edge_params


def tiny_dataset(seed=0, size=80, res=8, classes=4):
    return ds.gen_shapes(1, size, res, 1, seed=seed, num_classes=classes,
                         test_size=classes * 10)


def tiny_configs(epochs=2, **kw):
    cfg = net.NetConfig(2, 8, 1, 4)
    tcfg = tr.TrainConfig(epochs=epochs, batch_size=16, lr=0.05,
                          lr_drop_epochs=(), snapshot_every=2,
                          grad_clip=5.0, **kw)
    return cfg, tcfg


class TestTrainConfig:
    def test_paper_defaults(self):
        t = tr.TrainConfig()
        assert (t.epochs, t.lr, t.momentum, t.batch_size) == (100, 0.1, 0.9, 128)
        assert t.weight_decay == 1e-4
        assert t.lr_drop_epochs == (80, 90)
        assert t.lambda_sparsity == 1e-3

    def test_lr_schedule(self):
        t = tr.TrainConfig()
        assert t.lr_at(1) == 0.1
        assert t.lr_at(79) == 0.1
        assert t.lr_at(80) == pytest.approx(0.01)
        assert t.lr_at(90) == pytest.approx(0.001)
        assert t.lr_at(100) == pytest.approx(0.001)

    def test_bad_drop_epoch_rejected(self):
        with pytest.raises(ValueError):
            tr.TrainConfig(epochs=50, lr_drop_epochs=(80,))

    def test_nonpositive_lr_rejected(self):
        with pytest.raises(ValueError):
            tr.TrainConfig(lr=0.0)


class TestTrain:
    def test_loss_decreases(self):
        g = build_full_dag(6, 3)
        cfg, tcfg = tiny_configs(epochs=6)
        d = tiny_dataset()
        _, _, log = tr.train(g, cfg, tcfg, d)
        assert log.train_loss[-1] < log.train_loss[0]
        assert len(log.train_loss) == 6
        assert len(log.test_accuracy) == 6

    def test_deterministic(self):
        g = build_full_dag(6, 3)
        cfg, tcfg = tiny_configs(epochs=2)
        d = tiny_dataset()
        _, e1, log1 = tr.train(g, cfg, tcfg, d)
        _, e2, log2 = tr.train(g, cfg, tcfg, d)
        assert np.array_equal(e1.raw, e2.raw)
        assert log1.train_loss == log2.train_loss

    def test_sparsity_pressure_shrinks_edges(self):
        g = build_full_dag(6, 3)
        cfg, tcfg = tiny_configs(epochs=4, lambda_sparsity=0.05)
        d = tiny_dataset()
        _, edges, log = tr.train(g, cfg, tcfg, d)
        init_total = 0.5 * len(g.edges)
        assert log.sparsity_loss[-1] < init_total

    def test_lambda_zero_keeps_edges_large(self):
        g = build_full_dag(6, 3)
        cfg, t_on = tiny_configs(epochs=3)
        d = tiny_dataset()
        _, e_on, _ = tr.train(g, cfg, t_on, d)
        cfg, t_off = tiny_configs(epochs=3, lambda_sparsity=0.0)
        _, e_off, _ = tr.train(g, cfg, t_off, d)
        assert e_off.magnitudes().mean() > e_on.magnitudes().mean()

    def test_snapshots_every_n_steps(self):
        g = build_full_dag(6, 3)
        cfg, tcfg = tiny_configs(epochs=2)   # 5 steps/epoch at batch 16
        d = tiny_dataset()
        _, _, log = tr.train(g, cfg, tcfg, d)
        assert log.snapshot_steps == [2, 4, 6, 8, 10]
        assert all(s.shape == (len(g.edges),) for s in log.snapshots)

    def test_resume_matches_uninterrupted(self):
        g = build_full_dag(6, 3)
        cfg, tcfg = tiny_configs(epochs=4)
        d = tiny_dataset()
        _, full_edges, full_log = tr.train(g, cfg, tcfg, d)

        states = []
        # the callback state is live; snapshot it like a checkpoint would
        tr.train(g, cfg, tcfg, d,
                 on_epoch_end=lambda s: states.append(copy.deepcopy(s))
                 if s.epochs_done == 2 else None)
        _, res_edges, res_log = tr.train(g, cfg, tcfg, d, resume=states[0])
        assert np.array_equal(res_edges.raw, full_edges.raw)
        assert res_log.train_loss == full_log.train_loss

    def test_weight_decay_excluded_from_edges_by_default(self):
        # with lambda 0 and lr drops off, pure decay would shrink raws
        g = DagSpec(3, (0, 1, 2), ((0, 1), (0, 2), (1, 2)))
        cfg, tcfg = tiny_configs(epochs=1, lambda_sparsity=0.0,
                                 weight_decay=0.5)
        d = tiny_dataset(size=16)
        _, e_plain, _ = tr.train(g, cfg, tcfg, d)
        cfg, tcfg2 = tiny_configs(epochs=1, lambda_sparsity=0.0,
                                  weight_decay=0.5,
                                  weight_decay_on_edges=True)
        _, e_decayed, _ = tr.train(g, cfg, tcfg2, d)
        assert e_decayed.magnitudes().mean() < e_plain.magnitudes().mean()


class TestRetrain:
    def test_disconnected_rejected(self):
        g = DagSpec(4, (0, 1, 1, 2), ((1, 2),), input_node=0, output_node=3)
        cfg, tcfg = tiny_configs()
        with pytest.raises(ValueError):
            tr.retrain(g, cfg, tcfg, tiny_dataset(), new_seed=1)

    def test_runs_on_pruned_topology(self):
        g = DagSpec(6, (0, 0, 1, 1, 2, 2),
                    ((0, 1), (0, 2), (1, 2), (2, 3), (2, 4), (3, 5), (4, 5)))
        cfg, tcfg = tiny_configs(epochs=2)
        d = tiny_dataset()
        params, edges, log, rcfg = tr.retrain(g, cfg, tcfg, d, new_seed=5)
        assert len(log.test_accuracy) == 2
        assert rcfg.base_channels == cfg.base_channels

    def test_fit_param_target_changes_width(self):
        g = DagSpec(6, (0, 0, 1, 1, 2, 2),
                    ((0, 1), (0, 2), (1, 2), (2, 3), (2, 4), (3, 5), (4, 5)))
        cfg, tcfg = tiny_configs(epochs=1)
        d = tiny_dataset(size=16)
        target = net.param_count(build_full_dag(6, 3), cfg)
        _, _, _, rcfg = tr.retrain(g, cfg, tcfg, d, new_seed=5,
                                   fit_param_target=target)
        assert rcfg.base_channels >= cfg.base_channels
        assert net.param_count(g, rcfg) <= target
