import copy

import numpy as np
import pytest

from dagsparse import data as ds
from dagsparse import network as net
from dagsparse import persistence as ps
from dagsparse import training as tr
from dagsparse.dag import build_full_dag


class TestTensorFormat:
    def test_round_trip(self, tmp_path, rng):
        for arr in (rng.normal(size=(3, 4, 5)).astype(np.float32),
                    rng.integers(0, 100, size=(7,)).astype(np.int64),
                    np.array(3.14),
                    (rng.uniform(size=(2, 2)) * 255).astype(np.uint8)):
            p = tmp_path / "t.tns"
            ps.save_tensor(p, arr)
            back = ps.load_tensor(p)
            assert back.dtype == np.dtype(arr.dtype.str.replace(">", "<"))
            assert np.array_equal(back, arr)

    def test_bad_magic_rejected(self, tmp_path):
        p = tmp_path / "bad.tns"
        p.write_bytes(b"NOPE" + b"\0" * 20)
        with pytest.raises(ValueError, match="magic"):
            ps.load_tensor(p)

    def test_truncated_payload_rejected(self, tmp_path, rng):
        p = tmp_path / "t.tns"
        ps.save_tensor(p, rng.normal(size=(10, 10)))
        data = p.read_bytes()
        p.write_bytes(data[:-8])
        with pytest.raises(ValueError, match="payload"):
            ps.load_tensor(p)

    def test_dataset_round_trip(self, tmp_path):
        d = ds.gen_shapes(1, 8, 8, 1, seed=0, num_classes=4, test_size=4)
        ps.save_dataset(tmp_path / "d", d)
        back = ps.load_dataset(tmp_path / "d")
        assert np.array_equal(back.train_images, d.train_images)
        assert np.array_equal(back.test_labels, d.test_labels)


def small_run(epochs=2, capture_epoch=None):
    g = build_full_dag(6, 3)
    cfg = net.NetConfig(2, 8, 1, 4)
    tcfg = tr.TrainConfig(epochs=epochs, batch_size=16, lr=0.05,
                          lr_drop_epochs=(), snapshot_every=2, grad_clip=5.0)
    d = ds.gen_shapes(1, 48, 8, 1, seed=0, num_classes=4, test_size=16)
    captured = []
    cb = None
    if capture_epoch is not None:
        cb = (lambda s: captured.append(copy.deepcopy(s))
              if s.epochs_done == capture_epoch else None)
    out = tr.train(g, cfg, tcfg, d, on_epoch_end=cb)
    return g, cfg, tcfg, d, out, captured


class TestCheckpoint:
    def test_round_trip_equality(self, tmp_path):
        g, cfg, tcfg, d, (params, edges, log), _ = small_run()
        path = tmp_path / "run.dgsp"
        ps.save_trained(path, g, cfg, tcfg, params, edges, log)
        g2, cfg2, tcfg2, state = ps.load_checkpoint(path)
        assert g2 == g
        assert cfg2 == cfg
        assert tcfg2 == tcfg
        assert np.array_equal(state.raw, edges.raw.astype(np.float32))
        for name, t in params.tensors.items():
            assert np.array_equal(state.params.tensors[name].data, t.data)
        for name, s in params.bn_states.items():
            assert np.array_equal(state.params.bn_states[name].mean, s.mean)
            assert np.array_equal(state.params.bn_states[name].var, s.var)
        assert state.log.train_loss == log.train_loss
        assert state.log.snapshot_steps == log.snapshot_steps
        assert all(np.array_equal(a, b) for a, b in
                   zip(state.log.snapshots, log.snapshots))

    def test_resume_from_disk_matches_uninterrupted(self, tmp_path):
        g, cfg, tcfg, d, (___, full_edges, full_log), captured = small_run(
            epochs=4, capture_epoch=2)
        path = tmp_path / "mid.dgsp"
        ps.save_checkpoint(path, g, cfg, tcfg, captured[0])
        _, _, _, state = ps.load_checkpoint(path)
        _, res_edges, res_log = tr.train(g, cfg, tcfg, d, resume=state)
        assert np.array_equal(res_edges.raw, full_edges.raw)
        assert res_log.train_loss == full_log.train_loss

    def test_truncation_detected(self, tmp_path):
        g, cfg, tcfg, d, (params, edges, log), _ = small_run()
        path = tmp_path / "run.dgsp"
        ps.save_trained(path, g, cfg, tcfg, params, edges, log)
        blob = path.read_bytes()
        path.write_bytes(blob[:len(blob) - 100])
        with pytest.raises(ValueError, match="checksum"):
            ps.load_checkpoint(path)

    def test_corruption_detected(self, tmp_path):
        g, cfg, tcfg, d, (params, edges, log), _ = small_run()
        path = tmp_path / "run.dgsp"
        ps.save_trained(path, g, cfg, tcfg, params, edges, log)
        blob = bytearray(path.read_bytes())
        blob[len(blob) // 2] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(ValueError, match="checksum"):
            ps.load_checkpoint(path)

    def test_version_mismatch_detected(self, tmp_path):
        g, cfg, tcfg, d, (params, edges, log), _ = small_run()
        path = tmp_path / "run.dgsp"
        ps.save_trained(path, g, cfg, tcfg, params, edges, log)
        blob = bytearray(path.read_bytes())
        blob[4] = 99
        path.write_bytes(bytes(blob))
        with pytest.raises(ValueError, match="version"):
            ps.load_checkpoint(path)

    def test_wrong_magic_detected(self, tmp_path):
        path = tmp_path / "x.dgsp"
        path.write_bytes(b"XXXX" + b"\0" * 32)
        with pytest.raises(ValueError, match="magic"):
            ps.load_checkpoint(path)
