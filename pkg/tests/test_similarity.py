import numpy as np
import pytest

from dagsparse import similarity as sim
from dagsparse.graphstats import GraphFeatures


def features(rng, **overrides):
    base = dict(sparsity_all=rng.uniform(), sparsity_stage0=rng.uniform(),
                sparsity_stage1=rng.uniform(), sparsity_stage2=rng.uniform(),
                nodes_all=int(rng.integers(5, 25)),
                nodes_stage0=int(rng.integers(1, 9)),
                nodes_stage1=int(rng.integers(1, 9)),
                nodes_stage2=int(rng.integers(1, 9)),
                parameters=int(rng.integers(1000, 100000)),
                log_paths=rng.uniform(0, 20), mean_path=rng.uniform(2, 10),
                max_path=float(rng.integers(3, 20)),
                ln_communicability=rng.uniform(-1, 5),
                edge_connectivity=int(rng.integers(1, 6)),
                mean_degree=rng.uniform(1, 10),
                pca_elongation=rng.uniform(-1, 1), q1d=False)
    base.update(overrides)
    return GraphFeatures(**base)


def table(rng, n=8):
    return sim.build_feature_table(
        (f"run{i}", f"level{i % 2 + 1}", i, features(rng)) for i in range(n))


class TestFeatureTable:
    def test_standardized(self, rng):
        t = table(rng)
        assert np.allclose(t.values.mean(axis=0), 0.0, atol=1e-10)
        assert np.allclose(t.values.std(axis=0), 1.0, atol=1e-10)

    def test_parameter_count_excluded(self, rng):
        t = table(rng)
        assert "parameters" not in t.columns
        assert "q1d" not in t.columns

    def test_zero_variance_column_dropped_with_warning(self, rng):
        rows = [(f"r{i}", "d", i, features(rng, mean_degree=3.0))
                for i in range(5)]
        with pytest.warns(UserWarning, match="mean_degree"):
            t = sim.build_feature_table(rows)
        assert "mean_degree" not in t.columns

    def test_single_row_rejected(self, rng):
        with pytest.raises(ValueError):
            sim.build_feature_table([("r0", "d", 0, features(rng))])

    def test_non_finite_rejected(self, rng):
        rows = [(f"r{i}", "d", i, features(rng)) for i in range(3)]
        rows.append(("r3", "d", 3, features(rng, log_paths=float("nan"))))
        with pytest.raises(ValueError):
            sim.build_feature_table(rows)


class TestSimilarityMatrix:
    def test_kernel_properties(self, rng):
        t = table(rng)
        k = sim.similarity_matrix(t)
        assert np.array_equal(np.diag(k), np.ones(len(k)))
        assert np.allclose(k, k.T)
        assert k.min() > 0.0 and k.max() <= 1.0

    def test_positive_semidefinite(self, rng):
        k = sim.similarity_matrix(table(rng, n=12))
        assert np.linalg.eigvalsh(k).min() >= -1e-8

    def test_identical_rows_similarity_one(self, rng):
        f = features(rng)
        g = features(rng)
        t = sim.build_feature_table([("a", "d", 0, f), ("b", "d", 1, f),
                                     ("c", "d", 2, g)])
        k = sim.similarity_matrix(t)
        assert k[0, 1] == pytest.approx(1.0)

    def test_permutation_consistency(self, rng):
        rows = [(f"r{i}", "d", i, features(rng)) for i in range(6)]
        k = sim.similarity_matrix(sim.build_feature_table(rows))
        perm = [3, 1, 5, 0, 2, 4]
        k2 = sim.similarity_matrix(
            sim.build_feature_table([rows[i] for i in perm]))
        assert np.allclose(k2, k[np.ix_(perm, perm)], atol=1e-10)

    def test_gamma_shrinks_similarity(self, rng):
        t = table(rng)
        k_wide = sim.similarity_matrix(t, gamma=0.01)
        k_tight = sim.similarity_matrix(t, gamma=10.0)
        off = ~np.eye(len(t.run_ids), dtype=bool)
        assert k_tight[off].mean() < k_wide[off].mean()


class TestBlockMeans:
    def test_clustered_data_separates(self, rng):
        rows = []
        for i in range(4):
            rows.append((f"a{i}", "la", i,
                         features(rng, sparsity_all=0.8 + 0.01 * i,
                                  log_paths=15.0 + 0.1 * i)))
        for i in range(4):
            rows.append((f"b{i}", "lb", i,
                         features(rng, sparsity_all=0.1 + 0.01 * i,
                                  log_paths=2.0 + 0.1 * i)))
        t = sim.build_feature_table(rows)
        within, across = sim.block_means(t, sim.similarity_matrix(t))
        assert within > across


class TestExports:
    def test_csv_shape(self, tmp_path, rng):
        t = table(rng)
        k = sim.similarity_matrix(t)
        path = tmp_path / "sim.csv"
        sim.write_similarity_csv(path, t, k)
        lines = path.read_text().splitlines()
        assert len(lines) == len(k) + 1
        assert lines[0].startswith("run_id,run0,")

    def test_pgm_header_and_size(self, tmp_path, rng):
        t = table(rng)
        k = sim.similarity_matrix(t)
        path = tmp_path / "sim.pgm"
        sim.write_similarity_pgm(path, k)
        blob = path.read_bytes()
        assert blob.startswith(f"P5\n{len(k)} {len(k)}\n255\n".encode())
        assert len(blob.split(b"\n", 3)[3]) == len(k) ** 2
