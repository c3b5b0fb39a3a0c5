"""Feature aggregation across runs and the RBF similarity matrix."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .graphstats import GraphFeatures


@dataclass
class FeatureTable:
    """Standardized graph features, one row per run.

    The parameter count never enters; columns with zero variance across
    the table are dropped (their standardization is undefined).
    """

    run_ids: list[str]
    dataset_names: list[str]
    seeds: list[int]
    columns: list[str]
    values: np.ndarray          # standardized, shape (runs, columns)
    means: np.ndarray
    stds: np.ndarray


def build_feature_table(rows) -> FeatureTable:
    """rows: iterable of (run_id, dataset_name, seed, GraphFeatures)."""
    rows = list(rows)
    if len(rows) < 2:
        raise ValueError("need at least 2 runs to build a feature table")
    cols = list(GraphFeatures.SIMILARITY_COLUMNS)
    raw = np.array([[_num(getattr(f, c)) for c in cols]
                    for (_, _, _, f) in rows], dtype=np.float64)
    if not np.isfinite(raw).all():
        raise ValueError("non-finite feature value in table")
    stds = raw.std(axis=0)
    keep = stds > 0
    if not keep.all():
        dropped = [c for c, k in zip(cols, keep) if not k]
        warnings.warn(f"dropping zero-variance columns: {dropped}")
        cols = [c for c, k in zip(cols, keep) if k]
        raw = raw[:, keep]
        stds = stds[keep]
    means = raw.mean(axis=0)
    return FeatureTable(
        run_ids=[r[0] for r in rows],
        dataset_names=[r[1] for r in rows],
        seeds=[r[2] for r in rows],
        columns=cols,
        values=(raw - means) / stds,
        means=means,
        stds=stds,
    )


def _num(v):
    if v is None:
        return np.nan
    return float(v)


def similarity_matrix(t: FeatureTable, gamma: float | None = None) -> np.ndarray:
    """K_ij = exp(-gamma ||z_i - z_j||^2); gamma defaults to 1/dimension."""
    z = t.values
    if z.shape[1] == 0:
        # every column was constant: all runs identical, similarity 1
        return np.ones((z.shape[0], z.shape[0]))
    if gamma is None:
        gamma = 1.0 / z.shape[1]
    sq = ((z[:, None, :] - z[None, :, :]) ** 2).sum(-1)
    k = np.exp(-gamma * sq)
    np.fill_diagonal(k, 1.0)
    return k


def block_means(t: FeatureTable, k: np.ndarray) -> tuple[float, float]:
    """(mean within-dataset similarity, mean cross-dataset similarity),
    off-diagonal entries only."""
    names = np.array(t.dataset_names)
    same = names[:, None] == names[None, :]
    off = ~np.eye(len(names), dtype=bool)
    within = k[same & off]
    across = k[~same]
    if len(within) == 0 or len(across) == 0:
        raise ValueError("need both within- and cross-dataset pairs")
    return float(within.mean()), float(across.mean())


def write_similarity_csv(path, t: FeatureTable, k: np.ndarray) -> None:
    with open(path, "w") as f:
        f.write("run_id," + ",".join(t.run_ids) + "\n")
        for rid, row in zip(t.run_ids, k):
            f.write(rid + "," + ",".join(f"{v:.6g}" for v in row) + "\n")


def write_similarity_pgm(path, k: np.ndarray) -> None:
    """Grayscale image of the matrix, one pixel per entry (0 black, 1 white)."""
    n = len(k)
    gray = np.clip(np.rint(k * 255), 0, 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P5\n{n} {n}\n255\n".encode("ascii"))
        f.write(gray.tobytes())
