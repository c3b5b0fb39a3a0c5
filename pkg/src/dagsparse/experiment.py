"""Campaign orchestration: train, sweep, analyze and retrain over a grid
of datasets and seeds, then aggregate tables and the similarity matrix.

Every cell (dataset level, seed index) owns one run directory with a
fixed artifact set; completed cells are skipped on rerun, so a campaign
is resumable.  All randomness flows from the campaign seed through
``np.random.SeedSequence(campaign_seed, spawn_key=cell)``.
"""

from __future__ import annotations

import csv
import io
import traceback
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import data as ds
from . import graphstats as gs
from . import network as net
from . import persistence
from . import pruning
from . import similarity as sim
from . import training as tr
from .dag import DagSpec, EdgeParams, build_full_dag, to_dot

#: artifact files that define a completed cell
CELL_ARTIFACTS = ("checkpoint.dgsp", "train_log.csv", "edge_trajectory.csv",
                  "sweep.csv", "pruned.dot", "features.csv", "retrain.csv")


@dataclass(frozen=True)
class Campaign:
    output_dir: str
    levels: tuple[int, ...] = (1, 2, 3)
    num_seeds: int = 10
    campaign_seed: int = 0
    node_count: int = 24
    num_stages: int = 3
    base_channels: int = 2
    source_resolution: int = 8
    target_resolution: int = 16
    num_classes: int = 4
    train_size: int = 1200
    test_size: int = 400
    embed: bool = True
    tau: float = pruning.DEFAULT_TAU
    tau_grid: tuple[float, ...] = pruning.DEFAULT_TAU_GRID
    # weight decay on the raw edge weights suppresses the late-training
    # gate re-amplification that otherwise stalls sparsification once the
    # cross-entropy reaches zero (margins grow by scaling the gates up)
    train: tr.TrainConfig = field(default_factory=lambda: tr.TrainConfig(
        epochs=100, batch_size=32, lr_drop_epochs=(80, 90), grad_clip=5.0,
        weight_decay_on_edges=True))
    retrain_epochs: int = 30

    def cells(self):
        return [(lv, si) for lv in self.levels for si in range(self.num_seeds)]

    def cell_dir(self, level: int, seed_index: int) -> Path:
        return Path(self.output_dir) / f"level{level}" / f"seed{seed_index}"

    def cell_seed(self, level: int, seed_index: int) -> int:
        ss = np.random.SeedSequence(self.campaign_seed,
                                    spawn_key=(level, seed_index))
        return int(ss.generate_state(1)[0])


def make_dataset(c: Campaign, level: int, seed: int) -> ds.Dataset:
    d = ds.gen_shapes(level, c.train_size, c.source_resolution, 1, seed=seed,
                      num_classes=c.num_classes, test_size=c.test_size)
    if c.embed:
        d = ds.embed_colorize(d, c.target_resolution, seed=seed + 1)
    return d


def net_config(c: Campaign) -> net.NetConfig:
    res = c.target_resolution if c.embed else c.source_resolution
    chans = 3 if c.embed else 1
    return net.NetConfig(c.base_channels, res, chans, c.num_classes)


def _write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue())


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if v is None:
        return ""
    return v


def cell_complete(c: Campaign, level: int, seed_index: int) -> bool:
    d = c.cell_dir(level, seed_index)
    return all((d / a).is_file() for a in CELL_ARTIFACTS)


def run_cell(c: Campaign, level: int, seed_index: int) -> dict:
    """Train one cell end to end and write its artifacts.

    Returns the cell's feature/accuracy summary (also persisted, so the
    report step can run from disk alone).
    """
    out = c.cell_dir(level, seed_index)
    out.mkdir(parents=True, exist_ok=True)
    seed = c.cell_seed(level, seed_index)
    d = make_dataset(c, level, seed)
    g = build_full_dag(c.node_count, c.num_stages)
    cfg = net_config(c)
    tcfg = replace(c.train, seed=seed)

    params, edges, log = tr.train(g, cfg, tcfg, d)
    persistence.save_trained(out / "checkpoint.dgsp", g, cfg, tcfg, params,
                             edges, log)
    _write_csv(out / "train_log.csv",
               ["epoch", "lr", "train_loss", "sparsity_loss", "test_accuracy"],
               log.epoch_rows())
    _write_csv(out / "edge_trajectory.csv",
               ["step"] + [f"e{u}_{v}" for (u, v) in g.edges],
               ([s] + [float(x) for x in snap]
                for s, snap in zip(log.snapshot_steps, log.snapshots)))

    sweep_rows = pruning.sweep(g, edges, params, cfg, d, c.tau_grid)
    _write_csv(out / "sweep.csv",
               ["tau", "sparsity", "accuracy", "nodes", "edges", "disconnected"],
               ([r["tau"], r["sparsity"], r["accuracy"], r["nodes"],
                 r["edges"], int(r["disconnected"])] for r in sweep_rows))

    pg = pruning.prune(g, edges, c.tau)
    kept = pruning.pruned_edge_params(pg, edges)
    (out / "pruned.dot").write_text(to_dot(pg.graph, kept, name="pruned"))

    full_acc = log.test_accuracy[-1]
    pruned_acc = pruning.evaluate_pruned(pg, g, cfg, params, edges,
                                         d.test_images, d.test_labels)
    feats = compute_features(pg, g, cfg)
    _write_csv(out / "features.csv", gs.GraphFeatures.column_names(),
               [[int(v) if isinstance(v, (bool, np.bool_)) else v
                 for v in feats.row()]])

    retrain_rows = []
    rtcfg = replace(tcfg, epochs=c.retrain_epochs,
                    lr_drop_epochs=tuple(int(e * c.retrain_epochs / tcfg.epochs)
                                         or 1 for e in tcfg.lr_drop_epochs))
    if not pg.disconnected:
        for variant, target in (("plain", None),
                                ("fit_c", net.param_count(g, cfg))):
            _, _, rlog, rcfg = tr.retrain(pg.graph, cfg, rtcfg, d,
                                          new_seed=seed + 1,
                                          fit_param_target=target)
            retrain_rows.append([variant, rcfg.base_channels,
                                 net.param_count(pg.graph, rcfg),
                                 rlog.test_accuracy[-1]])
    _write_csv(out / "retrain.csv",
               ["variant", "base_channels", "parameters", "test_accuracy"],
               retrain_rows)

    summary = {"level": level, "seed_index": seed_index,
               "full_accuracy": full_acc, "pruned_accuracy": pruned_acc,
               "retrain": retrain_rows, "features": feats,
               "disconnected": pg.disconnected}
    _write_csv(out / "summary.csv",
               ["full_accuracy", "pruned_accuracy", "disconnected"],
               [[full_acc, pruned_acc, int(pg.disconnected)]])
    return summary


def compute_features(pg: pruning.PrunedGraph, original: DagSpec,
                     cfg: net.NetConfig) -> gs.GraphFeatures:
    """All Table-style characteristics of one pruned graph."""
    per_stage = pruning.per_stage_sparsity(pg, original)
    stage_nodes = [sum(1 for o in pg.node_map if original.stage_of[o] == s)
                   for s in range(original.num_stages)]
    if pg.disconnected:
        log_paths = mean_path = max_path = lncomm = float("nan")
        elong = float("nan")
        conn = gs.edge_connectivity(pg.graph) if pg.graph.node_count >= 2 else 0
    else:
        log_paths, mean_path, max_path = gs.path_stats(pg.graph)
        lncomm = gs.ln_communicability(pg.graph)
        conn = gs.edge_connectivity(pg.graph)
        elong = gs.graph_elongation(pg.graph)
    return gs.GraphFeatures(
        sparsity_all=pruning.sparsity(pg, original),
        sparsity_stage0=per_stage.get(0),
        sparsity_stage1=per_stage.get(1),
        sparsity_stage2=per_stage.get(2),
        nodes_all=pg.graph.node_count,
        nodes_stage0=stage_nodes[0],
        nodes_stage1=stage_nodes[1] if len(stage_nodes) > 1 else 0,
        nodes_stage2=stage_nodes[2] if len(stage_nodes) > 2 else 0,
        parameters=net.param_count(pg.graph, cfg),
        log_paths=log_paths,
        mean_path=mean_path,
        max_path=float(max_path),
        ln_communicability=lncomm,
        edge_connectivity=conn,
        mean_degree=gs.mean_degree(pg.graph),
        pca_elongation=elong,
        q1d=bool(gs.q1d(elong, conn)) if not pg.disconnected else False,
    )


def load_cell(c: Campaign, level: int, seed_index: int) -> dict:
    """Rebuild a cell summary from its artifacts (for resumed campaigns)."""
    out = c.cell_dir(level, seed_index)
    with open(out / "features.csv") as f:
        row = list(csv.DictReader(f))[0]
    kwargs = {}
    for fname in gs.GraphFeatures.column_names():
        v = row[fname]
        if fname.startswith("nodes") or fname in ("parameters",
                                                  "edge_connectivity"):
            kwargs[fname] = int(v)
        elif fname == "q1d":
            kwargs[fname] = v in ("1", "True", "true")
        else:
            kwargs[fname] = None if v == "" else float(v)
    feats = gs.GraphFeatures(**kwargs)
    with open(out / "summary.csv") as f:
        srow = list(csv.DictReader(f))[0]
    with open(out / "retrain.csv") as f:
        retrain_rows = [[r["variant"], int(r["base_channels"]),
                         int(r["parameters"]), float(r["test_accuracy"])]
                        for r in csv.DictReader(f)]
    return {"level": level, "seed_index": seed_index,
            "full_accuracy": float(srow["full_accuracy"]),
            "pruned_accuracy": float(srow["pruned_accuracy"]),
            "retrain": retrain_rows, "features": feats,
            "disconnected": srow["disconnected"] == "1"}


def run_campaign(c: Campaign, log=print) -> dict:
    """Execute every incomplete cell, then write the aggregate report.

    Cell failures are recorded and the campaign keeps going; the report
    covers the cells that finished.  Returns a dict with per-cell
    summaries and the list of failures.
    """
    summaries, failures = [], []
    for level, si in c.cells():
        if cell_complete(c, level, si):
            log(f"level {level} seed {si}: complete, skipping")
            summaries.append(load_cell(c, level, si))
            continue
        log(f"level {level} seed {si}: running")
        try:
            summaries.append(run_cell(c, level, si))
        except Exception as exc:
            failures.append((level, si, f"{type(exc).__name__}: {exc}"))
            log(f"level {level} seed {si}: FAILED ({exc})")
            traceback.print_exc()
    if summaries:
        write_report(c, summaries)
    if failures:
        _write_csv(Path(c.output_dir) / "failures.csv",
                   ["level", "seed_index", "error"], failures)
    return {"cells": summaries, "failures": failures}


#: feature columns in the structural table vs the graph-theory table
TABLE1_COLUMNS = ("sparsity_all", "sparsity_stage0", "sparsity_stage1",
                  "sparsity_stage2", "nodes_all", "nodes_stage0",
                  "nodes_stage1", "nodes_stage2", "parameters")
TABLE2_COLUMNS = ("log_paths", "mean_path", "max_path", "ln_communicability",
                  "edge_connectivity", "mean_degree", "pca_elongation")


def _mean_std(vals) -> str:
    vals = [v for v in vals if v is not None and np.isfinite(v)]
    if not vals:
        return ""
    m = float(np.mean(vals))
    s = float(np.std(vals))
    return f"{m:.6g} ± {s:.6g}"


def write_report(c: Campaign, summaries: list[dict]) -> None:
    out = Path(c.output_dir)
    by_level = {}
    for s in summaries:
        by_level.setdefault(s["level"], []).append(s)
    levels = sorted(by_level)

    rows1, rows2 = [], []
    for lv in levels:
        cells = by_level[lv]
        feats = [s["features"] for s in cells]
        accs = [s["full_accuracy"] for s in cells]
        paccs = [s["pruned_accuracy"] for s in cells]
        row1 = [f"level{lv}", _mean_std(accs), _mean_std(paccs)]
        row1 += [_mean_std([getattr(f, col) for f in feats])
                 for col in TABLE1_COLUMNS]
        rows1.append(row1)
        row2 = [f"level{lv}"]
        row2 += [_mean_std([getattr(f, col) for f in feats])
                 for col in TABLE2_COLUMNS]
        row2.append(_fmt(float(np.mean([f.q1d for f in feats]))))
        rows2.append(row2)
    _write_csv(out / "table1.csv",
               ["dataset", "accuracy", "pruned_accuracy"] + list(TABLE1_COLUMNS),
               rows1)
    _write_csv(out / "table2.csv",
               ["dataset"] + list(TABLE2_COLUMNS) + ["q1d_fraction"],
               rows2)

    usable = [s for s in summaries if not s["disconnected"]]
    if len(usable) >= 2:
        table = sim.build_feature_table(
            (f"level{s['level']}_seed{s['seed_index']}", f"level{s['level']}",
             s["seed_index"], s["features"]) for s in usable)
        k = sim.similarity_matrix(table)
        sim.write_similarity_csv(out / "similarity.csv", table, k)
        sim.write_similarity_pgm(out / "similarity.pgm", k)
