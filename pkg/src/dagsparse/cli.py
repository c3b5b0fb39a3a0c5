"""Command-line front end.

Subcommands: gen-data, train, sweep, prune, stats, similarity, retrain,
report, export-dot.  Campaign-level settings come from a flat key=value
config file (``--config``); individual flags override config values.
Exit codes: 0 success, 1 cell failures, 2 configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import data as ds
from . import experiment as ex
from . import graphstats as gstats
from . import network as net
from . import persistence
from . import pruning
from . import similarity as sim
from . import training as tr
from .dag import from_dot, to_dot

#: config keys, their types, and which dataclass they feed
_CAMPAIGN_KEYS = {
    "output_dir": str, "levels": "intlist", "num_seeds": int,
    "campaign_seed": int, "node_count": int, "num_stages": int,
    "base_channels": int, "source_resolution": int, "target_resolution": int,
    "num_classes": int, "train_size": int, "test_size": int, "embed": "bool",
    "tau": float, "tau_grid": "floatlist", "retrain_epochs": int,
}
_TRAIN_KEYS = {
    "epochs": int, "lr": float, "momentum": float, "batch_size": int,
    "weight_decay": float, "lr_drop_epochs": "inttuple",
    "lr_drop_factor": float, "lambda_sparsity": float, "seed": int,
    "weight_decay_on_edges": "bool", "snapshot_every": int, "dtype": str,
    "grad_clip": "optfloat",
}


class ConfigError(Exception):
    pass


def _convert(key, kind, value):
    try:
        if kind is str:
            return value
        if kind is int:
            return int(value)
        if kind is float:
            return float(value)
        if kind == "bool":
            if value.lower() in ("1", "true", "yes"):
                return True
            if value.lower() in ("0", "false", "no"):
                return False
            raise ValueError(value)
        if kind == "optfloat":
            return None if value.lower() in ("none", "") else float(value)
        if kind == "intlist":
            return tuple(int(v) for v in value.split(",") if v)
        if kind == "inttuple":
            return tuple(int(v) for v in value.split(",") if v)
        if kind == "floatlist":
            return tuple(float(v) for v in value.split(",") if v)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc
    raise ConfigError(f"unknown config kind for {key}")


def read_config(path) -> dict:
    """Flat key=value lines; blank lines and '#' comments ignored."""
    out = {}
    for ln, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{ln}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in _CAMPAIGN_KEYS:
            out[key] = _convert(key, _CAMPAIGN_KEYS[key], value)
        elif key in _TRAIN_KEYS:
            out[key] = _convert(key, _TRAIN_KEYS[key], value)
        else:
            raise ConfigError(f"{path}:{ln}: unknown config key {key!r}")
    return out


def build_campaign(args) -> ex.Campaign:
    cfg = read_config(args.config) if args.config else {}
    for key in list(_CAMPAIGN_KEYS) + list(_TRAIN_KEYS):
        flag = getattr(args, key.replace("-", "_"), None)
        if flag is not None:
            kind = _CAMPAIGN_KEYS.get(key) or _TRAIN_KEYS[key]
            cfg[key] = _convert(key, kind, flag) if isinstance(flag, str) else flag
    train_kwargs = {k: cfg.pop(k) for k in list(cfg) if k in _TRAIN_KEYS}
    if "output_dir" not in cfg:
        raise ConfigError("output_dir is required (config key or --output-dir)")
    try:
        tcfg = replace(tr.TrainConfig(
            epochs=60, batch_size=32, lr_drop_epochs=(48, 54), grad_clip=5.0),
            **train_kwargs)
        return ex.Campaign(train=tcfg, **cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _add_campaign_flags(p):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--output-dir", dest="output_dir")
    for key in list(_CAMPAIGN_KEYS) + list(_TRAIN_KEYS):
        if key == "output_dir":
            continue
        p.add_argument(f"--{key.replace('_', '-')}", dest=key)


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_data(args):
    d = ds.gen_shapes(args.level, args.size, args.resolution, args.channels,
                      seed=args.seed, num_classes=args.classes)
    if args.embed:
        d = ds.embed_colorize(d, args.embed, seed=args.seed + 1)
    if args.tear:
        d = ds.tear_up(d, args.tear, seed=args.seed + 2)
    persistence.save_dataset(args.out, d)
    print(f"wrote {args.out}.{{train,test}}_{{images,labels}}.tns "
          f"({len(d.train_images)} train / {len(d.test_images)} test)")
    return 0


def cmd_train(args):
    c = build_campaign(args)
    if args.level is not None:
        cells = [(args.level, args.seed_index or 0)]
    else:
        cells = c.cells()
    failures = 0
    for level, si in cells:
        if ex.cell_complete(c, level, si):
            print(f"level {level} seed {si}: complete, skipping")
            continue
        print(f"level {level} seed {si}: running")
        try:
            ex.run_cell(c, level, si)
        except Exception as exc:
            print(f"level {level} seed {si}: FAILED ({exc})", file=sys.stderr)
            failures += 1
    return 1 if failures else 0


def _load_ckpt_and_data(args):
    g, cfg, tcfg, state = persistence.load_checkpoint(args.checkpoint)
    params = state.params
    from .dag import EdgeParams
    edges = EdgeParams(g.edges, state.raw.astype(np.float64))
    d = persistence.load_dataset(args.data) if args.data else None
    return g, cfg, tcfg, params, edges, d


def cmd_sweep(args):
    g, cfg, _, params, edges, d = _load_ckpt_and_data(args)
    taus = sorted(float(t) for t in args.taus.split(","))
    rows = pruning.sweep(g, edges, params, cfg, d, taus)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["tau", "sparsity", "accuracy", "nodes", "edges", "disconnected"])
    for r in rows:
        w.writerow([r["tau"], f"{r['sparsity']:.6g}", f"{r['accuracy']:.6g}",
                    r["nodes"], r["edges"], int(r["disconnected"])])
    return 0


def cmd_prune(args):
    g, cfg, _, params, edges, _ = _load_ckpt_and_data(args)
    pg = pruning.prune(g, edges, args.tau)
    kept = pruning.pruned_edge_params(pg, edges)
    text = to_dot(pg.graph, kept, name="pruned")
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text, end="")
    if pg.disconnected:
        print("warning: pruned graph is disconnected", file=sys.stderr)
    return 0


def cmd_stats(args):
    g, _ = from_dot(Path(args.dot).read_text())
    log_paths, mean_path, max_path = gstats.path_stats(g)
    conn = gstats.edge_connectivity(g)
    elong = gstats.graph_elongation(g)
    rows = [
        ("nodes", g.node_count), ("edges", len(g.edges)),
        ("log_paths", f"{log_paths:.6g}"), ("mean_path", f"{mean_path:.6g}"),
        ("max_path", max_path),
        ("ln_communicability", f"{gstats.ln_communicability(g):.6g}"),
        ("edge_connectivity", conn),
        ("mean_degree", f"{gstats.mean_degree(g):.6g}"),
        ("pca_elongation", f"{elong:.6g}"),
        ("q1d", int(gstats.q1d(elong, conn))),
    ]
    for k, v in rows:
        print(f"{k},{v}")
    return 0


def cmd_similarity(args):
    c = build_campaign(args)
    rows = []
    for level, si in c.cells():
        if ex.cell_complete(c, level, si):
            s = ex.load_cell(c, level, si)
            if not s["disconnected"]:
                rows.append((f"level{level}_seed{si}", f"level{level}", si,
                             s["features"]))
    if len(rows) < 2:
        print("need at least 2 completed cells", file=sys.stderr)
        return 1
    table = sim.build_feature_table(rows)
    k = sim.similarity_matrix(table, gamma=args.gamma)
    out = Path(c.output_dir)
    sim.write_similarity_csv(out / "similarity.csv", table, k)
    sim.write_similarity_pgm(out / "similarity.pgm", k)
    within, across = sim.block_means(table, k)
    print(f"within-level mean {within:.4f}, cross-level mean {across:.4f}")
    return 0


def cmd_retrain(args):
    g, _ = from_dot(Path(args.dot).read_text())
    d = persistence.load_dataset(args.data)
    cfg = net.NetConfig(args.base_channels, d.resolution, d.channels,
                        d.num_classes)
    tcfg = replace(tr.TrainConfig(epochs=args.epochs, batch_size=32,
                                  grad_clip=5.0, lr_drop_epochs=()),
                   seed=args.seed)
    _, _, log, rcfg = tr.retrain(g, cfg, tcfg, d, new_seed=args.seed,
                                 fit_param_target=args.fit_params)
    print(f"base_channels,{rcfg.base_channels}")
    print(f"parameters,{net.param_count(g, rcfg)}")
    print(f"test_accuracy,{log.test_accuracy[-1]:.6g}")
    return 0


def cmd_report(args):
    c = build_campaign(args)
    summaries, missing = [], 0
    for level, si in c.cells():
        if ex.cell_complete(c, level, si):
            summaries.append(ex.load_cell(c, level, si))
        else:
            missing += 1
    if not summaries:
        print("no completed cells to report", file=sys.stderr)
        return 1
    ex.write_report(c, summaries)
    print(f"report over {len(summaries)} cells "
          f"({missing} incomplete) -> {c.output_dir}")
    return 1 if missing else 0


def cmd_export_dot(args):
    g, cfg, _, params, edges, _ = _load_ckpt_and_data(args)
    text = to_dot(g, edges, name="trained")
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dagsparse",
                                description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("gen-data", help="generate a synthetic dataset")
    q.add_argument("--level", type=int, required=True, choices=(1, 2, 3))
    q.add_argument("--size", type=int, default=1200)
    q.add_argument("--resolution", type=int, default=8)
    q.add_argument("--channels", type=int, default=1)
    q.add_argument("--classes", type=int, default=4)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--embed", type=int, help="embed/colorize to this resolution")
    q.add_argument("--tear", type=int, help="tear-up patch size")
    q.add_argument("--out", required=True, help="output path prefix")
    q.set_defaults(func=cmd_gen_data)

    q = sub.add_parser("train", help="run campaign cells (train + analyze)")
    _add_campaign_flags(q)
    q.add_argument("--level", type=int)
    q.add_argument("--seed-index", type=int)
    q.set_defaults(func=cmd_train)

    q = sub.add_parser("sweep", help="threshold sweep from a checkpoint")
    q.add_argument("--checkpoint", required=True)
    q.add_argument("--data", required=True, help="dataset path prefix")
    q.add_argument("--taus", default=",".join(str(t) for t
                                              in pruning.DEFAULT_TAU_GRID))
    q.set_defaults(func=cmd_sweep)

    q = sub.add_parser("prune", help="prune a checkpoint to a DOT file")
    q.add_argument("--checkpoint", required=True)
    q.add_argument("--tau", type=float, default=pruning.DEFAULT_TAU)
    q.add_argument("--out")
    q.set_defaults(func=cmd_prune, data=None)

    q = sub.add_parser("stats", help="graph characteristics of a DOT file")
    q.add_argument("--dot", required=True)
    q.set_defaults(func=cmd_stats)

    q = sub.add_parser("similarity", help="similarity matrix over a campaign")
    _add_campaign_flags(q)
    q.add_argument("--gamma", type=float)
    q.set_defaults(func=cmd_similarity)

    q = sub.add_parser("retrain", help="retrain a pruned DOT from scratch")
    q.add_argument("--dot", required=True)
    q.add_argument("--data", required=True, help="dataset path prefix")
    q.add_argument("--base-channels", type=int, default=4)
    q.add_argument("--epochs", type=int, default=30)
    q.add_argument("--seed", type=int, default=1)
    q.add_argument("--fit-params", type=int,
                   help="refit channels to this parameter budget")
    q.set_defaults(func=cmd_retrain)

    q = sub.add_parser("report", help="aggregate campaign tables")
    _add_campaign_flags(q)
    q.set_defaults(func=cmd_report)

    q = sub.add_parser("export-dot", help="full trained graph as DOT")
    q.add_argument("--checkpoint", required=True)
    q.add_argument("--out")
    q.set_defaults(func=cmd_export_dot, data=None)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
