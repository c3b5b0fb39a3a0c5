"""Train a small DAG network until it sheds its spare wiring, then look
at what is left.

A 12-node fully connected staged DAG learns a 4-class synthetic texture
task while the L1-of-tanh penalty pushes unneeded edge weights toward
zero.  Afterwards we sweep the pruning threshold, cut at the default
tau, and print the structural statistics of the surviving graph.

Weight decay is applied to the raw edge weights too: once the task is
solved, cross-entropy keeps shrinking by scaling the logits up, which
re-inflates the gates; the decay term suppresses exactly that.

Runs in a couple of minutes on a laptop CPU.
"""

import numpy as np

import dagsparse as dg
from dagsparse import pruning

# a 12-node DAG: 4 nodes per stage, all 66 forward edges present
graph = dg.build_full_dag(12, 3)
print(f"full DAG: {graph.node_count} nodes, {len(graph.edges)} edges")
print(f"initial sparsity loss: {dg.sparsity_loss(dg.init_edge_params(graph)):.1f}")

data = dg.gen_shapes(level=2, size=1200, resolution=8, channels=1, seed=0,
                     num_classes=4, test_size=400)
data = dg.embed_colorize(data, 16, seed=1)
cfg = dg.NetConfig(base_channels=2, input_resolution=16, input_channels=3,
                   num_classes=4)
tcfg = dg.TrainConfig(epochs=100, batch_size=32, lr_drop_epochs=(80, 90),
                      lambda_sparsity=1e-3, grad_clip=5.0, seed=0,
                      weight_decay_on_edges=True)

print("\ntraining (cross-entropy + sparsity penalty) ...")
params, edges, log = dg.train(graph, cfg, tcfg, data)
print(f"final test accuracy {log.test_accuracy[-1]:.3f}, "
      f"sparsity loss {log.sparsity_loss[-1]:.1f}")

print("\nthreshold sweep (no fine-tuning):")
print(f"{'tau':>6} {'sparsity':>9} {'accuracy':>9} {'edges':>6}")
for row in pruning.sweep(graph, edges, params, cfg, data,
                         pruning.DEFAULT_TAU_GRID):
    print(f"{row['tau']:>6} {row['sparsity']:>9.3f} {row['accuracy']:>9.3f} "
          f"{row['edges']:>6}")

pg = dg.prune(graph, edges, dg.DEFAULT_TAU)
print(f"\npruned at tau={dg.DEFAULT_TAU}: {pg.graph.node_count} nodes, "
      f"{len(pg.retained_edges)} edges "
      f"({dg.sparsity(pg, graph):.0%} of edges erased)")

log_paths, mean_path, max_path = dg.path_stats(pg.graph)
elong = dg.graph_elongation(pg.graph)
conn = dg.edge_connectivity(pg.graph)
print(f"ln(path count) {log_paths:.2f}, mean path {mean_path:.2f} edges, "
      f"longest {max_path}")
print(f"pca_elongation {elong:.3f}, edge connectivity {conn}, "
      f"quasi-1D: {dg.q1d(elong, conn)}")

# the pruned weights still classify; nothing was retrained
acc = pruning.evaluate_pruned(pg, graph, cfg, params, edges,
                              data.test_images, data.test_labels)
print(f"pruned-network accuracy with the original weights: {acc:.3f}")
