"""A miniature end-to-end campaign: two datasets, two seeds each.

Each cell trains a small DAG network, sweeps the pruning threshold,
prunes, computes graph features, and retrains the pruned architecture
from scratch.  The campaign then aggregates the per-level tables and the
RBF similarity matrix between all runs.  Rerunning the script skips the
finished cells (the campaign is resumable).

Expect five to ten minutes of CPU time on first run.
"""

from pathlib import Path

from dagsparse import Campaign, TrainConfig, run_campaign

out = Path("mini_campaign_out")
campaign = Campaign(
    output_dir=str(out),
    levels=(1, 2),
    num_seeds=2,
    campaign_seed=0,
    node_count=12,
    base_channels=2,
    source_resolution=8,
    target_resolution=12,
    embed=True,
    train_size=400,
    test_size=200,
    train=TrainConfig(epochs=60, batch_size=32, lr_drop_epochs=(48, 54),
                      grad_clip=5.0, weight_decay_on_edges=True),
    retrain_epochs=20,
)

report = run_campaign(campaign)
print(f"\n{len(report['cells'])} cells done, "
      f"{len(report['failures'])} failures")

for name in ("table1.csv", "table2.csv", "similarity.csv"):
    print(f"\n--- {name} ---")
    print((out / name).read_text())
