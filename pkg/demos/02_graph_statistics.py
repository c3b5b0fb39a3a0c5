"""Graph statistics on known shapes, where every number can be checked
by hand.

The fully connected staged DAG has closed-form path statistics; a chain
has exactly one path and embeds as a line.  This script prints both next
to their analytic values, then shows the communicability dual-check.
"""

import math

import dagsparse as dg
from dagsparse.dag import DagSpec
from dagsparse.graphstats import communicability_expm, communicability_series

n = 60
full = dg.build_full_dag(n, 3)
log_paths, mean_path, max_path = dg.path_stats(full)
print(f"full DAG, n={n}:")
print(f"  edges            {len(full.edges)}  (expect n(n-1)/2 = {n*(n-1)//2})")
print(f"  ln(path count)   {log_paths:.4f}  (expect (n-2)ln2 = {(n-2)*math.log(2):.4f})")
print(f"  mean path        {mean_path:.1f}  (expect 1+(n-2)/2 = {1+(n-2)/2:.1f})")
print(f"  max path         {max_path}  (expect n-1 = {n-1})")
print(f"  mean degree      {dg.mean_degree(full):.1f}")
print(f"  edge connectivity {dg.edge_connectivity(full)}  (complete graph: n-1)")

elong = dg.graph_elongation(full)
print(f"  pca_elongation   {elong:.4f}  (dense graph embeds round: ~0)")

chain = DagSpec(8, (0,) * 8, tuple((i, i + 1) for i in range(7)))
log_paths, mean_path, max_path = dg.path_stats(chain)
print(f"\nchain of 8 nodes:")
print(f"  ln(path count)   {log_paths:.1f}  (one path)")
print(f"  mean = max path  {mean_path:.0f} = {max_path}")
print(f"  pca_elongation   {dg.graph_elongation(chain):.4f}  (a line: ~1)")
print(f"  edge connectivity {dg.edge_connectivity(chain)}  (cut anywhere)")
print(f"  quasi-1D?        {dg.q1d(dg.graph_elongation(chain), dg.edge_connectivity(chain))}"
      "  (elongated but splittable by one cut)")

g12 = dg.build_full_dag(12, 3)
series = communicability_series(g12)
expm = communicability_expm(g12)
print(f"\ncommunicability, 12-node full DAG:")
print(f"  finite series    {series:.10f}")
print(f"  matrix exponential {expm:.10f}")
print(f"  |difference|     {abs(series - expm):.2e}")
