"""The three-level synthetic difficulty ladder, validated by a linear
probe.

Level 1 is linearly separable (a bright half encodes the class), level 2
needs local features (oriented gratings with random phase), level 3
needs global integration (the orientation of a cross-box pair placed
anywhere on a torus).  A softmax regression on raw pixels should ace
level 1 and fall to chance by level 3.
"""

import numpy as np

import dagsparse as dg

print(f"{'level':>5} {'probe acc':>10}  description")
descriptions = {
    1: "bright half encodes class (linear)",
    2: "grating orientation (local features)",
    3: "cross->box axis orientation (global)",
}
for level in (1, 2, 3):
    accs = [dg.linear_probe_accuracy(
        dg.gen_shapes(level, 400, 16, 1, seed=s, num_classes=4,
                      test_size=200)) for s in range(3)]
    print(f"{level:>5} {np.mean(accs):>10.3f}  {descriptions[level]}")

print("\ntransforms:")
d = dg.gen_shapes(2, 200, 8, 1, seed=0, num_classes=4, test_size=100)
e = dg.embed_colorize(d, 12, seed=1)
print(f"  embed_colorize: {d.train_images.shape} -> {e.train_images.shape} "
      "(random offset, tint, color noise)")
t = dg.tear_up(d, 4, seed=2)
print(f"  tear_up(4): fixed patch permutation + rotations, "
      f"probe {dg.linear_probe_accuracy(d):.3f} -> "
      f"{dg.linear_probe_accuracy(t):.3f}")
