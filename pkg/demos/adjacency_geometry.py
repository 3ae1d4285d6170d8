"""
Electrode geometry to starting adjacency
========================================

Walks from the shipped 62-channel montage to the initial graph the model
trains from: inverse-square local weights, calibrated so roughly a fifth
of the connections matter, plus nine negative hemisphere pairs.
"""
import numpy as np

from eegraph.electrodes import (
    builtin_layout,
    calibrate_delta,
    default_global_pairs,
    initial_adjacency,
    pairwise_distances,
    sparsity_fraction,
)

layout = builtin_layout()
print(f"montage: {layout.n} electrodes, first five: {layout.names[:5]}")

# distances drive the local weights: w_ij = min(1, delta / d_ij^2)
dist = pairwise_distances(layout.positions)
print(f"nearest pair sits {dist[dist > 0].min():.1f} units apart, "
      f"farthest {dist.max():.1f}")

# delta is not hand-picked: it is solved from the distance order statistics
# so the above-threshold fraction lands on the target
delta = calibrate_delta(dist)
adj = initial_adjacency(layout, default_global_pairs(), delta)
print(f"calibrated delta = {delta:.2f}")
print(f"fraction of connections above threshold: {sparsity_fraction(adj):.3f}")

full = adj.full()
print("\nstrongest local connections:")
order = np.argsort(full, axis=None)[::-1]
shown = 0
for flat in order:
    i, j = divmod(int(flat), layout.n)
    if i >= j or full[i, j] >= 1.0:
        continue
    print(f"  {layout.names[i]:4s} -- {layout.names[j]:4s}  {full[i, j]:.3f}")
    shown += 1
    if shown == 5:
        break

print("\nhemisphere pairs start negative (differential asymmetry):")
for i, j in default_global_pairs().resolve(layout):
    print(f"  {layout.names[i]:4s} -- {layout.names[j]:4s}  {full[i, j]:+.3f}")
