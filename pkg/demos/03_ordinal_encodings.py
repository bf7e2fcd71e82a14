"""
Three ways to make a classifier respect level order
===================================================

Plain cross entropy treats low / medium / high as unrelated classes. The
library offers three encodings that re-introduce the ordering: distance-
decayed soft targets, cumulative binary decomposition, and an auxiliary
pairwise comparison task.
"""

import numpy as np

from lyricgauge import (binary_decode, binary_targets, expected_level, rank_targets,
                        sample_rank_pairs, soften_label)

LEVELS = ["low", "medium", "high"]

# soft targets: weight exp(-distance) on each class, normalized. The true
# level keeps most of the mass, neighbors keep more than the far class.
print("distance-decayed targets:")
for y in range(3):
    t = soften_label(y)
    print(f"  true={LEVELS[y]:<7} -> " + "  ".join(f"{v:.4f}" for v in t))

# cumulative decomposition: two independent yes/no questions,
# "above low?" and "above medium?"
print("\ncumulative binary targets (above-low, above-medium):")
for y in range(3):
    print(f"  true={LEVELS[y]:<7} -> {binary_targets(y)}")

# decoding inverts the construction: masses (1-p1, p1-p2, p2). Inconsistent
# head pairs (p2 > p1) are clamped to zero and renormalized.
print("\ndecoding threshold probabilities:")
for p1, p2 in [(0.9, 0.7), (0.9, 0.1), (0.1, 0.05), (0.2, 0.6)]:
    dist = binary_decode(np.array([p1, p2]))
    exp = expected_level(dist[None, :])[0]
    flag = " (inconsistent heads, clamped)" if p2 > p1 else ""
    print(f"  p1={p1:.2f} p2={p2:.2f} -> " +
          " ".join(f"{v:.3f}" for v in dist) + f"  E[level]={exp:.2f}{flag}")

# the comparison task labels a pair of documents per aspect:
# is the left one lower, the same, or higher?
print("\npairwise comparison targets (0=lower, 1=same, 2=higher):")
labels_a = [0, 2, 1, 0, 2]
labels_b = [1, 1, 1, 0, 0]
print(f"  left levels : {labels_a}")
print(f"  right levels: {labels_b}")
print(f"  targets     : {rank_targets(labels_a, labels_b).tolist()}")

# training pairs come from a seeded shuffle of each batch; an odd batch
# reuses one document so nothing is dropped
pairs = sample_rank_pairs([10, 11, 12, 13, 14], seed=3)
print(f"\npairs drawn from an odd batch of five: {pairs}")
