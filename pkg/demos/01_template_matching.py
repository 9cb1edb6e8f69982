# Matching subgraph templates against adjacency windows
# ------------------------------------------------------
# A graph's adjacency matrix depends on the arbitrary order its nodes were
# listed in.  This walkthrough shows how matching a small template under
# *all* simultaneous row/column relabelings removes that dependence, and
# how the per-window scores become a feature tensor.

import numpy as np

from isograph import (
    LayerConfig,
    brute_match,
    enumerate_permutations,
    forward_layer,
    min_pool,
    motif_matrix,
    permute_conjugate,
    softmax_normalize,
)

rng = np.random.default_rng(0)

# A 3-node template: the triangle (3-clique).
template = motif_matrix("clique3")
print("template (triangle):")
print(template.astype(int))

# Relabeling the template's nodes permutes rows and columns together.
# There are 3! = 6 relabelings; all of them leave a triangle a triangle.
perms = enumerate_permutations(3)
print(f"\n{len(perms)} relabelings of 3 nodes, e.g. {perms[4]} ->")
print(permute_conjugate(perms[4], template).astype(int))

# A path graph on 3 nodes, listed in two different node orders:
path_a = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
path_b = permute_conjugate((2, 0, 1), path_a)
print("\nsame path graph, two node orders:")
print(path_a.astype(int))
print(path_b.astype(int))

# The matching score is the squared Frobenius distance at the best
# relabeling.  It is identical for both orders — node order is gone.
res_a = brute_match(template, path_a)
res_b = brute_match(template, path_b)
print(f"\ntriangle-vs-path score, order 1: {res_a.dist}")
print(f"triangle-vs-path score, order 2: {res_b.dist}")
assert res_a.dist == res_b.dist

# A perfect match scores exactly zero:
scrambled_triangle = permute_conjugate((1, 2, 0), template)
print(f"triangle-vs-scrambled-triangle score: {brute_match(template, scrambled_triangle).dist}")

# Sliding the template over a bigger graph gives one score per window.
# Build a 7-node graph with a triangle hidden among nodes 3..5:
g = np.zeros((7, 7))
g[3:6, 3:6] = template
g[0, 6] = g[6, 0] = 1.0
print("\nhost graph:")
print(g.astype(int))

# The raw tensor holds one score per (relabeling, window); min-pooling
# over relabelings keeps the best score and records which relabeling won.
grid = 7 - 3 + 1
raw = np.empty((len(perms), grid, grid))
for s in range(grid):
    for t in range(grid):
        raw[:, s, t] = brute_match(template, g[s : s + 3, t : t + 3]).all_dists
pooled = min_pool(raw)
print("\nmin-pooled scores (0 means the window holds a triangle):")
print(pooled.values)

# Softmax rescaling turns small distances into large features in (0, 1):
features = softmax_normalize(pooled.values[None], "per_kernel")
print("\nfeature map (each channel sums to 1):")
print(np.round(features[0], 3))
best = np.unravel_index(np.argmax(features[0]), features[0].shape)
print(f"strongest feature at window {best} — exactly where the triangle sits")

# forward_layer does all of the above in one call (and is what training uses):
q, cache = forward_layer(g, template[None], LayerConfig(size_k=3, channels_c=1))
assert np.allclose(q, features)
print("\nforward_layer reproduces the hand-built pipeline:", np.allclose(q, features))
