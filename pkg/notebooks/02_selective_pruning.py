# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Selective pruning and upload compression
#
# Selective pruning zeroes the coordinates of the learning model that are
# among the top-beta magnitudes of the unlearning model but not of the
# learning model. L1 pruning drops the smallest magnitudes before upload.

# %%
import numpy as np

from soul.pruning import l1_prune, magnitude_mask, selective_prune, to_sparse

theta_l = np.array([10.0, 1.0, 1.0, 1.0])
theta_ul = np.array([1.0, 10.0, 1.0, 1.0])
pruned, dropped = selective_prune(theta_l, theta_ul, beta=0.25)
print("M_ul", magnitude_mask(theta_ul, 0.25).indices, "M_l", magnitude_mask(theta_l, 0.25).indices)
print("dropped", dropped.indices, "->", pruned)

# %% [markdown]
# On random vectors the dropped set grows with beta until the two top sets
# start to overlap.

# %%
rng = np.random.default_rng(0)
a, b = rng.standard_normal(1000), rng.standard_normal(1000)
for beta in (0.05, 0.1, 0.2, 0.4, 0.8, 1.0):
    print(beta, selective_prune(a, b, beta)[1].kept_count)

# %% [markdown]
# Upload size after keeping 25% of the weights.

# %%
x = rng.standard_normal(100_000)
dense, sparse = to_sparse(x), to_sparse(l1_prune(x, 0.75))
print(dense.payload_bytes, sparse.payload_bytes, sparse.payload_bytes / dense.payload_bytes)
