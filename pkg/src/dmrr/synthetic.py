"""Synthetic data with planted informative features.

The fixture has two balanced clusters. Informative columns carry the
cluster signal (two well-separated levels, nearly identical across the
planted columns); noise columns take the same two levels but assigned at
random, independent of the clusters and of each other. Every column then
has the same deviation-from-mean profile, so the bipartite affinity treats
them alike and only the genuine structure separates planted from noise.
"""

import numpy as np

from .datasets import DataMatrix, LabelVector

__all__ = ["make_planted_clusters", "PLANTED_FEATURES"]

PLANTED_FEATURES = (3, 7)


def make_planted_clusters(
    n=40,
    d=10,
    planted=PLANTED_FEATURES,
    low=0.0,
    high=4.0,
    jitter=0.05,
    seed=7,
):
    """Two-cluster data with known informative columns.

    Returns (DataMatrix, LabelVector, planted_indices). Rows 0..n/2-1 form
    cluster "a", the rest cluster "b"; each planted column equals `low` on
    one cluster and `high` on the other, up to a small jitter. Noise
    columns are random draws from the same two levels.
    """
    rng = np.random.default_rng(seed)
    planted = tuple(planted)
    half = n // 2
    membership = np.repeat([0, 1], [half, n - half])
    x = np.empty((n, d))
    for j in range(d):
        if j in planted:
            levels = membership
        else:
            levels = rng.integers(0, 2, size=n)
        x[:, j] = np.where(levels == 0, low, high) + jitter * rng.standard_normal(n)
    labels = LabelVector.from_labels(["a" if m == 0 else "b" for m in membership])
    return DataMatrix(values=x), labels, planted
