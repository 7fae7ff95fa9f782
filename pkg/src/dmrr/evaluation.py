"""Clustering-based evaluation of a selected feature subset.

One k-means run is fully determined by its seed: distance-weighted
(k-means++-style) initialization, Lloyd iterations to an assignment
fixpoint (at most 300), empty clusters repaired by stealing the point
farthest from its centroid. Partition quality is scored by accuracy under
the optimal one-to-one cluster-to-class mapping, normalized mutual
information, and purity.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DimensionError

__all__ = [
    "ClusteringRun",
    "MetricsRecord",
    "kmeans",
    "acc",
    "nmi",
    "purity",
]

LLOYD_MAX_ITERS = 300


@dataclass(frozen=True)
class ClusteringRun:
    """Assignments from one seeded k-means run."""

    assignments: np.ndarray
    inertia: float
    seed: int


def _as_ids(labeling):
    """Dense integer ids from a ClusteringRun, LabelVector, or raw sequence."""
    if hasattr(labeling, "assignments"):
        raw = labeling.assignments
    elif hasattr(labeling, "ids"):
        raw = labeling.ids
    else:
        raw = labeling
    _, ids = np.unique(np.asarray(raw), return_inverse=True)
    return ids


def _plus_plus_init(x, c, rng):
    """Distance-weighted seeding: each next center drawn with probability
    proportional to the squared distance to the nearest chosen center."""
    n = x.shape[0]
    centers = np.empty((c, x.shape[1]))
    chosen = np.zeros(n, dtype=bool)
    first = int(rng.integers(n))
    centers[0] = x[first]
    chosen[first] = True
    closest = ((x - centers[0]) ** 2).sum(axis=1)
    for j in range(1, c):
        weights = np.where(chosen, 0.0, closest)
        total = weights.sum()
        if total > 0:
            idx = int(rng.choice(n, p=weights / total))
        else:
            # all remaining points coincide with a center; take the first
            # unchosen index so the draw stays deterministic
            idx = int(np.flatnonzero(~chosen)[0])
        centers[j] = x[idx]
        chosen[idx] = True
        closest = np.minimum(closest, ((x - centers[j]) ** 2).sum(axis=1))
    return centers


def _sq_dists_to_centers(x, centers):
    xx = np.einsum("ij,ij->i", x, x)[:, None]
    cc = np.einsum("ij,ij->i", centers, centers)[None, :]
    return np.maximum(xx + cc - 2.0 * (x @ centers.T), 0.0)


def kmeans(data, c, seed):
    """One Lloyd k-means run on the given rows; deterministic in `seed`."""
    x = data.values if hasattr(data, "values") else np.asarray(data, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError("k-means needs a 2-d array of selected columns")
    n = x.shape[0]
    if not 2 <= c <= n:
        raise DimensionError(f"cluster count {c} must be in [2, {n}]")
    rng = np.random.default_rng(seed)
    centers = _plus_plus_init(x, c, rng)

    assignments = None
    for _ in range(LLOYD_MAX_ITERS):
        d2 = _sq_dists_to_centers(x, centers)
        new_assignments = d2.argmin(axis=1)
        # repair empty clusters with the point farthest from its centroid
        point_d2 = d2[np.arange(n), new_assignments]
        for k in range(c):
            if not (new_assignments == k).any():
                far = int(point_d2.argmax())
                new_assignments[far] = k
                point_d2[far] = 0.0
        if assignments is not None and np.array_equal(new_assignments, assignments):
            break
        assignments = new_assignments
        for k in range(c):
            members = x[assignments == k]
            if members.shape[0]:
                centers[k] = members.mean(axis=0)

    d2 = _sq_dists_to_centers(x, centers)
    inertia = float(d2[np.arange(n), assignments].sum())
    return ClusteringRun(assignments=assignments, inertia=inertia, seed=seed)


def _contingency(pred, truth):
    p, t = _as_ids(pred), _as_ids(truth)
    if p.shape[0] != t.shape[0]:
        raise DimensionError(
            f"labelings have different lengths: {p.shape[0]} vs {t.shape[0]}"
        )
    table = np.zeros((p.max() + 1, t.max() + 1), dtype=np.int64)
    np.add.at(table, (p, t), 1)
    return table


def acc(pred, truth):
    """Clustering accuracy under the best one-to-one cluster/class mapping.

    The mapping is a maximum-weight assignment on the contingency table
    (Hungarian method; rectangular tables are handled directly).
    """
    table = _contingency(pred, truth)
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(table[rows, cols].sum()) / table.sum()


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def nmi(pred, truth):
    """Mutual information normalized by the larger of the two entropies.

    Degenerate single-class labelings have zero entropy; the value is 1
    when both partitions are single-class (identical) and 0 when only one
    is (zero mutual information).
    """
    table = _contingency(pred, truth)
    n = table.sum()
    h_pred = _entropy(table.sum(axis=1), n)
    h_truth = _entropy(table.sum(axis=0), n)
    largest = max(h_pred, h_truth)
    if largest == 0.0:
        return 1.0
    pi = table.sum(axis=1) / n
    pj = table.sum(axis=0) / n
    pij = table / n
    mask = pij > 0
    mi = float((pij[mask] * np.log(pij[mask] / np.outer(pi, pj)[mask])).sum())
    return max(mi, 0.0) / largest


def purity(pred, truth):
    """Average per-cluster majority-class fraction."""
    table = _contingency(pred, truth)
    return float(table.max(axis=1).sum()) / table.sum()


@dataclass(frozen=True)
class MetricsRecord:
    """Per-run acc/nmi/purity values with their means and standard deviations."""

    acc: np.ndarray
    nmi: np.ndarray
    purity: np.ndarray

    @classmethod
    def from_runs(cls, runs):
        """Build from an iterable of (acc, nmi, purity) triples."""
        arr = np.asarray(list(runs), dtype=np.float64).reshape(-1, 3)
        return cls(acc=arr[:, 0], nmi=arr[:, 1], purity=arr[:, 2])

    @property
    def acc_mean(self):
        return float(self.acc.mean())

    @property
    def acc_std(self):
        return float(self.acc.std())

    @property
    def nmi_mean(self):
        return float(self.nmi.mean())

    @property
    def nmi_std(self):
        return float(self.nmi.std())

    @property
    def purity_mean(self):
        return float(self.purity.mean())

    @property
    def purity_std(self):
        return float(self.purity.std())
