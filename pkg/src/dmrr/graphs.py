"""Similarity structures over samples, features, and sample-feature pairs.

Three graphs drive the re-ranking objectives:

* a kNN Gaussian graph over samples (n x n, sparse symmetric),
* the same construction over features (d x d),
* a dense bipartite affinity between samples and features (n x d) built
  from each entry's deviation from its feature's mean.

The dual Laplacian packs the degree-normalized versions of all three into
one symmetric (n+d) x (n+d) operator 2I - lambda2 * [[S11, S12], [S21, S22]],
where S21 is always the transpose of S12 (never stored separately).
"""

from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateDataError, DimensionError

__all__ = [
    "GraphParams",
    "SimilarityGraph",
    "BipartiteGraph",
    "DegreeVector",
    "DualLaplacian",
    "pairwise_sq_dists",
    "median_bandwidth",
    "knn_gaussian_graph",
    "bipartite_bandwidth",
    "bipartite_graph",
    "degree_vector",
    "dual_laplacian",
    "normalized_affinity",
    "normalized_bipartite",
    "dump_coordinates",
]

# Degrees below this are floored before inverse-square-root normalization,
# so pathological zero-degree nodes never divide by zero.
DEGREE_FLOOR = 1e-12

# Incremented once per constructed graph; lets tests observe that an
# experiment builds each graph exactly once.
BUILD_COUNTS = Counter()


@dataclass(frozen=True)
class GraphParams:
    """Neighbor count k and Gaussian sharpness gamma."""

    k: int = 5
    gamma: float = 8.0

    def __post_init__(self):
        if self.k < 1:
            raise DimensionError(f"k must be >= 1, got {self.k}")
        if not self.gamma > 0:
            raise DimensionError(f"gamma must be positive, got {self.gamma}")


@dataclass(frozen=True)
class SimilarityGraph:
    """Sparse symmetric kNN affinity over one entity set (samples or features)."""

    weights: sp.csr_matrix
    bandwidth: float
    side: str  # "sample" or "feature"

    @property
    def n_nodes(self):
        return self.weights.shape[0]


@dataclass(frozen=True)
class BipartiteGraph:
    """Dense n x d sample-feature affinity; the d x n direction is its transpose."""

    weights: np.ndarray
    bandwidth: float
    feature_means: np.ndarray


@dataclass(frozen=True)
class DegreeVector:
    degrees: np.ndarray
    source: str


def pairwise_sq_dists(matrix, side="sample"):
    """Squared Euclidean distances between rows (samples) or columns (features).

    The result is exactly symmetric with an exactly zero diagonal.
    """
    x = matrix.values if hasattr(matrix, "values") else np.asarray(matrix)
    if side == "feature":
        x = x.T
    elif side != "sample":
        raise ValueError(f"side must be 'sample' or 'feature', got {side!r}")
    sq = np.einsum("ij,ij->i", x, x)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    d2 = 0.5 * (d2 + d2.T)  # force exact symmetry
    np.clip(d2, 0.0, None, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def median_bandwidth(dists):
    """Median of the strictly-upper-triangle Euclidean distances.

    `dists` holds squared distances; the median is taken over their square
    roots. An even count uses the mean of the two middle values.
    """
    m = np.asarray(dists)
    if m.shape[0] < 2:
        raise DimensionError("need at least 2 nodes for a bandwidth")
    iu = np.triu_indices(m.shape[0], k=1)
    delta = float(np.median(np.sqrt(m[iu])))
    if delta <= 0.0:
        raise DegenerateDataError(
            "median pairwise distance is zero; kernel bandwidth undefined"
        )
    return delta


def _knn_union_mask(d2, k):
    """Boolean mask where j is among i's k nearest or i among j's.

    Self-distances are excluded; ties at the k-th neighbor break toward the
    lower node index (stable argsort), so the graph is deterministic.
    """
    n = d2.shape[0]
    work = d2.copy()
    np.fill_diagonal(work, np.inf)
    order = np.argsort(work, axis=1, kind="stable")
    mask = np.zeros((n, n), dtype=bool)
    rows = np.repeat(np.arange(n), k)
    mask[rows, order[:, :k].ravel()] = True
    return mask | mask.T


def knn_gaussian_graph(matrix, side, params):
    """kNN graph with Gaussian weights exp(-gamma * dist^2 / delta^2).

    delta is the median pairwise distance on the chosen side. Neighborhoods
    are symmetrized by union, so every node keeps at least k edges.
    """
    d2 = pairwise_sq_dists(matrix, side)
    n = d2.shape[0]
    if params.k >= n:
        raise DimensionError(
            f"k={params.k} must be smaller than the node count {n} on side {side!r}"
        )
    delta = median_bandwidth(d2)
    weights = np.exp(-params.gamma * d2 / (delta * delta))
    weights[~_knn_union_mask(d2, params.k)] = 0.0
    np.fill_diagonal(weights, 0.0)
    BUILD_COUNTS[f"knn_{side}"] += 1
    return SimilarityGraph(
        weights=sp.csr_matrix(weights), bandwidth=delta, side=side
    )


def bipartite_bandwidth(matrix):
    """Bandwidth for the sample-feature graph, determined in three steps.

    1. the absolute deviation of every entry from its feature's mean,
    2. the per-feature median of those deviations,
    3. the maximum of the d medians.
    """
    x = matrix.values if hasattr(matrix, "values") else np.asarray(matrix)
    dev = np.abs(x - x.mean(axis=0))
    delta = float(np.median(dev, axis=0).max())
    if delta <= 0.0:
        raise DegenerateDataError(
            "every feature's median deviation is zero; bipartite bandwidth undefined"
        )
    return delta


def bipartite_graph(matrix, gamma=8.0):
    """Dense affinity exp(-gamma * (X_ij - mean_j)^2 / delta^2), entries in (0, 1]."""
    x = matrix.values if hasattr(matrix, "values") else np.asarray(matrix)
    means = x.mean(axis=0)
    delta = bipartite_bandwidth(x)
    dev = x - means
    weights = np.exp(-gamma * dev * dev / (delta * delta))
    BUILD_COUNTS["bipartite"] += 1
    return BipartiteGraph(weights=weights, bandwidth=delta, feature_means=means)


def degree_vector(graph, axis="row"):
    """Row or column sums of a graph's weight matrix."""
    if isinstance(graph, SimilarityGraph):
        w = graph.weights
        source = f"{graph.side} graph"
    elif isinstance(graph, BipartiteGraph):
        w = graph.weights
        source = "bipartite graph"
    else:
        w = graph
        source = "raw weights"
    if axis == "row":
        deg = np.asarray(w.sum(axis=1)).ravel()
    elif axis == "column":
        deg = np.asarray(w.sum(axis=0)).ravel()
    else:
        raise ValueError(f"axis must be 'row' or 'column', got {axis!r}")
    return DegreeVector(degrees=deg, source=f"{source} ({axis} sums)")


def _inv_sqrt_degrees(deg):
    return 1.0 / np.sqrt(np.maximum(deg, DEGREE_FLOOR))


def normalized_affinity(graph):
    """D^{-1/2} A D^{-1/2} for a SimilarityGraph, kept exactly symmetric."""
    a = graph.weights.tocoo()
    r = _inv_sqrt_degrees(np.asarray(graph.weights.sum(axis=1)).ravel())
    # scale by the product r_i * r_j in one multiply so (i, j) and (j, i)
    # round identically
    data = a.data * (r[a.row] * r[a.col])
    return sp.csr_matrix((data, (a.row, a.col)), shape=a.shape)


def normalized_bipartite(bgraph):
    """Dhat_u^{-1/2} A12 Dhat_v^{-1/2} for a BipartiteGraph."""
    w = bgraph.weights
    ru = _inv_sqrt_degrees(w.sum(axis=1))
    rv = _inv_sqrt_degrees(w.sum(axis=0))
    return w * (ru[:, None] * rv[None, :])


@dataclass(frozen=True)
class DualLaplacian:
    """The block operator 2I - lambda2 * [[S11, S12], [S21, S22]].

    Only S12 is stored; S21 is taken as its transpose wherever needed.
    """

    s11: sp.csr_matrix = field(repr=False)
    s22: sp.csr_matrix = field(repr=False)
    s12: np.ndarray = field(repr=False)
    coupling: float = 0.0

    @property
    def n(self):
        return self.s12.shape[0]

    @property
    def d(self):
        return self.s12.shape[1]

    def with_coupling(self, lambda2):
        """Same normalized blocks under a different coupling weight."""
        return DualLaplacian(
            s11=self.s11, s22=self.s22, s12=self.s12, coupling=float(lambda2)
        )

    def apply(self, z):
        """Apply the (n+d) x (n+d) operator to a stacked [u; v] vector."""
        z = np.asarray(z, dtype=np.float64)
        if z.shape[0] != self.n + self.d:
            raise DimensionError(
                f"vector length {z.shape[0]} != n + d = {self.n + self.d}"
            )
        u, v = z[: self.n], z[self.n :]
        top = self.s11 @ u + self.s12 @ v
        bottom = self.s12.T @ u + self.s22 @ v
        return 2.0 * z - self.coupling * np.concatenate([top, bottom])


def dual_laplacian(a11, a22, a12, lambda2):
    """Degree-normalize the three affinity structures into a DualLaplacian."""
    if lambda2 < 0:
        raise DimensionError(f"lambda2 must be >= 0, got {lambda2}")
    n, d = a12.weights.shape
    if a11.n_nodes != n:
        raise DimensionError(
            f"sample graph has {a11.n_nodes} nodes but bipartite graph has {n} rows"
        )
    if a22.n_nodes != d:
        raise DimensionError(
            f"feature graph has {a22.n_nodes} nodes but bipartite graph has {d} columns"
        )
    return DualLaplacian(
        s11=normalized_affinity(a11),
        s22=normalized_affinity(a22),
        s12=normalized_bipartite(a12),
        coupling=float(lambda2),
    )


def dump_coordinates(graph, path):
    """Debug dump of any graph as `row col weight` lines; not used by the pipeline."""
    if isinstance(graph, SimilarityGraph):
        coo = graph.weights.tocoo()
        triples = zip(coo.row, coo.col, coo.data)
    else:
        w = graph.weights if isinstance(graph, BipartiteGraph) else np.asarray(graph)
        rows, cols = np.nonzero(w)
        triples = zip(rows, cols, w[rows, cols])
    with open(path, "w") as fh:
        for i, j, w_ij in triples:
            fh.write(f"{i} {j} {w_ij!r}\n")
