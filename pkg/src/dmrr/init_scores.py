"""Initial sample and feature scores feeding the re-ranking objectives.

The sample prior u0 comes from a three-step heuristic on the data matrix;
the feature prior v0 is either ingested from an external scorer's output
file or computed by the built-in Laplacian Score baseline. Both priors end
up on the probability simplex so the fit terms compare like with like.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDataError, DimensionError, ParseError

__all__ = [
    "HIGHER_IS_BETTER",
    "LOWER_IS_BETTER",
    "ScoreVector",
    "RawScores",
    "initial_sample_scores",
    "laplacian_score",
    "normalize_scores_to_simplex",
    "load_external_scores",
]

HIGHER_IS_BETTER = "higher_is_better"
LOWER_IS_BETTER = "lower_is_better"

SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class ScoreVector:
    """Nonnegative vector summing to 1; side is "sample" or "feature"."""

    values: np.ndarray
    side: str

    def __len__(self):
        return self.values.shape[0]

    def validate(self):
        v = self.values
        if v.min(initial=0.0) < 0:
            raise DimensionError(f"score vector has negative entries (min {v.min()})")
        if abs(v.sum() - 1.0) > SIMPLEX_TOL:
            raise DimensionError(
                f"score vector sums to {v.sum()!r}, expected 1 within {SIMPLEX_TOL}"
            )
        return self

    @classmethod
    def uniform(cls, length, side):
        return cls(values=np.full(length, 1.0 / length), side=side)


@dataclass(frozen=True)
class RawScores:
    """Scores as produced by a feature scorer, before simplex normalization.

    Orientation is explicit because existing scorers disagree on it: a
    silently misread orientation would invert the whole experiment.
    """

    values: np.ndarray
    orientation: str

    def __post_init__(self):
        if self.orientation not in (HIGHER_IS_BETTER, LOWER_IS_BETTER):
            raise ValueError(f"unknown orientation {self.orientation!r}")
        if not np.all(np.isfinite(self.values)):
            raise ParseError("raw scores contain NaN or Inf")

    def oriented(self):
        """Values flipped so that higher always means better."""
        if self.orientation == LOWER_IS_BETTER:
            return -self.values
        return self.values


def initial_sample_scores(matrix):
    """Sample prior u0 from the shift / sum / normalize / s(1-s) heuristic.

    1. subtract each feature's minimum, then sum each row into s,
    2. divide s by its maximum,
    3. replace s_i by s_i * (1 - s_i).

    The result is normalized onto the simplex; a degenerate all-zero step 3
    (e.g. identical rows) falls back to the uniform vector.
    """
    x = matrix.values if hasattr(matrix, "values") else np.asarray(matrix)
    s = (x - x.min(axis=0)).sum(axis=1)
    top = s.max()
    if top > 0:
        s = s / top
    u = s * (1.0 - s)
    total = u.sum()
    if total <= 0:
        return ScoreVector.uniform(x.shape[0], "sample")
    return ScoreVector(values=u / total, side="sample")


def laplacian_score(matrix, sample_graph):
    """Per-feature locality scores on the sample graph; lower is better.

    For each feature f, with W the graph weights, D its degree diagonal and
    L = D - W:

        score = f~' L f~ / f~' D f~,  f~ = f - (f' D 1 / 1' D 1) 1

    Constant features make both quadratic forms vanish; they are assigned
    one more than the worst finite score so they always rank last.
    """
    x = matrix.values if hasattr(matrix, "values") else np.asarray(matrix)
    w = sample_graph.weights
    deg = np.asarray(w.sum(axis=1)).ravel()
    total = deg.sum()
    if total <= 0:
        raise DegenerateDataError("sample graph has no edges")
    centered = x - (deg @ x) / total
    d_f = deg[:, None] * centered
    numer = np.einsum("ij,ij->j", centered, d_f - (w @ centered))
    denom = np.einsum("ij,ij->j", centered, d_f)
    constant = np.ptp(x, axis=0) == 0
    degenerate = constant | (denom <= 0)
    scores = np.empty(x.shape[1])
    scores[~degenerate] = numer[~degenerate] / denom[~degenerate]
    worst = scores[~degenerate].max() if not degenerate.all() else 0.0
    scores[degenerate] = worst + 1.0
    return RawScores(values=scores, orientation=LOWER_IS_BETTER)


def normalize_scores_to_simplex(raw):
    """Map raw feature scores onto the simplex, respecting orientation.

    Negate if lower-is-better, shift so the minimum is 0, divide by the
    sum. All-equal scores become the uniform vector.
    """
    oriented = raw.oriented()
    shifted = oriented - oriented.min()
    total = shifted.sum()
    if total <= 0:
        return ScoreVector.uniform(shifted.shape[0], "feature")
    return ScoreVector(values=shifted / total, side="feature")


def load_external_scores(path, orientation, expected_length=None):
    """Read one raw score per line, as emitted by an external feature scorer."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    values = []
    for line_no, line in enumerate(lines, start=1):
        token = line.strip()
        try:
            values.append(float(token))
        except ValueError:
            raise ParseError(
                f"non-numeric score {token!r} at line {line_no} of {path}"
            ) from None
    if not values:
        raise ParseError(f"empty score file: {path}")
    if expected_length is not None and len(values) != expected_length:
        raise DimensionError(
            f"score file has {len(values)} entries but the data has"
            f" {expected_length} features"
        )
    return RawScores(values=np.asarray(values), orientation=orientation)
