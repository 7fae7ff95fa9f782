"""Loading and describing numeric data matrices and ground-truth labels.

Data files are delimiter-separated text with one sample per row and one
feature per column. Labels are arbitrary strings, mapped internally to
dense integer ids 0..c-1 in first-appearance order.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ParseError

__all__ = [
    "DataMatrix",
    "LabelVector",
    "DatasetSummary",
    "load_matrix",
    "load_labels",
    "describe",
]


@dataclass(frozen=True)
class DataMatrix:
    """An n-by-d matrix of feature values, rows are samples."""

    values: np.ndarray
    feature_names: list | None = None

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def d(self):
        return self.values.shape[1]

    def validate(self):
        if self.values.ndim != 2:
            raise DimensionError("data matrix must be 2-dimensional")
        if self.n < 2 or self.d < 2:
            raise DimensionError(
                f"need at least 2 samples and 2 features, got {self.n}x{self.d}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ParseError("data matrix contains NaN or Inf entries")
        return self


@dataclass(frozen=True)
class LabelVector:
    """Ground-truth class labels for the rows of a DataMatrix.

    Labels may be arbitrary strings; `ids` maps them to dense integers
    0..c-1 in first-appearance order.
    """

    labels: tuple
    ids: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if self.ids is None:
            seen = {}
            ids = np.empty(len(self.labels), dtype=np.intp)
            for i, lab in enumerate(self.labels):
                if lab not in seen:
                    seen[lab] = len(seen)
                ids[i] = seen[lab]
            object.__setattr__(self, "ids", ids)

    @classmethod
    def from_labels(cls, labels):
        return cls(labels=tuple(labels))

    @property
    def n(self):
        return len(self.labels)

    @property
    def c(self):
        return len(set(self.labels))

    def validate_against(self, matrix):
        if self.n != matrix.n:
            raise DimensionError(
                f"label count {self.n} does not match sample count {matrix.n}"
            )
        if self.c < 2:
            raise DimensionError("need at least 2 distinct classes")
        return self


@dataclass(frozen=True)
class DatasetSummary:
    n: int
    d: int
    feature_min: np.ndarray
    feature_max: np.ndarray
    feature_mean: np.ndarray
    c: int | None = None


def _parse_cell(token, line_no, col_no):
    try:
        return float(token)
    except ValueError:
        raise ParseError(
            f"non-numeric value {token!r} at line {line_no}, column {col_no}"
        ) from None


def load_matrix(path, delimiter=",", has_header=False, label_column=None):
    """Parse a delimiter-separated text file into a (DataMatrix, LabelVector|None).

    Parameters
    ----------
    path : path to the text file, one sample per row
    delimiter : field separator, "," or "\\t"
    has_header : skip the first row when set
    label_column : optional column index; that column is split off as the
        label vector and excluded from the features

    Raises
    ------
    ParseError on ragged rows (the message names the offending line) or
    non-numeric feature cells; DimensionError when fewer than 2 samples or
    2 features remain.
    """
    rows = []
    raw_labels = []
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for line_no, record in enumerate(reader, start=1):
            if has_header and line_no == 1:
                continue
            if not record or (len(record) == 1 and record[0].strip() == ""):
                continue
            if width is None:
                width = len(record)
                if label_column is not None and not (0 <= label_column < width):
                    raise ParseError(
                        f"label_column {label_column} out of range for"
                        f" {width}-column file"
                    )
            elif len(record) != width:
                raise ParseError(
                    f"ragged row at line {line_no}: expected {width} fields,"
                    f" got {len(record)}"
                )
            feats = []
            for col_no, token in enumerate(record):
                if col_no == label_column:
                    raw_labels.append(token.strip())
                else:
                    feats.append(_parse_cell(token.strip(), line_no, col_no))
            rows.append(feats)
    if not rows:
        raise ParseError(f"no data rows in {path}")
    matrix = DataMatrix(values=np.asarray(rows, dtype=np.float64)).validate()
    labels = None
    if label_column is not None:
        labels = LabelVector.from_labels(raw_labels).validate_against(matrix)
    return matrix, labels


def load_labels(path):
    """Read one class identifier per line; c is the count of distinct values."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    labels = []
    for line_no, line in enumerate(lines, start=1):
        token = line.strip()
        if not token:
            raise ParseError(f"blank label at line {line_no} of {path}")
        labels.append(token)
    if not labels:
        raise ParseError(f"empty label file: {path}")
    return LabelVector.from_labels(labels)


def describe(matrix, labels=None):
    """Summarize a DataMatrix: n, d, and per-feature min/max/mean."""
    x = matrix.values
    return DatasetSummary(
        n=matrix.n,
        d=matrix.d,
        feature_min=x.min(axis=0),
        feature_max=x.max(axis=0),
        feature_mean=x.mean(axis=0),
        c=labels.c if labels is not None else None,
    )
