"""Re-ranking objectives over the similarity structures.

Four variants, all constrained to the probability simplex:

* smrr: sample scores only, smoothed by the sample graph Laplacian,
* fmrr: feature scores only, smoothed by the feature graph Laplacian,
* sfmrr: sample and feature scores coupled through the bipartite graph,
* dmrr: the full dual objective over the (n+d)-dimensional block operator,
  alternating one simplex QP in u with one in v until the relative change
  of the objective drops below the outer tolerance.

The u-step runs first and the v-step uses the freshly updated u.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError
from .graphs import normalized_affinity, normalized_bipartite
from .init_scores import ScoreVector
from .simplex_qp import QpSubproblem, solve_simplex_qp

__all__ = [
    "RerankParams",
    "ObjectiveTrace",
    "SelectionResult",
    "smrr",
    "fmrr",
    "sfmrr",
    "dmrr",
    "objective_value",
    "select_top_features",
    "export_vector",
]


@dataclass(frozen=True)
class RerankParams:
    """Balance weights and outer-loop stopping controls."""

    lambda1: float
    lambda2: float = 0.0
    tol: float = 1e-6
    max_outer_iters: int = 300

    def __post_init__(self):
        if not self.lambda1 > 0:
            raise DimensionError(f"lambda1 must be positive, got {self.lambda1}")
        if self.lambda2 < 0:
            raise DimensionError(f"lambda2 must be >= 0, got {self.lambda2}")
        if not self.tol > 0:
            raise DimensionError(f"tol must be positive, got {self.tol}")


@dataclass(frozen=True)
class ObjectiveTrace:
    """Objective value after each outer sweep, plus how the loop ended."""

    values: np.ndarray
    converged: bool
    iterations: int
    psd_subproblems: bool = True


@dataclass(frozen=True)
class SelectionResult:
    feature_order: np.ndarray
    chosen: np.ndarray
    scores: ScoreVector
    sample_scores: ScoreVector | None = None


def _values(x):
    return x.values if hasattr(x, "values") else np.asarray(x, dtype=np.float64)


def _descending_order(v):
    # stable argsort of -v: ties break toward the lower feature index
    return np.argsort(-v, kind="stable")


def _relative_change(current, previous):
    if previous == 0.0:
        return 0.0 if current == previous else np.inf
    return abs(current - previous) / abs(previous)


def smrr(sample_graph, u0, lambda1, with_report=False):
    """Sample manifold re-ranking: min u'L_u u + lambda1 ||u - u0||^2 on the simplex.

    One simplex QP with quadratic operator L_u + lambda1*I, i.e.
    (1 + lambda1)*u - S11 @ u, and linear term -2*lambda1*u0.
    """
    u0v = _values(u0)
    s11 = normalized_affinity(sample_graph)
    problem = QpSubproblem.from_shifted_affinity(
        1.0 + lambda1, 1.0, s11, -2.0 * lambda1 * u0v
    )
    report = solve_simplex_qp(problem, ScoreVector.uniform(len(u0v), "sample"))
    u = ScoreVector(values=report.solution, side="sample")
    return (u, report) if with_report else u


def fmrr(feature_graph, v0, lambda1, with_report=False):
    """Feature-side mirror of smrr, smoothing v over the feature graph."""
    v0v = _values(v0)
    s22 = normalized_affinity(feature_graph)
    problem = QpSubproblem.from_shifted_affinity(
        1.0 + lambda1, 1.0, s22, -2.0 * lambda1 * v0v
    )
    report = solve_simplex_qp(problem, ScoreVector.uniform(len(v0v), "feature"))
    v = ScoreVector(values=report.solution, side="feature")
    return (v, report) if with_report else v


def _identity_problem(alpha, b):
    return QpSubproblem(dim=b.shape[0], linear=b, matvec=lambda z: alpha * z)


def sfmrr(bipartite, u0, v0, lambda1, tol=1e-6, max_outer_iters=300, with_trace=False):
    """Bipartite-coupled re-ranking of u and v.

    Minimizes u'u - 2 u'S12 v + v'v + lambda1 (||u - u0||^2 + ||v - v0||^2)
    by alternating the two closed subproblems (each has quadratic operator
    (1 + lambda1)*I), stopping on the same relative-objective rule as dmrr.
    """
    u0v, v0v = _values(u0), _values(v0)
    s12 = normalized_bipartite(bipartite)
    n, d = s12.shape
    u = np.full(n, 1.0 / n)
    v = np.full(d, 1.0 / d)
    alpha = 1.0 + lambda1

    def objective(u, v):
        du, dv = u - u0v, v - v0v
        return float(
            u @ u - 2.0 * (u @ (s12 @ v)) + v @ v
            + lambda1 * (du @ du + dv @ dv)
        )

    trace = [objective(u, v)]
    converged = False
    for _ in range(max_outer_iters):
        rep_u = solve_simplex_qp(
            _identity_problem(alpha, -2.0 * (s12 @ v + lambda1 * u0v)), u
        )
        u = rep_u.solution
        rep_v = solve_simplex_qp(
            _identity_problem(alpha, -2.0 * (s12.T @ u + lambda1 * v0v)), v
        )
        v = rep_v.solution
        trace.append(objective(u, v))
        if _relative_change(trace[-1], trace[-2]) < tol:
            converged = True
            break
    result = (
        ScoreVector(values=u, side="sample"),
        ScoreVector(values=v, side="feature"),
    )
    if with_trace:
        out = ObjectiveTrace(
            values=np.asarray(trace), converged=converged, iterations=len(trace) - 1
        )
        return result + (out,)
    return result


def objective_value(laplacian, u, v, u0, v0, lambda1):
    """Dual objective [u;v]' L [u;v] + lambda1 ||[u;v] - [u0;v0]||^2.

    Expanded against the block structure of L:

        2 (u'u + v'v) - lambda2 (u'S11 u + 2 u'S12 v + v'S22 v)
        + lambda1 (||u - u0||^2 + ||v - v0||^2)

    with lambda2 taken from the laplacian's coupling.
    """
    uv, vv = _values(u), _values(v)
    du, dv = uv - _values(u0), vv - _values(v0)
    smooth = (
        uv @ (laplacian.s11 @ uv)
        + 2.0 * (uv @ (laplacian.s12 @ vv))
        + vv @ (laplacian.s22 @ vv)
    )
    return float(
        2.0 * (uv @ uv + vv @ vv)
        - laplacian.coupling * smooth
        + lambda1 * (du @ du + dv @ dv)
    )


def dmrr(laplacian, u0, v0, params, m=None):
    """Dual manifold re-ranking by alternating simplex QPs.

    Starting from uniform u and v, each outer sweep solves the u-subproblem
    with operator (2 + lambda1)*I - lambda2*S11 and linear term
    -2*lambda2*S12 v - 2*lambda1*u0, then the v-subproblem with the mirror
    quantities using the new u. The loop stops when the relative objective
    change falls below params.tol or after params.max_outer_iters sweeps;
    on non-convergence the best-objective iterate is kept so grid sweeps
    never abort.

    Returns (SelectionResult, ObjectiveTrace); features are ordered by
    descending v with ties broken toward the lower index.
    """
    lap = laplacian.with_coupling(params.lambda2)
    n, d = lap.n, lap.d
    u0v, v0v = _values(u0), _values(v0)
    if u0v.shape[0] != n or v0v.shape[0] != d:
        raise DimensionError(
            f"priors of length {u0v.shape[0]}/{v0v.shape[0]} do not match"
            f" laplacian blocks of size {n}/{d}"
        )
    lam1, lam2 = params.lambda1, params.lambda2
    alpha = 2.0 + lam1
    u = np.full(n, 1.0 / n)
    v = np.full(d, 1.0 / d)

    u_prob = QpSubproblem.from_shifted_affinity(alpha, lam2, lap.s11, np.zeros(n))
    v_prob = QpSubproblem.from_shifted_affinity(alpha, lam2, lap.s22, np.zeros(d))

    trace = [objective_value(lap, u, v, u0v, v0v, lam1)]
    best = (trace[0], u, v)
    converged = False
    for _ in range(params.max_outer_iters):
        u_prob.linear = -2.0 * lam2 * (lap.s12 @ v) - 2.0 * lam1 * u0v
        u = solve_simplex_qp(u_prob, u).solution
        v_prob.linear = -2.0 * lam2 * (lap.s12.T @ u) - 2.0 * lam1 * v0v
        v = solve_simplex_qp(v_prob, v).solution
        trace.append(objective_value(lap, u, v, u0v, v0v, lam1))
        if trace[-1] < best[0]:
            best = (trace[-1], u, v)
        if _relative_change(trace[-1], trace[-2]) < params.tol:
            converged = True
            break
    if not converged:
        _, u, v = best

    out = ObjectiveTrace(
        values=np.asarray(trace),
        converged=converged,
        iterations=len(trace) - 1,
        psd_subproblems=not (u_prob.is_indefinite() or v_prob.is_indefinite()),
    )
    scores = ScoreVector(values=v, side="feature")
    selection = select_top_features(scores, d if m is None else m)
    selection = SelectionResult(
        feature_order=selection.feature_order,
        chosen=selection.chosen,
        scores=scores,
        sample_scores=ScoreVector(values=u, side="sample"),
    )
    return selection, out


def select_top_features(v, m):
    """Indices of the m largest feature scores, ties toward the lower index."""
    values = _values(v)
    d = values.shape[0]
    if not 1 <= m <= d:
        raise DimensionError(f"m={m} out of range for {d} features")
    order = _descending_order(values)
    score_vec = v if isinstance(v, ScoreVector) else ScoreVector(values=values, side="feature")
    return SelectionResult(
        feature_order=order, chosen=order[:m], scores=score_vec
    )


def export_vector(values, path):
    """Write a score or index vector as plain text, one value per line."""
    arr = _values(values)
    with open(path, "w") as fh:
        for x in arr:
            fh.write(f"{int(x)}\n" if np.issubdtype(arr.dtype, np.integer) else f"{x!r}\n")
