"""Quadratic minimization over the probability simplex.

Solves min_z z'Az + z'b subject to z >= 0, sum(z) = 1 by projected
gradient with a fixed step 1 / (2 ||A||_2), the spectral norm estimated by
power iteration. The quadratic operator is applied matrix-free, so a
shifted-affinity form alpha*I - scale*S never materializes a dense matrix.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NumericalError

__all__ = [
    "QpSubproblem",
    "SolverReport",
    "project_simplex",
    "solve_simplex_qp",
    "spectral_bounds",
]

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITERS = 10_000
NORM_FLOOR = 1e-12

# Relative slack when deciding whether the estimated smallest eigenvalue is
# negative; keeps power-iteration noise from flagging a PSD operator.
INDEFINITE_TOL = 1e-8


def project_simplex(y):
    """Euclidean projection onto {z : z >= 0, sum(z) = 1}.

    Sorting-based threshold method: sort descending, find the largest rho
    with y_(rho) - (sum of the top rho values - 1) / rho > 0, subtract that
    threshold everywhere and clip at zero.
    """
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise NumericalError("cannot project a non-finite vector", state=y)
    u = np.sort(y)[::-1]
    css = np.cumsum(u)
    thresholds = (css - 1.0) / np.arange(1, y.shape[0] + 1)
    rho = np.nonzero(u - thresholds > 0)[0][-1]
    return np.maximum(y - thresholds[rho], 0.0)


@dataclass
class QpSubproblem:
    """One simplex QP: quadratic operator, linear term, and dimension.

    The operator is either a dense symmetric matrix or a matvec callable;
    `from_shifted_affinity` builds the alpha*z - scale*(S @ z) form used by
    all the re-ranking subproblems. Spectral estimates are cached because
    alternating solvers reuse the same operator with fresh linear terms.
    """

    dim: int
    linear: np.ndarray
    dense: np.ndarray | None = None
    matvec: object = None
    _spectral: tuple | None = field(default=None, repr=False)

    @classmethod
    def from_dense(cls, a, b):
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if a.shape[0] != a.shape[1] or a.shape[0] != b.shape[0]:
            raise DimensionError(f"inconsistent QP shapes {a.shape} vs {b.shape}")
        return cls(dim=b.shape[0], linear=b, dense=a)

    @classmethod
    def from_shifted_affinity(cls, alpha, scale, affinity, b):
        """Operator z -> alpha*z - scale*(affinity @ z), applied matrix-free."""
        b = np.asarray(b, dtype=np.float64)

        def matvec(z):
            return alpha * z - scale * (affinity @ z)

        return cls(dim=b.shape[0], linear=b, matvec=matvec)

    def apply(self, z):
        if self.dense is not None:
            return self.dense @ z
        return self.matvec(z)

    def spectral(self):
        """Cached (norm estimate, smallest-eigenvalue estimate)."""
        if self._spectral is None:
            self._spectral = spectral_bounds(self.apply, self.dim)
        return self._spectral

    def is_indefinite(self):
        norm, lam_min = self.spectral()
        return lam_min < -INDEFINITE_TOL * max(1.0, norm)


def _power_iteration(apply_op, dim, iters=200, rtol=1e-12):
    """Largest-magnitude eigenvalue of a symmetric operator."""
    # deterministic start with energy in every coordinate
    v = 1.0 + 0.001 * np.cos(np.arange(dim))
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        av = apply_op(v)
        norm_av = np.linalg.norm(av)
        if norm_av <= NORM_FLOOR:
            return 0.0
        new_est = float(v @ av)
        v = av / norm_av
        if abs(new_est - est) <= rtol * max(1.0, abs(new_est)):
            est = new_est
            break
        est = new_est
    return abs(est)


def spectral_bounds(apply_op, dim):
    """(spectral norm, smallest eigenvalue) of a symmetric operator.

    The norm carries a tiny safety factor so the projected-gradient step
    1/(2*norm) never exceeds the true 1/L and descent stays monotone. The
    smallest eigenvalue comes from power iteration on norm*I - A.
    """
    norm = _power_iteration(apply_op, dim) * (1.0 + 1e-6)
    if norm <= NORM_FLOOR:
        return NORM_FLOOR, 0.0
    shifted = _power_iteration(lambda z: norm * z - apply_op(z), dim)
    return norm, norm - shifted


@dataclass
class SolverReport:
    solution: np.ndarray
    iterations: int
    final_gradient_residual: float
    converged: bool
    indefinite: bool
    objective_trace: np.ndarray = field(repr=False, default=None)

    @property
    def objective(self):
        return float(self.objective_trace[-1])


def solve_simplex_qp(problem, start, tol=DEFAULT_TOL, max_iters=DEFAULT_MAX_ITERS):
    """Projected-gradient solve of one simplex QP from a feasible start.

    Iterates z <- project_simplex(z - eta * (2Az + b)) with the fixed step
    eta = 1 / (2 * spectral-norm estimate, floored at 1e-12) and stops when
    the infinity-norm movement drops to `tol` or `max_iters` is reached.
    The final iterate is returned either way; `converged` says which.

    For PSD operators the objective is non-increasing along the whole
    iteration. Indefinite operators (possible under large coupling weights)
    still descend to a stationary point and are flagged in the report.
    """
    if tol <= 0:
        raise DimensionError(f"tol must be positive, got {tol}")
    start_values = start.values if hasattr(start, "values") else np.asarray(start)
    z = project_simplex(start_values)
    b = problem.linear
    norm, _ = problem.spectral()
    eta = 1.0 / (2.0 * max(norm, NORM_FLOOR))

    trace = []
    converged = False
    iterations = 0
    az = problem.apply(z)
    for it in range(1, max_iters + 1):
        obj = float(z @ az + z @ b)
        if not np.isfinite(obj):
            raise NumericalError(
                f"simplex QP objective became non-finite at iteration {it}",
                iteration=it,
                state=z,
            )
        trace.append(obj)
        z_new = project_simplex(z - eta * (2.0 * az + b))
        step = float(np.abs(z_new - z).max())
        z = z_new
        az = problem.apply(z)
        iterations = it
        if step <= tol:
            converged = True
            break
    trace.append(float(z @ az + z @ b))

    residual = float(np.abs(project_simplex(z - eta * (2.0 * az + b)) - z).max())
    return SolverReport(
        solution=z,
        iterations=iterations,
        final_gradient_residual=residual,
        converged=converged,
        indefinite=problem.is_indefinite(),
        objective_trace=np.asarray(trace),
    )
