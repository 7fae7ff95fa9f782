"""End-to-end experiment runner and report writer.

Wires data loading, graph construction, initial scores, re-ranking, and
repeated k-means evaluation over the hyperparameter grid, then writes
results.csv / summary.csv / curves.csv plus the best cell's score vectors.

Grid cells are independent: each derives its k-means seeds from the base
seed and its own indices, so results are reproducible byte-for-byte no
matter how many workers run them.
"""

import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, replace

import numpy as np

from . import graphs, rerank
from .datasets import load_labels, load_matrix
from .errors import ConfigError, ExperimentError
from .evaluation import MetricsRecord, acc, kmeans, nmi, purity
from .init_scores import (
    HIGHER_IS_BETTER,
    LOWER_IS_BETTER,
    ScoreVector,
    initial_sample_scores,
    laplacian_score,
    load_external_scores,
    normalize_scores_to_simplex,
)

__all__ = [
    "ExperimentConfig",
    "ReportRow",
    "SummaryRow",
    "ExperimentReport",
    "run_experiment",
    "emit_report",
    "evaluate_subset",
    "RESULTS_HEADER",
]

DEFAULT_LAMBDA_GRID = (1.0, 10.0, 100.0, 1000.0, 10000.0, 100000.0)
DEFAULT_FEATURE_COUNTS = tuple(range(10, 101, 10))
METHODS = ("baseline", "smrr", "fmrr", "sfmrr", "dmrr")

RESULTS_HEADER = (
    "method,lambda1,lambda2,m,acc_mean,acc_std,nmi_mean,nmi_std,"
    "purity_mean,purity_std,outer_iters,converged"
)
SUMMARY_HEADER = "method,lambda1,lambda2,acc_mean,nmi_mean,purity_mean,best"
CURVES_HEADER = "m,metric,value"


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment needs; defaults follow the standard setup
    (k=5, gamma=8, lambda grids of powers of ten, m = 10,20,...,100,
    20 k-means runs)."""

    data_path: str
    out_dir: str
    label_path: str | None = None
    label_column: int | None = None
    scores_path: str | None = None
    orientation: str = LOWER_IS_BETTER
    method: str = "dmrr"
    k: int = 5
    gamma: float = 8.0
    lambda1_grid: tuple = DEFAULT_LAMBDA_GRID
    lambda2_grid: tuple = DEFAULT_LAMBDA_GRID
    feature_counts: tuple = DEFAULT_FEATURE_COUNTS
    kmeans_runs: int = 20
    base_seed: int = 0
    jobs: int | None = None
    delimiter: str = ","
    has_header: bool = False

    def validate(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; pick one of {METHODS}")
        if self.label_path is None and self.label_column is None:
            raise ConfigError("evaluation needs labels: set label_path or label_column")
        if not self.lambda1_grid or not self.lambda2_grid:
            raise ConfigError("lambda grids must be non-empty")
        if not self.feature_counts:
            raise ConfigError("feature_counts must be non-empty")
        if any(m < 1 for m in self.feature_counts):
            raise ConfigError("feature counts must be >= 1")
        if self.kmeans_runs < 1:
            raise ConfigError("kmeans_runs must be >= 1")
        if self.orientation not in (HIGHER_IS_BETTER, LOWER_IS_BETTER):
            raise ConfigError(f"unknown orientation {self.orientation!r}")
        return self


@dataclass(frozen=True)
class ReportRow:
    method: str
    lambda1: float | None
    lambda2: float | None
    m: int
    acc_mean: float
    acc_std: float
    nmi_mean: float
    nmi_std: float
    purity_mean: float
    purity_std: float
    outer_iters: int
    converged: bool


@dataclass(frozen=True)
class SummaryRow:
    method: str
    lambda1: float | None
    lambda2: float | None
    acc_mean: float
    nmi_mean: float
    purity_mean: float
    best: bool = False


@dataclass(frozen=True)
class ExperimentReport:
    rows: list
    summaries: list
    best: SummaryRow
    best_feature_order: np.ndarray
    best_scores: np.ndarray
    best_sample_scores: np.ndarray | None
    config: ExperimentConfig = field(repr=False, default=None)

    def best_rows(self):
        return [
            r
            for r in self.rows
            if (r.lambda1, r.lambda2) == (self.best.lambda1, self.best.lambda2)
        ]


def _cell_seed(base_seed, i, j, m):
    """Deterministic, platform-independent seed for one (cell, m) evaluation."""
    ss = np.random.SeedSequence([int(base_seed), i + 1, j + 1, int(m)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def evaluate_subset(values, labels, c, runs, base_seed):
    """Repeated k-means on the selected columns; run r uses seed base_seed + r."""
    triples = []
    for r in range(runs):
        run = kmeans(values, c, seed=base_seed + r)
        triples.append((acc(run, labels), nmi(run, labels), purity(run, labels)))
    return MetricsRecord.from_runs(triples)


# ---------------------------------------------------------------------------
# per-cell work, shaped so it can run in a worker process
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _CellContext:
    """Immutable state shared by every grid cell of one experiment."""

    x: np.ndarray
    label_ids: np.ndarray
    c: int
    method: str
    u0: np.ndarray
    v0: np.ndarray
    feature_counts: tuple
    kmeans_runs: int
    base_seed: int
    sample_graph: object = None
    feature_graph: object = None
    bipartite: object = None
    laplacian: object = None


_WORKER_CONTEXT = None


def _init_worker(context):
    global _WORKER_CONTEXT
    _WORKER_CONTEXT = context


def _run_cell(args, context=None):
    """Re-rank for one grid cell, then evaluate every feature count."""
    ctx = context if context is not None else _WORKER_CONTEXT
    i, j, lam1, lam2 = args
    u0 = ScoreVector(values=ctx.u0, side="sample")
    v0 = ScoreVector(values=ctx.v0, side="feature")
    sample_scores = None
    outer_iters, converged = 0, True
    try:
        if ctx.method == "baseline":
            order = rerank.select_top_features(v0, len(ctx.v0)).feature_order
            scores = ctx.v0
        elif ctx.method == "smrr":
            u, report = rerank.smrr(ctx.sample_graph, u0, lam1, with_report=True)
            sample_scores = u.values
            outer_iters, converged = report.iterations, report.converged
            # sample-side ablation: the feature ranking stays the prior's
            order = rerank.select_top_features(v0, len(ctx.v0)).feature_order
            scores = ctx.v0
        elif ctx.method == "fmrr":
            v, report = rerank.fmrr(ctx.feature_graph, v0, lam1, with_report=True)
            outer_iters, converged = report.iterations, report.converged
            order = rerank.select_top_features(v, len(ctx.v0)).feature_order
            scores = v.values
        elif ctx.method == "sfmrr":
            u, v, trace = rerank.sfmrr(
                ctx.bipartite, u0, v0, lam1, with_trace=True
            )
            sample_scores = u.values
            outer_iters, converged = trace.iterations, trace.converged
            order = rerank.select_top_features(v, len(ctx.v0)).feature_order
            scores = v.values
        else:  # dmrr
            params = rerank.RerankParams(lambda1=lam1, lambda2=lam2)
            selection, trace = rerank.dmrr(ctx.laplacian, u0, v0, params)
            sample_scores = selection.sample_scores.values
            outer_iters, converged = trace.iterations, trace.converged
            order = selection.feature_order
            scores = selection.scores.values
    except Exception as err:
        raise ExperimentError(
            f"stage 'rerank' failed at cell (method={ctx.method},"
            f" lambda1={lam1}, lambda2={lam2}): {err}"
        ) from err

    metrics = []
    for m in ctx.feature_counts:
        try:
            record = evaluate_subset(
                ctx.x[:, order[:m]],
                ctx.label_ids,
                ctx.c,
                ctx.kmeans_runs,
                _cell_seed(ctx.base_seed, i, j, m),
            )
        except Exception as err:
            raise ExperimentError(
                f"stage 'evaluate' failed at cell (method={ctx.method},"
                f" lambda1={lam1}, lambda2={lam2}, m={m}): {err}"
            ) from err
        metrics.append((m, record))
    return {
        "cell": (i, j, lam1, lam2),
        "metrics": metrics,
        "order": order,
        "scores": scores,
        "sample_scores": sample_scores,
        "outer_iters": outer_iters,
        "converged": converged,
    }


def _grid_cells(config):
    """(i, j, lambda1, lambda2) tuples for the method's parameter grid.

    Methods that do not consume a parameter get None there: baseline has a
    single pseudo-cell, smrr/fmrr/sfmrr sweep lambda1 only, dmrr sweeps the
    full product grid.
    """
    if config.method == "baseline":
        return [(0, 0, None, None)]
    if config.method in ("smrr", "fmrr", "sfmrr"):
        return [(i, 0, lam1, None) for i, lam1 in enumerate(config.lambda1_grid)]
    return [
        (i, j, lam1, lam2)
        for i, lam1 in enumerate(config.lambda1_grid)
        for j, lam2 in enumerate(config.lambda2_grid)
    ]


def _load_stage(config):
    try:
        matrix, labels = load_matrix(
            config.data_path,
            delimiter=config.delimiter,
            has_header=config.has_header,
            label_column=config.label_column,
        )
        if labels is None:
            labels = load_labels(config.label_path).validate_against(matrix)
    except Exception as err:
        raise ExperimentError(f"stage 'load' failed: {err}") from err
    return matrix, labels


def _prepare_context(config, matrix, labels):
    method = config.method
    params = graphs.GraphParams(k=config.k, gamma=config.gamma)
    need_sample = method in ("smrr", "dmrr") or config.scores_path is None
    need_feature = method in ("fmrr", "dmrr")
    need_bipartite = method in ("sfmrr", "dmrr")

    try:
        sample_graph = (
            graphs.knn_gaussian_graph(matrix, "sample", params) if need_sample else None
        )
        feature_graph = (
            graphs.knn_gaussian_graph(matrix, "feature", params)
            if need_feature
            else None
        )
        bipartite = (
            graphs.bipartite_graph(matrix, config.gamma) if need_bipartite else None
        )
        laplacian = (
            graphs.dual_laplacian(sample_graph, feature_graph, bipartite, 0.0)
            if method == "dmrr"
            else None
        )
    except Exception as err:
        raise ExperimentError(f"stage 'graphs' failed: {err}") from err

    try:
        if config.scores_path is not None:
            raw = load_external_scores(
                config.scores_path, config.orientation, expected_length=matrix.d
            )
        else:
            raw = laplacian_score(matrix, sample_graph)
        v0 = normalize_scores_to_simplex(raw)
        u0 = initial_sample_scores(matrix)
    except Exception as err:
        raise ExperimentError(f"stage 'initial scores' failed: {err}") from err

    return _CellContext(
        x=matrix.values,
        label_ids=labels.ids,
        c=labels.c,
        method=method,
        u0=u0.values,
        v0=v0.values,
        feature_counts=tuple(config.feature_counts),
        kmeans_runs=config.kmeans_runs,
        base_seed=config.base_seed,
        sample_graph=sample_graph,
        feature_graph=feature_graph,
        bipartite=bipartite,
        laplacian=laplacian,
    )


def run_experiment(config):
    """Run the configured method over its grid and write the report files."""
    config.validate()
    os.makedirs(config.out_dir, exist_ok=True)
    probe = os.path.join(config.out_dir, ".write_probe")
    try:
        with open(probe, "w"):
            pass
        os.remove(probe)
    except OSError as err:
        raise ExperimentError(f"out_dir {config.out_dir!r} is not writable: {err}")

    matrix, labels = _load_stage(config)
    if any(m > matrix.d for m in config.feature_counts):
        raise ConfigError(
            f"feature_counts {config.feature_counts} exceed the data's"
            f" {matrix.d} features"
        )
    context = _prepare_context(config, matrix, labels)
    cells = _grid_cells(config)

    jobs = config.jobs or os.cpu_count() or 1
    results = {}
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(
            max_workers=min(jobs, len(cells)),
            initializer=_init_worker,
            initargs=(context,),
        ) as pool:
            futures = {pool.submit(_run_cell, cell): cell for cell in cells}
            for fut in as_completed(futures):
                out = fut.result()
                results[out["cell"][:2]] = out
                _progress(config.method, out)
    else:
        for cell in cells:
            out = _run_cell(cell, context)
            results[out["cell"][:2]] = out
            _progress(config.method, out)

    rows, summaries = [], []
    best_idx, best_acc = 0, -1.0
    for cell in cells:
        out = results[cell[:2]]
        _, _, lam1, lam2 = cell
        per_m = out["metrics"]
        for m, rec in per_m:
            rows.append(
                ReportRow(
                    method=config.method,
                    lambda1=lam1,
                    lambda2=lam2,
                    m=m,
                    acc_mean=rec.acc_mean,
                    acc_std=rec.acc_std,
                    nmi_mean=rec.nmi_mean,
                    nmi_std=rec.nmi_std,
                    purity_mean=rec.purity_mean,
                    purity_std=rec.purity_std,
                    outer_iters=out["outer_iters"],
                    converged=out["converged"],
                )
            )
        cell_acc = float(np.mean([rec.acc_mean for _, rec in per_m]))
        summaries.append(
            SummaryRow(
                method=config.method,
                lambda1=lam1,
                lambda2=lam2,
                acc_mean=cell_acc,
                nmi_mean=float(np.mean([rec.nmi_mean for _, rec in per_m])),
                purity_mean=float(np.mean([rec.purity_mean for _, rec in per_m])),
            )
        )
        if cell_acc > best_acc:
            best_acc, best_idx = cell_acc, len(summaries) - 1

    summaries[best_idx] = replace(summaries[best_idx], best=True)
    best_cell = cells[best_idx]
    best_out = results[best_cell[:2]]
    report = ExperimentReport(
        rows=rows,
        summaries=summaries,
        best=summaries[best_idx],
        best_feature_order=np.asarray(best_out["order"]),
        best_scores=np.asarray(best_out["scores"]),
        best_sample_scores=(
            None
            if best_out["sample_scores"] is None
            else np.asarray(best_out["sample_scores"])
        ),
        config=config,
    )
    emit_report(report, config.out_dir)
    return report


def _progress(method, out):
    _, _, lam1, lam2 = out["cell"]
    print(
        f"[{method}] cell lambda1={_fmt(lam1)} lambda2={_fmt(lam2)} done"
        f" (iters={out['outer_iters']}, converged={out['converged']})",
        file=sys.stderr,
        flush=True,
    )


def _fmt(x):
    if x is None:
        return "-"
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".10g")


def emit_report(report, out_dir):
    """Write results.csv, summary.csv, curves.csv, and the best cell's vectors."""
    try:
        os.makedirs(out_dir, exist_ok=True)
        _write_results(report, os.path.join(out_dir, "results.csv"))
        _write_summary(report, os.path.join(out_dir, "summary.csv"))
        _write_curves(report, os.path.join(out_dir, "curves.csv"))
        rerank.export_vector(
            report.best_feature_order, os.path.join(out_dir, "feature_order.txt")
        )
        rerank.export_vector(report.best_scores, os.path.join(out_dir, "v.txt"))
        if report.best_sample_scores is not None:
            rerank.export_vector(
                report.best_sample_scores, os.path.join(out_dir, "u.txt")
            )
    except OSError as err:
        raise ExperimentError(
            f"could not write report files to {out_dir!r}: {err}"
        ) from err


def _write_results(report, path):
    with open(path, "w", newline="") as fh:
        fh.write(RESULTS_HEADER + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        for r in report.rows:
            writer.writerow(
                [
                    r.method,
                    _fmt(r.lambda1),
                    _fmt(r.lambda2),
                    r.m,
                    _fmt(r.acc_mean),
                    _fmt(r.acc_std),
                    _fmt(r.nmi_mean),
                    _fmt(r.nmi_std),
                    _fmt(r.purity_mean),
                    _fmt(r.purity_std),
                    r.outer_iters,
                    _fmt(r.converged),
                ]
            )


def _write_summary(report, path):
    with open(path, "w", newline="") as fh:
        fh.write(SUMMARY_HEADER + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        for s in report.summaries:
            writer.writerow(
                [
                    s.method,
                    _fmt(s.lambda1),
                    _fmt(s.lambda2),
                    _fmt(s.acc_mean),
                    _fmt(s.nmi_mean),
                    _fmt(s.purity_mean),
                    int(s.best),
                ]
            )


def _write_curves(report, path):
    best_rows = report.best_rows()
    with open(path, "w", newline="") as fh:
        fh.write(CURVES_HEADER + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        for metric in ("acc", "nmi", "purity"):
            for r in sorted(best_rows, key=lambda r: r.m):
                writer.writerow([r.m, metric, _fmt(getattr(r, f"{metric}_mean"))])
