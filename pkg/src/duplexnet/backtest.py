"""Walk-forward sweep: fit per training step and lag, score, evaluate.

At every training step the full and restricted models are refit on the most
recent source windows, with labels drawn strictly from data available at
the step (no window beyond the prediction time enters training). Lag h is
counted in window steps: one step equals one trading week under the default
5-day window displacement.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .correlate import TauVariant, correlation_matrix, to_distance
from .errors import (
    DegenerateGraph,
    InsufficientHistory,
    NumericFailure,
    UndefinedAUC,
)
from .evaluate import ScoredPairs, Split, auc, auc_star, split
from .model import (
    FitResult,
    build_training_set,
    edge_label_vector,
    fit,
    full_spec,
    likelihood_ratio,
    predict_matrix,
    restricted_spec,
)
from .multiplex import DuplexSnapshot, feature_matrix
from .netbuild import EdgeBudget, Layer, LayerGraph, filter_graph
from .panel import PanelSeries, WindowPolicy, WindowSpec, align, windows

logger = logging.getLogger(__name__)

SPLIT_ORDER = (Split.FULL_GRAPH, Split.NEW_EDGES, Split.DELETIONS)

REPORT_COLUMNS = (
    "lag", "split", "window_end", "auc", "auc_benchmark",
    "auc_star", "lambda", "n_pos", "n_neg",
)


@dataclass(frozen=True)
class BacktestConfig:
    """Sweep layout: what to predict, over which spans, at which lags.

    ``train_end`` / ``test_end`` bound the sweep by window end date; they
    are not needed when sweeping a prebuilt snapshot sequence by index.
    """

    train_end: str | None = None
    test_end: str | None = None
    train_start: str | None = None
    target_layer: Layer = Layer.FINANCIAL
    lags: tuple[int, ...] = tuple(range(1, 21))
    train_policy: WindowPolicy = WindowPolicy.ROLLING
    window: WindowSpec = field(default_factory=lambda: WindowSpec(126, 5))
    edge_budget: EdgeBudget = field(default_factory=EdgeBudget)
    train_windows: int = 25
    tau: TauVariant = TauVariant.B

    def __post_init__(self):
        lags = tuple(sorted(set(int(h) for h in self.lags)))
        object.__setattr__(self, "lags", lags)
        if not lags or lags[0] < 1:
            raise ValueError("lags must be positive integers")
        if self.train_end is not None:
            if self.test_end is not None and not (self.train_end < self.test_end):
                raise ValueError("train_end must precede test_end")
            if self.train_start is not None and not (
                self.train_start < self.train_end
            ):
                raise ValueError("train_start must precede train_end")
        if self.train_windows < 1:
            raise ValueError("need at least one training window")
        if self.target_layer is Layer.AGGREGATED:
            raise ValueError("target layer must be financial or social")


def layer_swap(config: BacktestConfig) -> BacktestConfig:
    """Toggle the prediction target; feature roles swap symmetrically."""
    other = (
        Layer.SOCIAL if config.target_layer is Layer.FINANCIAL else Layer.FINANCIAL
    )
    return replace(config, target_layer=other)


@dataclass(frozen=True)
class ReportRow:
    lag: int
    split: Split
    window_end: str  # end date of the training-step window (prediction origin)
    auc: float
    auc_benchmark: float
    auc_star: float
    lam: float
    significant: bool
    n_pos: int
    n_neg: int
    failed: bool


@dataclass(frozen=True)
class LagAggregate:
    lag: int
    split: Split
    mean_auc: float
    se_auc: float
    mean_auc_star: float
    se_auc_star: float
    mean_lambda: float
    se_lambda: float
    frac_significant: float
    n_cells: int
    n_failed: int


@dataclass(frozen=True)
class ChurnTable:
    """Edge-churn statistics for one layer's graph sequence."""

    layer: Layer
    per_lag: tuple[tuple[int, float, float, int], ...]  # (h, mean, se, n)
    jaccard: np.ndarray  # cross-similarity over all window pairs


@dataclass(frozen=True)
class BacktestReport:
    rows: tuple[ReportRow, ...]
    aggregates: tuple[LagAggregate, ...]
    churn: tuple[ChurnTable, ...]
    window_end_dates: tuple[str, ...]
    target_layer: Layer

    def write(self, out_dir) -> None:
        """Emit report.csv, report.json, churn.csv and jaccard.csv.

        Every float is written with round-trip repr, so identical reports
        are byte-identical files.
        """
        from pathlib import Path

        from .ioutil import atomic_write_text

        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        lines = [",".join(REPORT_COLUMNS)]
        for r in self.rows:
            lines.append(
                f"{r.lag},{r.split.value},{r.window_end},{_fmt(r.auc)},"
                f"{_fmt(r.auc_benchmark)},{_fmt(r.auc_star)},{_fmt(r.lam)},"
                f"{r.n_pos},{r.n_neg}"
            )
        atomic_write_text(out_dir / "report.csv", "\n".join(lines) + "\n")

        payload = {
            "version": __version__,
            "target_layer": self.target_layer.value,
            "aggregates": [
                {
                    "lag": a.lag,
                    "split": a.split.value,
                    "mean_auc": _jsonable(a.mean_auc),
                    "se_auc": _jsonable(a.se_auc),
                    "mean_auc_star": _jsonable(a.mean_auc_star),
                    "se_auc_star": _jsonable(a.se_auc_star),
                    "mean_lambda": _jsonable(a.mean_lambda),
                    "se_lambda": _jsonable(a.se_lambda),
                    "frac_significant": _jsonable(a.frac_significant),
                    "n_cells": a.n_cells,
                    "n_failed": a.n_failed,
                }
                for a in self.aggregates
            ],
        }
        atomic_write_text(
            out_dir / "report.json", json.dumps(payload, indent=2) + "\n"
        )

        churn_lines = ["layer,h,mean_new_edge_fraction,se,n"]
        for table in self.churn:
            for h, mean, se, n in table.per_lag:
                churn_lines.append(
                    f"{table.layer.value},{h},{_fmt(mean)},{_fmt(se)},{n}"
                )
        atomic_write_text(out_dir / "churn.csv", "\n".join(churn_lines) + "\n")

        target_table = next(
            (t for t in self.churn if t.layer is self.target_layer), None
        )
        if target_table is not None:
            jl = ["window_end," + ",".join(self.window_end_dates)]
            for i, date in enumerate(self.window_end_dates):
                jl.append(
                    date + "," + ",".join(_fmt(v) for v in target_table.jaccard[i])
                )
            atomic_write_text(out_dir / "jaccard.csv", "\n".join(jl) + "\n")


def _fmt(x: float) -> str:
    return repr(float(x))


def _jsonable(x: float):
    return None if math.isnan(x) else x


def build_snapshots(
    returns_panel: PanelSeries,
    opinion_panel: PanelSeries,
    window_spec: WindowSpec,
    budget: EdgeBudget,
    tau: TauVariant = TauVariant.B,
    threads: int = 1,
) -> tuple[list[DuplexSnapshot], list[tuple[int, int]], list[str]]:
    """Correlate, transform and filter both panels over every window.

    Returns the snapshots, the window index pairs, and each window's end
    date. Panels must already be aligned.
    """
    if returns_panel.dates != opinion_panel.dates:
        raise ValueError("panels must be aligned before building snapshots")
    spans = windows(window_spec, returns_panel.n_days)

    def build_one(span: tuple[int, int]) -> DuplexSnapshot:
        fin = filter_graph(
            to_distance(correlation_matrix(returns_panel, span, tau)),
            budget,
            Layer.FINANCIAL,
        )
        soc = filter_graph(
            to_distance(correlation_matrix(opinion_panel, span, tau)),
            budget,
            Layer.SOCIAL,
        )
        return DuplexSnapshot(financial=fin, social=soc)

    snapshots = _ordered_map(build_one, spans, threads)
    end_dates = [returns_panel.dates[end - 1] for _, end in spans]
    return snapshots, spans, end_dates


def _ordered_map(fn: Callable, items: Sequence, threads: int) -> list:
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def training_span(
    config: BacktestConfig, t_first: int, t: int, lag: int
) -> range:
    """Source-window indices for the fit at training end ``t`` and lag.

    Every label window t' + lag stays at or before t, so training never
    touches data beyond the prediction time.
    """
    last_source = t - lag
    if config.train_policy is WindowPolicy.ROLLING:
        first_source = last_source - config.train_windows + 1
    else:
        first_source = t_first - lag - config.train_windows + 1
    return range(first_source, last_source + 1)


@dataclass(frozen=True)
class CellOutcome:
    """Everything one (training step, lag) cell produces."""

    t: int
    lag: int
    source_windows: tuple[int, ...]
    fit_full: FitResult | None
    fit_restricted: FitResult | None
    lam: float
    significant: bool
    failed: bool
    scores: np.ndarray | None


def _run_cell(
    config: BacktestConfig,
    snapshots: Sequence[DuplexSnapshot],
    features: Sequence[np.ndarray],
    t_first: int,
    t: int,
    lag: int,
) -> CellOutcome:
    span = tuple(training_span(config, t_first, t, lag))
    for source in span:
        if source + lag > t:
            raise RuntimeError(
                f"leakage: source window {source} at lag {lag} "
                f"labels beyond training end {t}"
            )
    data = build_training_set(
        snapshots, config.target_layer, lag, span, feature_matrices=features
    )
    try:
        restricted = fit(restricted_spec(lag, config.target_layer), data)
        full = fit(full_spec(lag), data)
    except NumericFailure as exc:
        logger.warning("cell t=%d h=%d failed: %s", t, lag, exc)
        return CellOutcome(t, lag, span, None, None, math.nan, False, True, None)
    if not (restricted.converged and full.converged):
        logger.warning("cell t=%d h=%d did not converge", t, lag)
        return CellOutcome(
            t, lag, span, full, restricted, math.nan, False, True, None
        )
    lam, significant = likelihood_ratio(full, restricted)
    scores = predict_matrix(full, features[t])
    return CellOutcome(
        t, lag, span, full, restricted, lam, significant, False, scores
    )


def _evaluate_cell(
    outcome: CellOutcome,
    pairs: np.ndarray,
    labels_future: np.ndarray,
    benchmark: np.ndarray,
    g_now: LayerGraph,
    window_end: str,
) -> list[ReportRow]:
    rows = []
    if outcome.failed:
        for sp in SPLIT_ORDER:
            rows.append(
                ReportRow(
                    outcome.lag, sp, window_end, math.nan, math.nan, math.nan,
                    math.nan, False, 0, 0, True,
                )
            )
        return rows

    model_views = split(
        ScoredPairs(pairs, outcome.scores, labels_future), g_now
    )
    bench_views = split(ScoredPairs(pairs, benchmark, labels_future), g_now)
    for sp in SPLIT_ORDER:
        mv = model_views[sp]
        bv = bench_views[sp]
        auc_model = _safe_auc(mv)
        auc_bench = _safe_auc(bv)
        star = math.nan
        if not math.isnan(auc_model) and not math.isnan(auc_bench) and auc_bench > 0.5:
            star = auc_star(auc_model, auc_bench)
        rows.append(
            ReportRow(
                outcome.lag, sp, window_end, auc_model, auc_bench, star,
                outcome.lam, outcome.significant, mv.n_pos, mv.n_neg, False,
            )
        )
    return rows


def _safe_auc(view: ScoredPairs) -> float:
    try:
        return auc(view)
    except UndefinedAUC:
        return math.nan


def run(
    config: BacktestConfig,
    panels: tuple[PanelSeries, PanelSeries],
    threads: int = 1,
    model_sink: Callable[[CellOutcome, str, str], None] | None = None,
) -> BacktestReport:
    """Full sweep over training steps and lags; deterministic output.

    ``panels`` is the (returns, opinion) pair; they are aligned here.
    ``model_sink`` receives every non-failed cell outcome plus the window
    date the cell predicts from and its training-span start date, for
    optional fit dumps. Failed fits mark their cells and the sweep carries
    on.
    """
    if config.train_end is None:
        raise ValueError("date-based sweeps need train_end in the config")
    returns_panel, opinion_panel = panels
    returns_panel, opinion_panel = align(returns_panel, opinion_panel)
    snapshots, _, end_dates = build_snapshots(
        returns_panel, opinion_panel, config.window, config.edge_budget,
        config.tau, threads,
    )
    candidates = [t for t, d in enumerate(end_dates) if d <= config.train_end]
    if not candidates:
        raise InsufficientHistory(
            f"no window ends on or before train_end {config.train_end}"
        )
    t_first = max(candidates)

    def cell_valid(t: int, h: int) -> bool:
        return config.test_end is None or end_dates[t + h] <= config.test_end

    return run_snapshots(
        config, snapshots, t_first,
        end_dates=end_dates, cell_filter=cell_valid,
        threads=threads, model_sink=model_sink,
    )


def run_snapshots(
    config: BacktestConfig,
    snapshots: Sequence[DuplexSnapshot],
    t_first: int,
    end_dates: Sequence[str] | None = None,
    cell_filter: Callable[[int, int], bool] | None = None,
    threads: int = 1,
    model_sink: Callable[[CellOutcome, str, str], None] | None = None,
) -> BacktestReport:
    """Sweep a prebuilt snapshot sequence, training ends from ``t_first``.

    ``end_dates`` labels the report rows; zero-padded window indices are
    used when the sequence has no calendar. ``cell_filter`` can veto
    individual (training step, lag) cells, e.g. to cap the test span.
    """
    n_windows = len(snapshots)
    if end_dates is None:
        width = len(str(max(n_windows - 1, 1)))
        end_dates = [f"w{t:0{width}d}" for t in range(n_windows)]
    features = _ordered_map(feature_matrix, snapshots, threads)
    n = snapshots[0].n
    pairs = np.column_stack(np.triu_indices(n, 1))
    labels = [edge_label_vector(s, config.target_layer) for s in snapshots]

    max_lag = max(config.lags)
    if t_first - max_lag - config.train_windows + 1 < 0:
        raise InsufficientHistory(
            f"first training step at window {t_first} needs "
            f"{config.train_windows} source windows at lag {max_lag}"
        )

    cells: list[tuple[int, int]] = []
    for t in range(t_first, n_windows):
        valid = [
            h for h in config.lags
            if t + h < n_windows and (cell_filter is None or cell_filter(t, h))
        ]
        if not valid:
            break
        cells.extend((t, h) for h in valid)

    outcomes = _ordered_map(
        lambda cell: _run_cell(config, snapshots, features, t_first, *cell),
        cells,
        threads,
    )

    rows: list[ReportRow] = []
    for outcome in outcomes:
        t = outcome.t
        g_now = snapshots[t].layer_graph(config.target_layer)
        rows.extend(
            _evaluate_cell(
                outcome, pairs, labels[t + outcome.lag], labels[t],
                g_now, end_dates[t],
            )
        )
        if model_sink is not None and not outcome.failed:
            model_sink(outcome, end_dates[t], end_dates[outcome.source_windows[0]])

    churn_tables = tuple(
        churn_diagnostics(
            [s.layer_graph(layer) for s in snapshots], min(max_lag, n_windows - 1)
        )
        for layer in (Layer.FINANCIAL, Layer.SOCIAL)
    )
    return BacktestReport(
        rows=tuple(rows),
        aggregates=tuple(aggregate_rows(rows)),
        churn=churn_tables,
        window_end_dates=tuple(end_dates),
        target_layer=config.target_layer,
    )


def aggregate_rows(rows: Sequence[ReportRow]) -> list[LagAggregate]:
    """Per (lag, split) means and standard errors over the test sweep."""
    keys = sorted({(r.lag, r.split) for r in rows}, key=lambda k: (k[0], _split_rank(k[1])))
    out = []
    for lag, sp in keys:
        group = [r for r in rows if r.lag == lag and r.split == sp]
        aucs = [r.auc for r in group if not math.isnan(r.auc)]
        stars = [r.auc_star for r in group if not math.isnan(r.auc_star)]
        lams = [r.lam for r in group if not math.isnan(r.lam)]
        ok = [r for r in group if not r.failed]
        out.append(
            LagAggregate(
                lag=lag,
                split=sp,
                mean_auc=_mean(aucs),
                se_auc=_se(aucs),
                mean_auc_star=_mean(stars),
                se_auc_star=_se(stars),
                mean_lambda=_mean(lams),
                se_lambda=_se(lams),
                frac_significant=(
                    sum(r.significant for r in ok) / len(ok) if ok else math.nan
                ),
                n_cells=len(group),
                n_failed=sum(r.failed for r in group),
            )
        )
    return out


def _split_rank(sp: Split) -> int:
    return SPLIT_ORDER.index(sp)


def _mean(values: list[float]) -> float:
    return float(np.mean(values)) if values else math.nan


def _se(values: list[float]) -> float:
    if len(values) < 2:
        return math.nan
    return float(np.std(values, ddof=1) / math.sqrt(len(values)))


def churn_diagnostics(
    graphs: Sequence[LayerGraph], max_h: int
) -> ChurnTable:
    """New-edge fractions per lag plus the all-pairs Jaccard matrix.

    Edge sets become boolean pair vectors so intersections reduce to one
    exact integer matrix product.
    """
    m = len(graphs)
    if m < max_h + 1:
        raise InsufficientHistory(
            f"need at least {max_h + 1} graphs for lag {max_h}, have {m}"
        )
    n = graphs[0].n
    iu, ju = np.triu_indices(n, 1)
    presence = np.stack([g.adjacency[iu, ju] for g in graphs]).astype(np.int64)
    sizes = presence.sum(axis=1)
    if np.any(sizes == 0):
        raise DegenerateGraph("a graph in the sequence has no edges")
    inter = presence @ presence.T
    union = sizes[:, None] + sizes[None, :] - inter
    jaccard = inter / union

    per_lag = []
    for h in range(1, max_h + 1):
        now = np.arange(m - h)
        future = now + h
        fracs = (sizes[future] - inter[now, future]) / sizes[future]
        per_lag.append((h, _mean(list(fracs)), _se(list(fracs)), len(fracs)))
    return ChurnTable(
        layer=graphs[0].layer, per_lag=tuple(per_lag), jaccard=jaccard
    )
