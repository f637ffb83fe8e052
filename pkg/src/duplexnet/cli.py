"""Command-line entry point.

Subcommands: ``ingest`` (load and align panels), ``graphs`` (filtered
edgelists per window), ``features`` (pair-feature CSVs per window),
``backtest`` (the full sweep), ``churn`` (structure-change diagnostics
only), ``synth`` (seeded synthetic data).

Flags override values from a flat ``key = value`` config file; the fully
resolved configuration is echoed into every output directory so a run can
be reproduced byte-for-byte from its own provenance file.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import datetime
import json
import logging
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .correlate import TauVariant, correlation_matrix
from .errors import DataError, NumericFailure, ParseError, UsageError
from .ioutil import atomic_write_text, edgelist_text, matrix_csv
from .multiplex import feature_matrix
from .netbuild import EdgeBudget, Layer
from .panel import (
    PanelSeries,
    WindowPolicy,
    WindowSpec,
    align,
    load_opinion_panel,
    load_price_panel,
)
from .synth import (
    SynthMode,
    SynthSpec,
    closes_from_returns,
    generate_graph_dynamics,
    generate_timeseries,
    previous_trading_date,
)

logger = logging.getLogger(__name__)

COMMANDS = ("ingest", "graphs", "features", "backtest", "churn", "synth")

_DEFAULTS: dict[str, str | None] = {
    "prices": None,
    "opinions": None,
    "tickers": None,
    "out": None,
    "window": "126",
    "step": "5",
    "policy": "rolling",
    "tau": "b",
    "edge_budget": "quartile",
    "target": "financial",
    "lags": "1..20",
    "train_start": None,
    "train_end": None,
    "test_end": None,
    "train_windows": "25",
    "threads": str(os.cpu_count() or 1),
    "seed": "0",
    "mode": "timeseries",
    "n": "100",
    "windows": "250",
    "persistence": "0.9",
    "closure_strength": "0.0",
    "closure_base": "-2.0",
    "social_lead": "0",
    "social_noise": "0.1",
    "n_blocks": "10",
    "noise_scale": "0.8",
    "opinion_noise": "0.3",
    "dump_corr": None,
    "dump_graphs": None,
    "dump_features": None,
    "dump_models": None,
    "verbosity": "info",
}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run settings, serializable to a flat key=value file."""

    command: str
    prices: Path | None
    opinions: Path | None
    tickers: Path | None
    out: Path | None
    window: int
    step: int
    policy: WindowPolicy
    tau: TauVariant
    edge_budget: EdgeBudget
    target: Layer
    lags: tuple[int, ...]
    train_start: str | None
    train_end: str | None
    test_end: str | None
    train_windows: int
    threads: int
    seed: int
    mode: SynthMode
    n: int
    windows: int
    persistence: float
    closure_strength: float
    closure_base: float
    social_lead: int
    social_noise: float
    n_blocks: int
    noise_scale: float
    opinion_noise: float
    dump_corr: Path | None
    dump_graphs: Path | None
    dump_features: Path | None
    dump_models: Path | None
    verbosity: str

    def window_spec(self) -> WindowSpec:
        # Correlation windows always roll; the policy flag steers training.
        return WindowSpec(self.window, self.step, WindowPolicy.ROLLING)

    def to_lines(self) -> list[str]:
        """Flat key = value lines reproducing this configuration."""
        lines = [f"# duplexnet {__version__}"]
        for f in fields(self):
            if f.name == "command":
                continue
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, (WindowPolicy, TauVariant, Layer, SynthMode)):
                value = value.value
            elif isinstance(value, EdgeBudget):
                value = str(value)
            elif isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            lines.append(f"{f.name.replace('_', '-')} = {value}")
        return lines


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    shared = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    shared.add_argument("--config", help="flat key = value configuration file")
    shared.add_argument("--out", help="output directory")
    shared.add_argument("--threads", help="worker thread cap (results unaffected)")
    shared.add_argument("--quiet", action="store_true", help="errors only")
    shared.add_argument("--verbose", action="store_true", help="debug logging")

    data = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    data.add_argument("--prices", help="CSV of date,ticker,close")
    data.add_argument("--opinions", help="CSV of date,ticker,bullish_count")
    data.add_argument("--tickers", help="text file, one ticker per line")

    netw = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    netw.add_argument("--window", help="correlation window width, trading days")
    netw.add_argument("--step", help="window displacement, trading days")
    netw.add_argument("--tau", choices=["a", "b"], help="Kendall tie convention")
    netw.add_argument("--edge-budget", dest="edge_budget",
                      help="quartile or count:K edges to keep")
    netw.add_argument("--dump-corr", dest="dump_corr",
                      help="directory for per-window correlation CSVs")

    parser = _Parser(prog="duplexnet", description=__doc__,
                     argument_default=argparse.SUPPRESS,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version",
                        version=f"duplexnet {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add_command(name, parents, help_text):
        return sub.add_parser(
            name, parents=parents, help=help_text,
            argument_default=argparse.SUPPRESS,
        )

    add_command("ingest", [shared, data], "load, align and dump the two panels")
    add_command("graphs", [shared, data, netw],
                "write filtered edgelists per window")
    add_command("features", [shared, data, netw],
                "write pair-feature CSVs per window")

    bt = add_command("backtest", [shared, data, netw],
                     "walk-forward link-prediction sweep")
    bt.add_argument("--target", choices=["financial", "social"])
    bt.add_argument("--lags", help="e.g. 1..20 or 1,5,10,15,20")
    bt.add_argument("--policy", choices=["rolling", "expanding"],
                    help="training-span policy")
    bt.add_argument("--train-start", dest="train_start", help="ISO date")
    bt.add_argument("--train-end", dest="train_end", help="ISO date")
    bt.add_argument("--test-end", dest="test_end", help="ISO date")
    bt.add_argument("--train-windows", dest="train_windows",
                    help="source windows per training set")
    bt.add_argument("--dump-graphs", dest="dump_graphs")
    bt.add_argument("--dump-features", dest="dump_features")
    bt.add_argument("--dump-models", dest="dump_models")

    ch = add_command("churn", [shared, data, netw],
                     "edge-churn and cross-similarity diagnostics")
    ch.add_argument("--lags", help="max lag via e.g. 1..20")
    ch.add_argument("--target", choices=["financial", "social"],
                    help="layer for the cross-similarity matrix")

    sy = add_command("synth", [shared], "generate seeded synthetic data")
    sy.add_argument("--mode", choices=["graphs", "timeseries"])
    sy.add_argument("--n", help="asset count")
    sy.add_argument("--windows", help="number of windows / graph steps")
    sy.add_argument("--seed")
    sy.add_argument("--window", help="window width (timeseries mode)")
    sy.add_argument("--step", help="window step (timeseries mode)")
    sy.add_argument("--edge-budget", dest="edge_budget")
    sy.add_argument("--persistence")
    sy.add_argument("--closure-strength", dest="closure_strength")
    sy.add_argument("--closure-base", dest="closure_base")
    sy.add_argument("--social-lead", dest="social_lead")
    sy.add_argument("--social-noise", dest="social_noise")
    sy.add_argument("--n-blocks", dest="n_blocks")
    sy.add_argument("--noise-scale", dest="noise_scale")
    sy.add_argument("--opinion-noise", dest="opinion_noise")
    return parser


def _read_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"--config: cannot read {path}: {exc}")
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"--config {path}:{line_no}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in _DEFAULTS:
            raise UsageError(f"--config {path}:{line_no}: unknown key {key!r}")
        values[key] = value.strip()
    return values


def _parse_int(raw: str, flag: str, minimum: int | None = None) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise UsageError(f"--{flag}: expected an integer, got {raw!r}")
    if minimum is not None and value < minimum:
        raise UsageError(f"--{flag}: must be at least {minimum}, got {value}")
    return value


def _parse_float(raw: str, flag: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise UsageError(f"--{flag}: expected a number, got {raw!r}")


def _parse_date(raw: str | None, flag: str) -> str | None:
    if raw is None:
        return None
    try:
        return datetime.date.fromisoformat(raw).isoformat()
    except ValueError:
        raise UsageError(f"--{flag}: expected an ISO-8601 date, got {raw!r}")


def _parse_lags(raw: str) -> tuple[int, ...]:
    lags: list[int] = []
    for part in raw.split(","):
        part = part.strip()
        if ".." in part:
            lo, _, hi = part.partition("..")
            try:
                lags.extend(range(int(lo), int(hi) + 1))
            except ValueError:
                raise UsageError(f"--lags: bad range {part!r}")
        elif part:
            try:
                lags.append(int(part))
            except ValueError:
                raise UsageError(f"--lags: bad lag {part!r}")
    if not lags or min(lags) < 1:
        raise UsageError(f"--lags: need positive lags, got {raw!r}")
    return tuple(sorted(set(lags)))


def parse_and_validate(argv) -> RunConfig:
    """Resolve CLI flags over config-file values over defaults."""
    namespace = _build_parser().parse_args(argv)
    given = vars(namespace)
    command = given.pop("command", None)
    if command is None:
        raise UsageError("missing subcommand; see --help")

    quiet = given.pop("quiet", False)
    verbose = given.pop("verbose", False)

    raw = dict(_DEFAULTS)
    config_path = given.pop("config", None)
    if config_path is not None:
        raw.update(_read_config_file(config_path))
    raw.update(given)
    if quiet:
        raw["verbosity"] = "quiet"
    elif verbose:
        raw["verbosity"] = "verbose"

    def path_or_none(key: str) -> Path | None:
        return Path(raw[key]) if raw[key] is not None else None

    try:
        budget = EdgeBudget.parse(raw["edge_budget"])
    except ValueError as exc:
        raise UsageError(f"--edge-budget: {exc}")

    config = RunConfig(
        command=command,
        prices=path_or_none("prices"),
        opinions=path_or_none("opinions"),
        tickers=path_or_none("tickers"),
        out=path_or_none("out"),
        window=_parse_int(raw["window"], "window", minimum=2),
        step=_parse_int(raw["step"], "step", minimum=1),
        policy=WindowPolicy(raw["policy"]),
        tau=TauVariant(raw["tau"]),
        edge_budget=budget,
        target=Layer(raw["target"]),
        lags=_parse_lags(raw["lags"]),
        train_start=_parse_date(raw["train_start"], "train-start"),
        train_end=_parse_date(raw["train_end"], "train-end"),
        test_end=_parse_date(raw["test_end"], "test-end"),
        train_windows=_parse_int(raw["train_windows"], "train-windows", minimum=1),
        threads=_parse_int(raw["threads"], "threads", minimum=1),
        seed=_parse_int(raw["seed"], "seed"),
        mode=SynthMode(raw["mode"]),
        n=_parse_int(raw["n"], "n", minimum=4),
        windows=_parse_int(raw["windows"], "windows", minimum=1),
        persistence=_parse_float(raw["persistence"], "persistence"),
        closure_strength=_parse_float(raw["closure_strength"], "closure-strength"),
        closure_base=_parse_float(raw["closure_base"], "closure-base"),
        social_lead=_parse_int(raw["social_lead"], "social-lead", minimum=0),
        social_noise=_parse_float(raw["social_noise"], "social-noise"),
        n_blocks=_parse_int(raw["n_blocks"], "n-blocks", minimum=1),
        noise_scale=_parse_float(raw["noise_scale"], "noise-scale"),
        opinion_noise=_parse_float(raw["opinion_noise"], "opinion-noise"),
        dump_corr=path_or_none("dump_corr"),
        dump_graphs=path_or_none("dump_graphs"),
        dump_features=path_or_none("dump_features"),
        dump_models=path_or_none("dump_models"),
        verbosity=raw["verbosity"],
    )

    dates = [config.train_start, config.train_end, config.test_end]
    named = ["--train-start", "--train-end", "--test-end"]
    present = [(n, d) for n, d in zip(named, dates) if d is not None]
    for (name_a, date_a), (name_b, date_b) in zip(present, present[1:]):
        if not date_a < date_b:
            raise UsageError(f"{name_a} {date_a} must precede {name_b} {date_b}")

    if config.out is None:
        raise UsageError("--out: an output directory is required")
    if command in ("ingest", "graphs", "features", "backtest", "churn"):
        for flag in ("prices", "opinions", "tickers"):
            if getattr(config, flag) is None:
                raise UsageError(f"--{flag}: required for {command}")
    if command == "backtest" and config.train_end is None:
        raise UsageError("--train-end: required for backtest")
    return config


def _configure_logging(verbosity: str) -> None:
    level = {"quiet": logging.ERROR, "verbose": logging.DEBUG}.get(
        verbosity, logging.INFO
    )
    logging.basicConfig(
        stream=sys.stderr, level=level,
        format="%(levelname)s %(name)s: %(message)s", force=True,
    )


def _echo_config(config: RunConfig, out_dir: Path) -> None:
    atomic_write_text(out_dir / "config.txt", "\n".join(config.to_lines()) + "\n")


def _load_tickers(path: Path) -> list[str]:
    try:
        lines = path.read_text().split()
    except OSError as exc:
        raise ParseError(path, 0, f"cannot open file: {exc}")
    if not lines:
        raise ParseError(path, 1, "ticker file is empty")
    return lines


def _load_panels(config: RunConfig) -> tuple[PanelSeries, PanelSeries]:
    tickers = _load_tickers(config.tickers)
    returns_panel = load_price_panel(config.prices, tickers)
    opinion_panel = load_opinion_panel(config.opinions, tickers)
    returns_panel, opinion_panel = align(returns_panel, opinion_panel)
    logger.info(
        "aligned panels: %d assets, %d common days",
        returns_panel.n_assets, returns_panel.n_days,
    )
    return returns_panel, opinion_panel


def _dump_corr(config: RunConfig, panels, spans) -> None:
    returns_panel, opinion_panel = panels
    for span in spans:
        for panel, tag in ((returns_panel, "financial"), (opinion_panel, "social")):
            corr = correlation_matrix(panel, span, config.tau)
            atomic_write_text(
                config.dump_corr / f"corr_{tag}_{span[0]}_{span[1]}.csv",
                matrix_csv(corr.values),
            )


def _write_graph_dumps(out: Path, snapshots, tickers) -> None:
    for snap in snapshots:
        for g in (snap.financial, snap.social):
            name = f"graph_{g.layer.value}_{g.window[0]}_{g.window[1]}.edgelist"
            atomic_write_text(out / name, edgelist_text(g.edges, tickers))


def _write_feature_dumps(out: Path, snapshots) -> None:
    header = "u,v,e_fin,e_soc,e_any,t_fin,t_soc,t_multi"
    for snap in snapshots:
        iu, ju = np.triu_indices(snap.n, 1)
        matrix = feature_matrix(snap)
        lines = [header]
        for m in range(len(iu)):
            t_fin, e_fin, t_soc, e_soc, t_multi, e_any = (
                float(v) for v in matrix[m]
            )
            lines.append(
                f"{iu[m]},{ju[m]},{int(e_fin)},{int(e_soc)},{int(e_any)},"
                f"{t_fin!r},{t_soc!r},{t_multi!r}"
            )
        name = f"features_{snap.window[0]}_{snap.window[1]}.csv"
        atomic_write_text(out / name, "\n".join(lines) + "\n")


def _cmd_ingest(config: RunConfig) -> None:
    returns_panel, opinion_panel = _load_panels(config)
    config.out.mkdir(parents=True, exist_ok=True)
    returns_panel.write_csv(config.out / "returns.csv")
    opinion_panel.write_csv(config.out / "opinion.csv")
    _echo_config(config, config.out)


def _build_pipeline_snapshots(config: RunConfig, panels):
    from .backtest import build_snapshots

    return build_snapshots(
        panels[0], panels[1], config.window_spec(), config.edge_budget,
        config.tau, config.threads,
    )


def _cmd_graphs(config: RunConfig) -> None:
    panels = _load_panels(config)
    snapshots, spans, _ = _build_pipeline_snapshots(config, panels)
    tickers = panels[0].tickers
    config.out.mkdir(parents=True, exist_ok=True)
    _write_graph_dumps(config.out, snapshots, tickers)
    if config.dump_corr is not None:
        _dump_corr(config, panels, spans)
    _echo_config(config, config.out)


def _cmd_features(config: RunConfig) -> None:
    panels = _load_panels(config)
    snapshots, spans, _ = _build_pipeline_snapshots(config, panels)
    config.out.mkdir(parents=True, exist_ok=True)
    _write_feature_dumps(config.out, snapshots)
    if config.dump_corr is not None:
        _dump_corr(config, panels, spans)
    _echo_config(config, config.out)


def _cmd_churn(config: RunConfig) -> None:
    from .backtest import churn_diagnostics

    panels = _load_panels(config)
    snapshots, _, end_dates = _build_pipeline_snapshots(config, panels)
    max_h = min(max(config.lags), len(snapshots) - 1)
    tables = [
        churn_diagnostics([s.layer_graph(layer) for s in snapshots], max_h)
        for layer in (Layer.FINANCIAL, Layer.SOCIAL)
    ]
    config.out.mkdir(parents=True, exist_ok=True)
    lines = ["layer,h,mean_new_edge_fraction,se,n"]
    for table in tables:
        for h, mean, se, count in table.per_lag:
            lines.append(f"{table.layer.value},{h},{mean!r},{se!r},{count}")
    atomic_write_text(config.out / "churn.csv", "\n".join(lines) + "\n")

    target_table = tables[0] if config.target is Layer.FINANCIAL else tables[1]
    jl = ["window_end," + ",".join(end_dates)]
    for i, date in enumerate(end_dates):
        jl.append(
            date + "," + ",".join(repr(float(v)) for v in target_table.jaccard[i])
        )
    atomic_write_text(config.out / "jaccard.csv", "\n".join(jl) + "\n")
    _echo_config(config, config.out)


def _cmd_backtest(config: RunConfig) -> None:
    from .backtest import BacktestConfig, run

    panels = _load_panels(config)
    bt_config = BacktestConfig(
        train_end=config.train_end,
        test_end=config.test_end,
        train_start=config.train_start,
        target_layer=config.target,
        lags=config.lags,
        train_policy=config.policy,
        window=config.window_spec(),
        edge_budget=config.edge_budget,
        train_windows=config.train_windows,
        tau=config.tau,
    )

    model_sink = None
    if config.dump_models is not None:
        def model_sink(outcome, window_end, train_start):
            for result in (outcome.fit_full, outcome.fit_restricted):
                payload = {
                    "variant": result.spec.variant,
                    "lag_h": result.spec.lag_h,
                    "train_start": train_start,
                    "train_end": window_end,
                    "coefficients": {
                        name: float(c) for name, c in
                        zip(result.spec.regressors, result.coefficients)
                    },
                    "loglik": result.loglik,
                    "lambda": outcome.lam,
                    "converged": result.converged,
                }
                name = (
                    f"model_{window_end}_h{outcome.lag}_{result.spec.variant}.json"
                )
                atomic_write_text(
                    config.dump_models / name, json.dumps(payload, indent=2) + "\n"
                )

    report = run(bt_config, panels, threads=config.threads, model_sink=model_sink)
    report.write(config.out)
    if config.dump_graphs is not None or config.dump_features is not None:
        snapshots, _, _ = _build_pipeline_snapshots(config, panels)
        if config.dump_graphs is not None:
            _write_graph_dumps(config.dump_graphs, snapshots, panels[0].tickers)
        if config.dump_features is not None:
            _write_feature_dumps(config.dump_features, snapshots)
    if config.dump_corr is not None:
        from .panel import windows as panel_windows

        spans = panel_windows(config.window_spec(), panels[0].n_days)
        _dump_corr(config, panels, spans)
    _echo_config(config, config.out)
    logger.info("report written to %s (%d rows)", config.out, len(report.rows))


def _cmd_synth(config: RunConfig) -> None:
    spec = SynthSpec(
        n=config.n,
        n_windows=config.windows,
        edge_budget=config.edge_budget,
        persistence=config.persistence,
        closure_strength=config.closure_strength,
        closure_base=config.closure_base,
        social_lead=config.social_lead,
        social_noise=config.social_noise,
        seed=config.seed,
        mode=config.mode,
        window=WindowSpec(config.window, config.step, WindowPolicy.ROLLING),
        n_blocks=config.n_blocks,
        noise_scale=config.noise_scale,
        opinion_noise=config.opinion_noise,
    )
    config.out.mkdir(parents=True, exist_ok=True)
    if spec.mode is SynthMode.TIME_SERIES:
        returns_panel, opinion_panel = generate_timeseries(spec)
        closes = closes_from_returns(returns_panel)
        dates = [previous_trading_date(returns_panel.dates[0])] + list(
            returns_panel.dates
        )
        lines = ["date,ticker,close"]
        for j, date in enumerate(dates):
            for i, ticker in enumerate(returns_panel.tickers):
                lines.append(f"{date},{ticker},{float(closes[i, j])!r}")
        atomic_write_text(config.out / "prices.csv", "\n".join(lines) + "\n")

        lines = ["date,ticker,bullish_count"]
        for j, date in enumerate(opinion_panel.dates):
            for i, ticker in enumerate(opinion_panel.tickers):
                lines.append(f"{date},{ticker},{int(opinion_panel.values[i, j])}")
        atomic_write_text(config.out / "opinions.csv", "\n".join(lines) + "\n")
        tickers = returns_panel.tickers
    else:
        snapshots = generate_graph_dynamics(spec)
        from .synth import synthetic_tickers

        tickers = synthetic_tickers(spec.n)
        _write_graph_dumps(config.out, snapshots, tickers)
    atomic_write_text(config.out / "tickers.txt", "\n".join(tickers) + "\n")
    _echo_config(config, config.out)
    logger.info("synthetic data written to %s", config.out)


def main(argv=None) -> int:
    """Run a subcommand; returns the process exit code."""
    if argv is None:
        argv = sys.argv[1:]
    try:
        config = parse_and_validate(list(argv))
    except UsageError as exc:
        print(f"duplexnet: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    _configure_logging(config.verbosity)
    handler = {
        "ingest": _cmd_ingest,
        "graphs": _cmd_graphs,
        "features": _cmd_features,
        "backtest": _cmd_backtest,
        "churn": _cmd_churn,
        "synth": _cmd_synth,
    }[config.command]
    try:
        handler(config)
    except DataError as exc:
        logger.error("%s", exc)
        return 2
    except NumericFailure as exc:
        logger.error("%s", exc)
        return 3
    return 0


def script_entry() -> None:
    sys.exit(main())
