"""Seeded synthetic duplex data with known ground truth.

Graph mode runs a Markov edge process per step: current edges survive with
a fixed probability, and vacancies refill by weighted sampling where the
weight grows with the pair's triadic closure, keeping the edge count pinned
to the budget. The social layer is either the financial layer shifted
forward in time (a planted lead) or an independent realization; extra edge
flips make it noisier. Time-series mode emits block-factor daily panels
whose filtered graphs recover the block structure.

Everything derives from one 64-bit seed through spawned Philox streams, so
outputs are bit-reproducible and per-step streams stay independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import BudgetTooLarge
from .multiplex import DuplexSnapshot
from .netbuild import EdgeBudget, Layer, LayerGraph
from .panel import PanelKind, PanelSeries, WindowSpec


class SynthMode(Enum):
    GRAPH_DYNAMICS = "graphs"
    TIME_SERIES = "timeseries"


@dataclass(frozen=True)
class SynthSpec:
    """Generator parameters; every probability lives in [0, 1]."""

    n: int = 100
    n_windows: int = 250
    edge_budget: EdgeBudget = field(default_factory=EdgeBudget)
    persistence: float = 0.9
    closure_strength: float = 0.0
    closure_base: float = -2.0
    social_lead: int = 0
    social_noise: float = 0.1
    seed: int = 0
    mode: SynthMode = SynthMode.GRAPH_DYNAMICS
    # time-series mode only
    window: WindowSpec = field(default_factory=lambda: WindowSpec(126, 5))
    n_blocks: int = 10
    noise_scale: float = 0.8
    opinion_noise: float = 0.3

    def __post_init__(self):
        if self.n < 4:
            raise ValueError("need at least 4 assets")
        for name in ("persistence", "social_noise"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be a probability, got {value}")
        if self.social_lead < 0:
            raise ValueError("social lead must be non-negative")


def _rng(seed_seq: np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed_seq))


def _sorted_pairs(n: int) -> list[tuple[int, int]]:
    return [(u, v) for u in range(n) for v in range(u + 1, n)]


def _closure_weights(
    graph: LayerGraph, vacant: list[tuple[int, int]], base: float, strength: float
) -> np.ndarray:
    """Sampling weight per vacant pair: logistic(base + strength * closure)."""
    if strength == 0.0 or not vacant:
        eta = np.full(len(vacant), base)
    else:
        from .multiplex import clustering_vector

        adj = graph.adjacency
        clustering = clustering_vector(graph)
        closure = np.zeros(len(vacant))
        for m, (u, v) in enumerate(vacant):
            common = adj[u] & adj[v]
            count = int(np.count_nonzero(common))
            if count:
                closure[m] = clustering[common].sum() / count
        eta = base + strength * closure
    return 1.0 / (1.0 + np.exp(-eta))


def _weighted_sample(
    rng: np.random.Generator, items: list, weights: np.ndarray, k: int
) -> list:
    """Sample k items without replacement, probability proportional to weight.

    Exponential-races ranking: the k smallest exponential draws scaled by
    1/weight win. Deterministic for a given generator state.
    """
    if k == 0:
        return []
    keys = rng.exponential(size=len(items)) / weights
    winners = np.argsort(keys, kind="stable")[:k]
    return [items[int(i)] for i in sorted(winners)]


def _step_graph(
    current: LayerGraph,
    spec: SynthSpec,
    budget_k: int,
    rng: np.random.Generator,
    window: tuple[int, int],
    layer: Layer,
) -> LayerGraph:
    """One Markov transition: survival draws, then weighted refill to budget.

    Dropped edges rejoin the candidate pool, so zero persistence with flat
    weights degenerates to i.i.d. uniform budget-K graphs.
    """
    edges = sorted(current.edges)
    survive = rng.random(len(edges)) < spec.persistence
    kept = {e for e, s in zip(edges, survive) if s}
    need = budget_k - len(kept)
    if need > 0:
        candidates = [p for p in _sorted_pairs(spec.n) if p not in kept]
        weights = _closure_weights(
            current, candidates, spec.closure_base, spec.closure_strength
        )
        kept.update(_weighted_sample(rng, candidates, weights, need))
    return LayerGraph(layer=layer, window=window, n=spec.n, edges=frozenset(kept))


def _flip_edges(
    graph: LayerGraph, n_flips: int, rng: np.random.Generator
) -> LayerGraph:
    """Replace n_flips random edges with random vacant pairs."""
    if n_flips == 0:
        return graph
    edges = sorted(graph.edges)
    vacant = [p for p in _sorted_pairs(graph.n) if p not in graph.edges]
    n_flips = min(n_flips, len(edges), len(vacant))
    drop = rng.choice(len(edges), size=n_flips, replace=False)
    add = rng.choice(len(vacant), size=n_flips, replace=False)
    new_edges = set(edges)
    for i in drop:
        new_edges.discard(edges[int(i)])
    for i in add:
        new_edges.add(vacant[int(i)])
    return LayerGraph(
        layer=graph.layer, window=graph.window, n=graph.n, edges=frozenset(new_edges)
    )


def _initial_graph(
    spec: SynthSpec, budget_k: int, rng: np.random.Generator, layer: Layer
) -> LayerGraph:
    pairs = _sorted_pairs(spec.n)
    chosen = rng.choice(len(pairs), size=budget_k, replace=False)
    edges = frozenset(pairs[int(i)] for i in chosen)
    return LayerGraph(layer=layer, window=(0, 0), n=spec.n, edges=edges)


def _graph_chain(
    spec: SynthSpec, budget_k: int, n_steps: int,
    seed_seq: np.random.SeedSequence, layer: Layer,
) -> list[LayerGraph]:
    streams = seed_seq.spawn(n_steps)
    chain = [_initial_graph(spec, budget_k, _rng(streams[0]), layer)]
    for t in range(1, n_steps):
        nxt = _step_graph(
            chain[-1], spec, budget_k, _rng(streams[t]), (t, t), layer
        )
        chain.append(nxt)
    return chain


def generate_graph_dynamics(spec: SynthSpec) -> list[DuplexSnapshot]:
    """Duplex snapshot sequence with planted persistence/closure dynamics.

    With a positive ``social_lead`` the social layer at step t copies the
    financial layer at t + lead before noise, so social structure predicts
    financial structure that many steps ahead. With lead 0 the social layer
    is an independent realization of the same dynamics.
    """
    pairs = spec.n * (spec.n - 1) // 2
    budget_k = spec.edge_budget.resolve(spec.n)
    if budget_k < 1:
        raise BudgetTooLarge(f"budget resolves to {budget_k} edges")
    if budget_k > pairs:
        raise BudgetTooLarge(f"budget {budget_k} exceeds {pairs} pairs")

    root = np.random.SeedSequence(spec.seed)
    fin_seq, soc_seq, noise_seq = root.spawn(3)

    fin_steps = spec.n_windows + (spec.social_lead if spec.social_lead > 0 else 0)
    financial = _graph_chain(spec, budget_k, fin_steps, fin_seq, Layer.FINANCIAL)

    if spec.social_lead > 0:
        social_base = [
            LayerGraph(Layer.SOCIAL, (t, t), spec.n, financial[t + spec.social_lead].edges)
            for t in range(spec.n_windows)
        ]
    else:
        social_base = [
            LayerGraph(Layer.SOCIAL, g.window, g.n, g.edges)
            for g in _graph_chain(spec, budget_k, spec.n_windows, soc_seq, Layer.SOCIAL)
        ]

    n_flips = round(spec.social_noise * budget_k)
    noise_streams = noise_seq.spawn(spec.n_windows)
    snapshots = []
    for t in range(spec.n_windows):
        fin_t = LayerGraph(Layer.FINANCIAL, (t, t), spec.n, financial[t].edges)
        soc_t = _flip_edges(social_base[t], n_flips, _rng(noise_streams[t]))
        snapshots.append(DuplexSnapshot(financial=fin_t, social=soc_t))
    return snapshots


def generate_timeseries(spec: SynthSpec) -> tuple[PanelSeries, PanelSeries]:
    """Block-factor daily panels: returns and opinion counts.

    Assets in the same block share a latent factor, so within-block rank
    correlation is high. Opinion counts are a monotone noisy transform of
    the block factor shifted ``social_lead`` window steps into the future,
    rounded to non-negative integers (which also produces realistic ties).
    """
    width, step = spec.window.width, spec.window.step
    n_days = width + (spec.n_windows - 1) * step
    lead_days = spec.social_lead * step

    root = np.random.SeedSequence(spec.seed)
    factor_seq, noise_seq, opinion_seq = root.spawn(3)

    blocks = np.arange(spec.n) % spec.n_blocks
    factors = _rng(factor_seq).normal(size=(spec.n_blocks, n_days + lead_days))
    noise = _rng(noise_seq).normal(size=(spec.n, n_days))
    returns = 0.01 * (factors[blocks, :n_days] + spec.noise_scale * noise)

    opinion_raw = factors[blocks, lead_days:] + spec.opinion_noise * _rng(
        opinion_seq
    ).normal(size=(spec.n, n_days))
    counts = np.floor(np.exp(1.2 + opinion_raw))

    dates = trading_dates(n_days)
    tickers = synthetic_tickers(spec.n)
    returns_panel = PanelSeries(dates, tickers, returns, PanelKind.RETURNS)
    opinion_panel = PanelSeries(dates, tickers, counts, PanelKind.OPINION)
    return returns_panel, opinion_panel


def trading_dates(n_days: int, start_year: int = 2012) -> list[str]:
    """ISO dates of consecutive weekdays, a synthetic trading calendar."""
    import datetime

    day = datetime.date(start_year, 1, 2)
    out = []
    while len(out) < n_days:
        if day.weekday() < 5:
            out.append(day.isoformat())
        day += datetime.timedelta(days=1)
    return out


def synthetic_tickers(n: int) -> list[str]:
    """A000, A001, ... stable synthetic symbols."""
    width = max(3, len(str(n - 1)))
    return [f"A{i:0{width}d}" for i in range(n)]


def closes_from_returns(panel: PanelSeries, initial: float = 100.0) -> np.ndarray:
    """Close path implied by a returns panel, one extra leading column."""
    log_prices = np.cumsum(panel.values, axis=1)
    closes = initial * np.exp(np.column_stack([np.zeros(panel.n_assets), log_prices]))
    return closes


def previous_trading_date(first_date: str) -> str:
    """The weekday immediately before an ISO date, for the seed close."""
    import datetime

    day = datetime.date.fromisoformat(first_date) - datetime.timedelta(days=1)
    while day.weekday() >= 5:
        day -= datetime.timedelta(days=1)
    return day.isoformat()
