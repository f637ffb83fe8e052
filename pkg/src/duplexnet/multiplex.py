"""Duplex snapshots and the link-formation features.

Per vertex pair the predictors are: persistence indicators (edge present in
the financial layer, the social layer, or either) and triadic-closure scores
(mean clustering coefficient of the pair's common neighbors, per layer and
on the OR-union of the layers).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .netbuild import Layer, LayerGraph

#: Column order of feature matrices and the regressor name space.
FEATURE_NAMES = ("t_fin", "e_fin", "t_soc", "e_soc", "t_multi", "e_any")


@dataclass(frozen=True)
class DuplexSnapshot:
    """Financial and social layer graphs on one vertex set, plus their union."""

    financial: LayerGraph
    social: LayerGraph

    def __post_init__(self):
        if self.financial.n != self.social.n:
            raise ValueError("layers must share the vertex set")
        if self.financial.window != self.social.window:
            raise ValueError("layers must come from the same window")

    @cached_property
    def aggregated(self) -> LayerGraph:
        return LayerGraph(
            layer=Layer.AGGREGATED,
            window=self.financial.window,
            n=self.financial.n,
            edges=self.financial.edges | self.social.edges,
        )

    @property
    def n(self) -> int:
        return self.financial.n

    @property
    def window(self) -> tuple[int, int]:
        return self.financial.window

    def layer_graph(self, layer: Layer) -> LayerGraph:
        if layer is Layer.FINANCIAL:
            return self.financial
        if layer is Layer.SOCIAL:
            return self.social
        return self.aggregated


@dataclass(frozen=True)
class PairFeatures:
    """Feature row for one unordered vertex pair."""

    pair: tuple[int, int]
    e_fin: int
    e_soc: int
    e_any: int
    t_fin: float
    t_soc: float
    t_multi: float


def clustering_vector(g: LayerGraph) -> np.ndarray:
    """Clustering coefficient of every vertex.

    Triangle counts come from an integer adjacency product, so they are
    exact; vertices of degree below 2 close no triads and score 0.
    """
    a = g.adjacency.astype(np.int64)
    degree = a.sum(axis=1)
    triangles = ((a @ a) * a).sum(axis=1) // 2
    pairs = degree * (degree - 1)
    return np.where(degree >= 2, 2.0 * triangles / np.maximum(pairs, 1), 0.0)


def clustering_coefficient(g: LayerGraph, i: int) -> float:
    """Fraction of the vertex's neighbor pairs that are connected."""
    if not (0 <= i < g.n):
        raise IndexError(f"vertex {i} outside graph of {g.n} vertices")
    a = g.adjacency
    neighbors = np.flatnonzero(a[i])
    k = len(neighbors)
    if k < 2:
        return 0.0
    triangles = int(a[np.ix_(neighbors, neighbors)].sum()) // 2
    return 2.0 * triangles / (k * (k - 1))


def _closure(adj: np.ndarray, clustering: np.ndarray, u: int, v: int) -> float:
    common = adj[u] & adj[v]
    count = int(np.count_nonzero(common))
    if count == 0:
        return 0.0
    return float(clustering[common].sum()) / count


def triadic_closure(g: LayerGraph, u: int, v: int) -> float:
    """Mean clustering coefficient of the pair's common neighbors; 0 if none."""
    if u == v:
        raise ValueError("triadic closure needs two distinct vertices")
    return _closure(g.adjacency, clustering_vector(g), u, v)


def multiplex_triadic_closure(d: DuplexSnapshot, u: int, v: int) -> float:
    """Triadic closure on the OR-union of the two layers, so triangles may
    mix financial and social edges."""
    return triadic_closure(d.aggregated, u, v)


def feature_matrix(d: DuplexSnapshot) -> np.ndarray:
    """All pair features as an array, pairs in lexicographic order.

    Columns follow FEATURE_NAMES. Row m corresponds to the m-th pair of
    ``numpy.triu_indices(n, 1)``.
    """
    n = d.n
    iu, ju = np.triu_indices(n, 1)
    out = np.zeros((len(iu), len(FEATURE_NAMES)))
    graphs = (d.financial, d.social, d.aggregated)
    for col, g in zip((0, 2, 4), graphs):  # t_fin, t_soc, t_multi
        adj = g.adjacency
        clustering = clustering_vector(g)
        closure = out[:, col]
        for m in range(len(iu)):
            common = adj[iu[m]] & adj[ju[m]]
            count = int(np.count_nonzero(common))
            if count:
                closure[m] = clustering[common].sum() / count
        out[:, col + 1] = adj[iu, ju]  # e_fin, e_soc, e_any
    return out


def pair_features(d: DuplexSnapshot) -> list[PairFeatures]:
    """Feature rows for all pairs, in deterministic lexicographic order."""
    n = d.n
    iu, ju = np.triu_indices(n, 1)
    matrix = feature_matrix(d)
    rows = []
    for m in range(len(iu)):
        t_fin, e_fin, t_soc, e_soc, t_multi, e_any = matrix[m]
        rows.append(
            PairFeatures(
                pair=(int(iu[m]), int(ju[m])),
                e_fin=int(e_fin),
                e_soc=int(e_soc),
                e_any=int(e_any),
                t_fin=float(t_fin),
                t_soc=float(t_soc),
                t_multi=float(t_multi),
            )
        )
    return rows
