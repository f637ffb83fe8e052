"""Distance-matrix filtering into sparse asset graphs, plus churn measures.

A layer graph keeps the K shortest pairwise distances as edges. K defaults
to a quarter of all vertex pairs; an explicit count is also supported. Ties
at the cutoff break lexicographically so identical inputs always give
identical graphs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

from .errors import BudgetTooLarge, DegenerateGraph, ShapeError
from .correlate import MatrixKind, WindowedMatrix


class Layer(Enum):
    FINANCIAL = "financial"
    SOCIAL = "social"
    AGGREGATED = "aggregated"


@dataclass(frozen=True)
class EdgeBudget:
    """How many edges the filter keeps: a quartile of all pairs or a count."""

    kind: str = "quartile"
    count: int = 0

    def __post_init__(self):
        if self.kind not in ("quartile", "count"):
            raise ValueError(f"unknown edge budget kind {self.kind!r}")
        if self.kind == "count" and self.count < 1:
            raise ValueError("count budget must be at least 1")

    @classmethod
    def parse(cls, text: str) -> "EdgeBudget":
        """Parse ``quartile`` or ``count:K``."""
        if text == "quartile":
            return cls("quartile")
        if text.startswith("count:"):
            return cls("count", int(text.split(":", 1)[1]))
        raise ValueError(f"cannot parse edge budget {text!r}")

    def resolve(self, n: int) -> int:
        pairs = n * (n - 1) // 2
        if self.kind == "quartile":
            return pairs // 4
        if self.count > pairs:
            raise BudgetTooLarge(
                f"budget {self.count} exceeds {pairs} pairs on {n} vertices"
            )
        return self.count

    def __str__(self) -> str:
        return "quartile" if self.kind == "quartile" else f"count:{self.count}"


@dataclass(frozen=True)
class LayerGraph:
    """Undirected graph on the asset vertex set for one layer and window."""

    layer: Layer
    window: tuple[int, int]
    n: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        object.__setattr__(self, "edges", frozenset(self.edges))
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop on vertex {u}")
            if not (0 <= u < v < self.n):
                raise ValueError(f"edge ({u}, {v}) not ordered within {self.n} vertices")

    @cached_property
    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=bool)
        if self.edges:
            us, vs = zip(*self.edges)
            a[us, vs] = True
            a[vs, us] = True
        a.flags.writeable = False
        return a

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self.edges


def filter_graph(d: WindowedMatrix, budget: EdgeBudget, layer: Layer) -> LayerGraph:
    """Keep the K shortest of the N(N-1)/2 pairwise distances as edges.

    Sorting is by (distance, i, j), so cutoff ties resolve to the
    lexicographically smallest vertex pairs.
    """
    if d.kind is not MatrixKind.DISTANCE:
        raise ShapeError("filter_graph expects a distance matrix")
    n = d.n
    k = budget.resolve(n)
    iu, ju = np.triu_indices(n, 1)
    dist = d.values[iu, ju]
    order = np.lexsort((ju, iu, dist))
    keep = order[:k]
    edges = frozenset((int(iu[m]), int(ju[m])) for m in keep)
    return LayerGraph(layer=layer, window=d.window, n=n, edges=edges)


def new_edge_fraction(g_now: LayerGraph, g_future: LayerGraph) -> float:
    """Fraction of the future edge set absent from the current one."""
    if g_now.n != g_future.n:
        raise ShapeError("graphs must share the vertex set")
    if not g_future.edges:
        raise DegenerateGraph("future graph has no edges")
    new = len(g_future.edges - g_now.edges)
    return new / len(g_future.edges)


def jaccard(g1: LayerGraph, g2: LayerGraph) -> float:
    """Edge-set overlap |intersection| / |union|; 1.0 for two empty graphs."""
    if g1.n != g2.n:
        raise ShapeError("graphs must share the vertex set")
    union = len(g1.edges | g2.edges)
    if union == 0:
        return 1.0
    return len(g1.edges & g2.edges) / union
