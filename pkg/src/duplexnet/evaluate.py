"""Out-of-sample discrimination metrics.

AUC is the tie-aware Mann-Whitney statistic (half credit for ties), which
is mandatory here because the time-invariance benchmark scores are binary
and massively tied. Relative skill over the benchmark rescales both AUCs
around the chance level 0.5. Evaluation views split the pair universe into
the full graph, candidate additions, and candidate deletions.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import BenchmarkDegenerate, NumericError, ShapeError, UndefinedAUC
from .netbuild import LayerGraph


class Split(Enum):
    FULL_GRAPH = "full_graph"
    NEW_EDGES = "new_edges"
    DELETIONS = "deletions"


@dataclass(frozen=True)
class ScoredPairs:
    """Scores and binary labels for a set of vertex pairs."""

    pairs: np.ndarray  # m x 2 int
    scores: np.ndarray  # m float
    labels: np.ndarray  # m, values 0.0 / 1.0
    split: Split = Split.FULL_GRAPH

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=np.int64)
        scores = np.asarray(self.scores, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.float64)
        for name, arr in (("pairs", pairs), ("scores", scores), ("labels", labels)):
            object.__setattr__(self, name, arr)
            arr.flags.writeable = False
        if pairs.ndim != 2 or pairs.shape[1] != 2:
            raise ShapeError("pairs must be m x 2")
        m = pairs.shape[0]
        if scores.shape != (m,) or labels.shape != (m,):
            raise ShapeError("scores and labels must match the pair count")
        if not np.all(np.isfinite(scores)):
            raise NumericError("scores must be finite")

    @property
    def n_pos(self) -> int:
        return int(np.sum(self.labels == 1.0))

    @property
    def n_neg(self) -> int:
        return int(np.sum(self.labels == 0.0))


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks with tied scores sharing their average rank."""
    order = np.argsort(scores, kind="mergesort")
    sorted_scores = scores[order]
    boundaries = np.flatnonzero(
        np.r_[True, sorted_scores[1:] != sorted_scores[:-1], True]
    )
    # Average of ranks a+1 .. b for each tie run [a, b).
    averages = (boundaries[:-1] + 1 + boundaries[1:]) / 2.0
    ranks = np.empty(len(scores))
    ranks[order] = np.repeat(averages, np.diff(boundaries))
    return ranks


def auc(s: ScoredPairs) -> float:
    """P(score of a positive > score of a negative) + half the tie mass.

    Computed by rank sum, equivalent to comparing every positive-negative
    pair directly.
    """
    n_pos = s.n_pos
    n_neg = s.n_neg
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUC(
            f"need both label classes, got {n_pos} positives / {n_neg} negatives"
        )
    ranks = _average_ranks(s.scores)
    rank_sum = float(np.sum(ranks[s.labels == 1.0]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def auc_star(auc_model: float, auc_benchmark: float) -> float:
    """Relative skill (AUC - 0.5) / (benchmark AUC - 0.5) - 1."""
    if not auc_benchmark > 0.5:
        raise BenchmarkDegenerate(
            f"benchmark AUC {auc_benchmark} is not above chance"
        )
    return (auc_model - 0.5) / (auc_benchmark - 0.5) - 1.0


def benchmark_scores(g_now: LayerGraph) -> np.ndarray:
    """Time-invariance scores: 1 where an edge exists now, 0 elsewhere.

    Pair order matches ``numpy.triu_indices(n, 1)``.
    """
    iu, ju = np.triu_indices(g_now.n, 1)
    return g_now.adjacency[iu, ju].astype(np.float64)


def split(s: ScoredPairs, g_now: LayerGraph) -> dict[Split, ScoredPairs]:
    """Carve the scored pairs into the three evaluation views.

    FULL_GRAPH keeps everything. NEW_EDGES keeps pairs without a current
    edge (label: does one appear?). DELETIONS keeps current edges with the
    label flipped to "edge removed" and scores reversed so a higher score
    means a more confident deletion call.
    """
    iu = s.pairs[:, 0]
    ju = s.pairs[:, 1]
    present_now = g_now.adjacency[iu, ju]

    absent = ~present_now
    new_edges = ScoredPairs(
        pairs=s.pairs[absent],
        scores=s.scores[absent],
        labels=s.labels[absent],
        split=Split.NEW_EDGES,
    )
    deletions = ScoredPairs(
        pairs=s.pairs[present_now],
        scores=1.0 - s.scores[present_now],
        labels=1.0 - s.labels[present_now],
        split=Split.DELETIONS,
    )
    full = ScoredPairs(
        pairs=s.pairs, scores=s.scores, labels=s.labels, split=Split.FULL_GRAPH
    )
    return {Split.FULL_GRAPH: full, Split.NEW_EDGES: new_edges, Split.DELETIONS: deletions}
