"""Kendall rank correlation per window and the distance transform.

The scalar path counts discordant pairs with a merge sort (O(n log n)); the
matrix path builds each asset's pairwise-sign vector over the window and
takes a Gram product, which yields the same exact integer concordance sums
for every pair at once. Both reduce to

    rho = (concordant - discordant) / denominator

where the denominator is the number of distinct index pairs (tau-a) or the
tie-adjusted geometric mean (tau-b, default).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DegenerateCorrelation, ShapeError
from .panel import PanelSeries


class MatrixKind(Enum):
    CORRELATION = "correlation"
    DISTANCE = "distance"


class TauVariant(Enum):
    A = "a"
    B = "b"


@dataclass(frozen=True)
class WindowedMatrix:
    """Symmetric N x N matrix for one window, correlation or distance.

    ``degenerate_assets`` lists row indices whose series were all-tied within
    the window; their off-diagonal correlations are 0 by convention.
    """

    window: tuple[int, int]
    kind: MatrixKind
    values: np.ndarray
    degenerate_assets: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "degenerate_assets", frozenset(self.degenerate_assets))
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ShapeError(f"matrix must be square, got shape {values.shape}")
        values.flags.writeable = False

    @property
    def n(self) -> int:
        return self.values.shape[0]


def _merge_count(values: list[float]) -> int:
    """Count strict inversions (earlier > later) while merge-sorting."""
    n = len(values)
    if n < 2:
        return 0
    mid = n // 2
    left = values[:mid]
    right = values[mid:]
    count = _merge_count(left) + _merge_count(right)
    merged = []
    i = j = 0
    while i < len(left) and j < len(right):
        if left[i] <= right[j]:
            merged.append(left[i])
            i += 1
        else:
            count += len(left) - i
            merged.append(right[j])
            j += 1
    merged.extend(left[i:])
    merged.extend(right[j:])
    values[:] = merged
    return count


def _tie_pair_count(sorted_values: np.ndarray) -> int:
    """Number of tied pairs, sum of t*(t-1)/2 over runs of equal values."""
    boundaries = np.flatnonzero(
        np.r_[True, sorted_values[1:] != sorted_values[:-1], True]
    )
    runs = np.diff(boundaries)
    return int(np.sum(runs * (runs - 1) // 2))


def kendall(x, y, variant: TauVariant = TauVariant.B) -> float:
    """Rank correlation of two equal-length sequences, in [-1, 1].

    Concordance sums come from a merge-sort inversion count after lexical
    sorting, so the cost is O(n log n). All-tied input has no rank
    information and raises DegenerateCorrelation.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1:
        raise ShapeError("kendall expects 1-D sequences")
    n = x.shape[0]
    if y.shape[0] != n:
        raise ShapeError(f"length mismatch: {n} vs {y.shape[0]}")
    if n < 2:
        raise ShapeError("kendall needs at least 2 observations")

    perm = np.lexsort((y, x))
    xs = x[perm]
    ys = y[perm]

    n0 = n * (n - 1) // 2
    xtie = _tie_pair_count(xs)
    ytie = _tie_pair_count(np.sort(y))
    joint = np.flatnonzero(
        np.r_[True, (xs[1:] != xs[:-1]) | (ys[1:] != ys[:-1]), True]
    )
    joint_runs = np.diff(joint)
    xytie = int(np.sum(joint_runs * (joint_runs - 1) // 2))

    if xtie == n0 or ytie == n0:
        raise DegenerateCorrelation("all values tied in one of the sequences")

    # After sorting by (x, y), strict y-inversions are exactly the discordant
    # pairs: equal-x runs are y-sorted, so they contribute none.
    discordant = _merge_count(list(ys))
    s = n0 - xtie - ytie + xytie - 2 * discordant

    if variant is TauVariant.A:
        return s / n0
    return s / math.sqrt(float(n0 - xtie) * float(n0 - ytie))


def _sign_pair_vectors(values: np.ndarray) -> np.ndarray:
    """Per-asset sign of all pairwise differences within the window.

    Row i holds sgn(v_i[a] - v_i[b]) over index pairs a < b. The Gram product
    of this matrix gives every pair's concordant-minus-discordant sum; all
    entries are small integers, so float accumulation is exact and the result
    is independent of summation order.
    """
    t = values.shape[1]
    ia, ib = np.triu_indices(t, 1)
    return np.sign(values[:, ia] - values[:, ib])


def correlation_matrix(
    panel: PanelSeries,
    window: tuple[int, int],
    variant: TauVariant = TauVariant.B,
) -> WindowedMatrix:
    """Pairwise Kendall correlations of all assets over one window.

    All-tied assets get correlation 0 against everything (flagged in
    ``degenerate_assets``); the diagonal is 1 by definition.
    """
    start, end = window
    if not (0 <= start < end <= panel.n_days):
        raise ShapeError(f"window {window} outside panel of length {panel.n_days}")
    if end - start < 2:
        raise ShapeError("window must span at least 2 days")

    sub = panel.values[:, start:end]
    z = _sign_pair_vectors(sub)
    gram = z @ z.T
    n0 = (end - start) * (end - start - 1) // 2

    untied = np.diag(gram).copy()  # n0 - xtie per asset, 0 iff all tied
    degenerate = np.flatnonzero(untied == 0)
    untied[degenerate] = 1.0  # avoid 0/0; rows zeroed below

    if variant is TauVariant.A:
        rho = gram / n0
    else:
        rho = gram / np.sqrt(np.outer(untied, untied))

    rho[degenerate, :] = 0.0
    rho[:, degenerate] = 0.0
    np.fill_diagonal(rho, 1.0)
    return WindowedMatrix(
        window=(start, end),
        kind=MatrixKind.CORRELATION,
        values=rho,
        degenerate_assets=frozenset(int(i) for i in degenerate),
    )


def to_distance(c: WindowedMatrix) -> WindowedMatrix:
    """Map correlations to distances d = sqrt(2 (1 - rho)), in [0, 2]."""
    if c.kind is not MatrixKind.CORRELATION:
        raise ShapeError("to_distance expects a correlation matrix")
    d = np.sqrt(2.0 * (1.0 - c.values))
    return WindowedMatrix(
        window=c.window,
        kind=MatrixKind.DISTANCE,
        values=d,
        degenerate_assets=c.degenerate_assets,
    )
