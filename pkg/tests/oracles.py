"""Independent brute-force oracles the fast implementations are checked against.

Everything here is deliberately naive: quadratic pair loops, cubic triangle
enumeration, explicit positive-negative comparisons. None of it shares code
with the library paths it verifies.
"""

import math

import numpy as np


def kendall_bruteforce(x, y, variant="b"):
    """O(n^2) sign-pair concordance count with tie-adjusted denominators."""
    n = len(x)
    s = 0
    x_ties = 0
    y_ties = 0
    for a in range(n):
        for b in range(a + 1, n):
            dx = (x[a] > x[b]) - (x[a] < x[b])
            dy = (y[a] > y[b]) - (y[a] < y[b])
            s += dx * dy
            if dx == 0:
                x_ties += 1
            if dy == 0:
                y_ties += 1
    n0 = n * (n - 1) // 2
    if x_ties == n0 or y_ties == n0:
        return None  # degenerate: no rank information
    if variant == "a":
        return s / n0
    return s / math.sqrt(float(n0 - x_ties) * float(n0 - y_ties))


def triangles_through_vertex(edges, n, i):
    """Count triangles containing vertex i by full triple enumeration."""
    edge_set = {(min(a, b), max(a, b)) for a, b in edges}

    def connected(a, b):
        return (min(a, b), max(a, b)) in edge_set

    count = 0
    for j in range(n):
        for k in range(j + 1, n):
            if j != i and k != i and connected(i, j) and connected(i, k) \
                    and connected(j, k):
                count += 1
    return count


def degree(edges, n, i):
    return sum(1 for a, b in edges if i in (a, b))


def clustering_oracle(edges, n, i):
    """Closed-triad fraction from the triangle enumeration."""
    k = degree(edges, n, i)
    if k < 2:
        return 0.0
    t = triangles_through_vertex(edges, n, i)
    return 2.0 * t / (k * (k - 1))


def clustering_vector_oracle(edges, n):
    return np.array([clustering_oracle(edges, n, i) for i in range(n)])


def common_neighbors(edges, n, u, v):
    edge_set = {(min(a, b), max(a, b)) for a, b in edges}
    return sorted(
        w for w in range(n)
        if w not in (u, v)
        and (min(u, w), max(u, w)) in edge_set
        and (min(v, w), max(v, w)) in edge_set
    )


def triadic_oracle(edges, n, u, v):
    """Mean clustering coefficient over the enumerated common neighbors."""
    common = common_neighbors(edges, n, u, v)
    if not common:
        return 0.0
    coeffs = clustering_vector_oracle(edges, n)
    return float(coeffs[np.array(common)].sum()) / len(common)


def auc_bruteforce(scores, labels):
    """Explicit positive-negative pair comparison with half-credit ties."""
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    if not pos or not neg:
        return None
    total = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                total += 1.0
            elif p == q:
                total += 0.5
    return total / (len(pos) * len(neg))


def random_graph_edges(rng, n, n_edges):
    """Uniform random edge set of the requested size."""
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    chosen = rng.choice(len(pairs), size=n_edges, replace=False)
    return frozenset(pairs[int(i)] for i in chosen)
