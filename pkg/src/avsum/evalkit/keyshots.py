"""Importance scores to keyshot summaries via exact 0/1 knapsack."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from avsum.data.formats import validate_boundaries
from avsum.errors import ValidationError


def _exact_ints(values: list[float]) -> list[int]:
    """Scale floats to integers by a common power-of-two denominator (exact)."""
    fracs = [Fraction(v) for v in values]
    denom = max((f.denominator for f in fracs), default=1)
    return [int(f * denom) for f in fracs]


def knapsack(values: list[float], weights: list[int], capacity: int) -> list[int]:
    """Indices of an optimal item subset.

    Values are compared exactly. Among optimal subsets the inclusion vector
    that is lexicographically greatest wins, i.e. earlier items are
    preferred.
    """
    n = len(values)
    vals = _exact_ints(values)
    # best[i][w]: optimum over items i.. with capacity w
    best = [[0] * (capacity + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        row, nxt, wi, vi = best[i], best[i + 1], weights[i], vals[i]
        for w in range(capacity + 1):
            skip = nxt[w]
            row[w] = max(skip, vi + nxt[w - wi]) if wi <= w else skip
    picks, w = [], capacity
    for i in range(n):
        wi = weights[i]
        if wi <= w and vals[i] + best[i + 1][w - wi] == best[i][w]:
            picks.append(i)
            w -= wi
    return picks


def shot_values(importance: np.ndarray, bounds: list[int]) -> tuple[list[float], list[int]]:
    values, lengths = [], []
    for a, b in zip(bounds, bounds[1:]):
        values.append(math.fsum(importance[a:b].tolist()) / (b - a))
        lengths.append(b - a)
    return values, lengths


def importance_to_keyshots(importance, shot_boundaries, budget_fraction: float = 0.15) -> np.ndarray:
    """Binary summary of whole shots maximising total mean-importance
    within ``floor(budget_fraction * N)`` frames."""
    importance = np.asarray(importance, dtype=np.float64)
    n = len(importance)
    bounds = [int(b) for b in shot_boundaries]
    validate_boundaries(bounds, n)
    if not 0 < budget_fraction <= 1:
        raise ValidationError(f"budget_fraction must be in (0, 1], got {budget_fraction}")
    values, lengths = shot_values(importance, bounds)
    budget = math.floor(budget_fraction * n)
    picks = knapsack(values, lengths, budget)
    out = np.zeros(n, dtype=np.int8)
    for i in picks:
        out[bounds[i]:bounds[i + 1]] = 1
    return out
