"""Top-K ranking over dense score vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Ranking:
    """Ordered top-K list: ``items[i]`` has score ``scores[i]``."""

    items: np.ndarray
    scores: np.ndarray

    def __len__(self):
        return len(self.items)

    def __post_init__(self):
        if len(self.items) != len(self.scores):
            raise ValueError("items/scores length mismatch")
        if len(self.scores) > 1 and np.any(np.diff(self.scores) > 0):
            raise ValueError("scores must be non-increasing")
        if len(np.unique(self.items)) != len(self.items):
            raise ValueError("duplicate items in ranking")

    def truncated(self, k):
        return Ranking(self.items[:k], self.scores[:k])

    def position_of(self, item):
        """1-based rank of ``item``, or 0 if absent."""
        hits = np.nonzero(self.items == item)[0]
        return int(hits[0]) + 1 if len(hits) else 0


def rank(scores, k, freq=None, exclude=()):
    """Top-``k`` items by score.

    Ties break by higher training frequency, then lower item index;
    excluded items never appear.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise ValueError("non-finite scores")
    n = len(scores)
    if freq is None:
        freq = np.zeros(n, dtype=np.int64)
    mask = np.ones(n, dtype=bool)
    for item in exclude:
        mask[item] = False
    idx = np.nonzero(mask)[0]
    # lexsort: last key is primary; stable, so remaining ties keep index order
    order = np.lexsort((-np.asarray(freq)[idx], -scores[idx]))
    top = idx[order[:k]]
    return Ranking(items=top, scores=scores[top])
