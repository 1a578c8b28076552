"""Instance-based predictors: S-POP, association rules, sequential rules,
and the vector-multiplication session KNN.

All models share the same contract: ``fit(train)`` builds an immutable
artifact, ``score(prefix)`` returns a dense float vector over the training
vocabulary, and ``predict(prefix, k)`` ranks it.  Scoring is pure and safe
to run from many workers at once.
"""

from __future__ import annotations

import math

import numpy as np

from . import kernels
from .ranking import Ranking, rank

WEIGHT_FUNCTIONS = ("linear", "same", "div", "log", "quadratic")


def position_weight(name, pos, length):
    """Weight of (1-based) position ``pos`` in a session of ``length`` clicks.

    Later positions always weigh at least as much as earlier ones.
    """
    if name == "same":
        return 1.0
    if name == "div":
        return pos / length
    if name == "linear":
        return max(0.0, 1.0 - 0.1 * (length - pos))
    if name == "log":
        return 1.0 / (math.log10(length - pos + 1.7) + 1.0)
    if name == "quadratic":
        return (pos / length) ** 2
    raise ValueError(f"unknown weighting function {name!r}")


class NotFittedError(Exception):
    pass


class Predictor:
    """Shared fit/score/predict surface of all native models."""

    name = "base"

    def fit(self, train):
        raise NotImplementedError

    def score(self, prefix):
        raise NotImplementedError

    def predict(self, prefix, k, exclude=()):
        return rank(self.score(prefix), k, freq=self._freq(), exclude=exclude)

    def _freq(self):
        freq = getattr(self, "train_freq_", None)
        if freq is None:
            raise NotFittedError(f"{self.name} is not fitted")
        return freq


class SPop(Predictor):
    """Within-session popularity with a global-popularity fallback.

    Scoring is restricted to the ``top_n`` globally most popular items.
    With ``fallback`` enabled, slots beyond the in-session items are filled
    by global popularity: each top-``top_n`` item gets a strictly sub-unit
    popularity bonus, so session counts (integers >= 1) always dominate.
    """

    name = "spop"

    def __init__(self, top_n=100, fallback=True):
        self.top_n = top_n
        self.fallback = fallback

    def fit(self, train):
        self.train_freq_ = train.freq.copy()
        order = np.lexsort((np.arange(len(train.freq)), -train.freq))
        top = order[: self.top_n]
        self.top_mask_ = np.zeros(len(train.freq), dtype=bool)
        self.top_mask_[top[train.freq[top] > 0]] = True
        denom = float(train.freq.max()) + 1.0
        self.fallback_scores_ = np.where(self.top_mask_, train.freq / denom, 0.0)
        return self

    def score(self, prefix):
        if len(prefix) == 0:
            raise ValueError("empty prefix")
        freq = self._freq()
        scores = np.zeros(len(freq), dtype=np.float64)
        for item in prefix:
            if self.top_mask_[item]:
                scores[item] += 1.0
        if self.fallback:
            scores += self.fallback_scores_
        return scores


class _RuleModel(Predictor):
    """Shared storage for the two rule miners: CSR (antecedent -> weights)."""

    pruning = 0

    def _finish(self, train, table):
        n = train.n_items
        if self.pruning:
            table = {
                a: {b: w for b, w in row.items() if w > self.pruning}
                for a, row in table.items()
            }
        indptr = np.zeros(n + 1, dtype=np.int64)
        cols = []
        weights = []
        for a in range(n):
            row = table.get(a, {})
            for b in sorted(row):
                cols.append(b)
                weights.append(row[b])
            indptr[a + 1] = len(cols)
        self.indptr_ = indptr
        self.cols_ = np.asarray(cols, dtype=np.int64)
        self.weights_ = np.asarray(weights, dtype=np.float64)
        self.train_freq_ = train.freq.copy()
        return self

    def score(self, prefix):
        if len(prefix) == 0:
            raise ValueError("empty prefix")
        freq = self._freq()
        scores = np.zeros(len(freq), dtype=np.float64)
        last = prefix[-1]
        lo, hi = self.indptr_[last], self.indptr_[last + 1]
        scores[self.cols_[lo:hi]] = self.weights_[lo:hi]
        return scores


class AssociationRules(_RuleModel):
    """Size-2 co-occurrence rules: every ordered position pair within a
    session adds one count, self-pairs excluded."""

    name = "ar"

    def __init__(self, pruning=0):
        self.pruning = pruning

    def fit(self, train):
        table = {}
        for s in train.sessions:
            items = s.items
            for j, a in enumerate(items):
                row = table.setdefault(a, {})
                for k, b in enumerate(items):
                    if j != k:
                        row[b] = row.get(b, 0) + 1
        return self._finish(train, table)


class SequentialRules(_RuleModel):
    """Directed rules weighted by linear click distance:
    a click at position k contributes 1 - 0.1*(j - k) to the rule
    (item at k -> item at j) for every later position j within distance 10."""

    name = "sr"

    def __init__(self, pruning=0):
        self.pruning = pruning

    def fit(self, train):
        table = {}
        for s in train.sessions:
            items = s.items
            for j in range(1, len(items)):
                for k in range(j):
                    if j - k >= 10:
                        continue
                    w = 1.0 - 0.1 * (j - k)
                    row = table.setdefault(items[k], {})
                    row[items[j]] = row.get(items[j], 0.0) + w
        return self._finish(train, table)


class VsKnn(Predictor):
    """Session KNN over a position-weighted prefix vector.

    Neighbors are training sessions sharing at least one prefix item,
    sampled down to ``sample_size`` (seeded random or most recent), of
    which the ``k`` most similar are kept.  Each kept neighbor adds
    sim * weighting_score(item position in the neighbor) to the items it
    contains.
    """

    name = "vsknn"

    def __init__(
        self,
        k=100,
        sample_size=1000,
        sampling="recent",
        similarity="cosine",
        weighting="linear",
        weighting_score="linear",
        seed=0,
    ):
        if sampling not in ("random", "recent"):
            raise ValueError(f"unknown sampling {sampling!r}")
        if similarity not in ("jaccard", "cosine", "binary", "tanimoto"):
            raise ValueError(f"unknown similarity {similarity!r}")
        self.k = k
        self.sample_size = sample_size
        self.sampling = sampling
        self.similarity = similarity
        self.weighting = weighting
        self.weighting_score = weighting_score
        self.seed = seed

    def fit(self, train):
        n_items = train.n_items
        n_sessions = train.n_sessions
        self.train_freq_ = train.freq.copy()
        self.start_times_ = np.asarray(
            [s.start_time for s in train.sessions], dtype=np.int64
        )

        # per-session distinct items with their most recent 1-based position,
        # plus the precomputed weighting_score factor for that position
        sess_items = []
        sess_weights = []
        indptr = np.zeros(n_sessions + 1, dtype=np.int64)
        inverted = [[] for _ in range(n_items)]
        supports = np.zeros(n_sessions, dtype=np.int64)
        for sid, s in enumerate(train.sessions):
            length = len(s.items)
            latest = {}
            for pos, item in enumerate(s.items, start=1):
                latest[item] = pos
            for item in sorted(latest):
                sess_items.append(item)
                sess_weights.append(
                    position_weight(self.weighting_score, latest[item], length)
                )
                inverted[item].append(sid)
            supports[sid] = len(latest)
            indptr[sid + 1] = len(sess_items)
        self.sess_indptr_ = indptr
        self.sess_items_ = np.asarray(sess_items, dtype=np.int64)
        self.sess_weights_ = np.asarray(sess_weights, dtype=np.float64)
        self.supports_ = supports

        inv_indptr = np.zeros(n_items + 1, dtype=np.int64)
        inv_lists = []
        for item in range(n_items):
            inv_lists.extend(inverted[item])
            inv_indptr[item + 1] = len(inv_lists)
        self.inv_indptr_ = inv_indptr
        self.inv_lists_ = np.asarray(inv_lists, dtype=np.int64)
        self.n_sessions_ = n_sessions
        self.n_items_ = n_items
        return self

    def _prefix_vector(self, prefix):
        """Distinct prefix items with weights at their most recent position."""
        length = len(prefix)
        latest = {}
        for pos, item in enumerate(prefix, start=1):
            latest[item] = pos
        items = np.asarray(sorted(latest), dtype=np.int64)
        weights = np.asarray(
            [position_weight(self.weighting, latest[i], length) for i in items],
            dtype=np.float64,
        )
        return items, weights

    def score(self, prefix):
        if not hasattr(self, "inv_indptr_"):
            raise NotFittedError("vsknn is not fitted")
        if len(prefix) == 0:
            raise ValueError("empty prefix")
        items, weights = self._prefix_vector(prefix)
        in_vocab = items < self.n_items_
        items, weights = items[in_vocab], weights[in_vocab]
        scores = np.zeros(self.n_items_, dtype=np.float64)
        if len(items) == 0:
            return scores

        dots = kernels.accumulate_index_overlap(
            self.inv_indptr_, self.inv_lists_, items, weights, self.n_sessions_
        )
        inter = kernels.accumulate_index_overlap(
            self.inv_indptr_,
            self.inv_lists_,
            items,
            np.ones(len(items), dtype=np.float64),
            self.n_sessions_,
        )
        candidates = np.nonzero(inter)[0]
        if len(candidates) == 0:
            return scores
        candidates = self._sample(candidates)

        sims = self._similarity(
            dots[candidates], inter[candidates], self.supports_[candidates], weights
        )
        # keep the k most similar; ties by most recent, then lowest id
        order = np.lexsort(
            (candidates, -self.start_times_[candidates], -sims)
        )[: self.k]
        kept = candidates[order]
        kept_sims = sims[order]
        positive = kept_sims > 0
        kept, kept_sims = kept[positive], kept_sims[positive]
        if len(kept) == 0:
            return scores
        return kernels.accumulate_neighbor_scores(
            kept,
            kept_sims,
            self.sess_indptr_,
            self.sess_items_,
            self.sess_weights_,
            self.n_items_,
        )

    def _sample(self, candidates):
        if len(candidates) <= self.sample_size:
            return candidates
        if self.sampling == "recent":
            order = np.lexsort((candidates, -self.start_times_[candidates]))
            return np.sort(candidates[order[: self.sample_size]])
        rng = np.random.Generator(np.random.PCG64(self.seed))
        chosen = rng.choice(len(candidates), size=self.sample_size, replace=False)
        return np.sort(candidates[chosen])

    def _similarity(self, dots, inter, supports, prefix_weights):
        if self.similarity == "binary":
            return inter.astype(np.float64)
        if self.similarity == "jaccard":
            union = len(prefix_weights) + supports - inter
            return inter / union
        a_sq = float(np.dot(prefix_weights, prefix_weights))
        if self.similarity == "cosine":
            return dots / (math.sqrt(a_sq) * np.sqrt(supports))
        # tanimoto on the weighted prefix vector and binary neighbor vector
        return dots / (a_sq + supports - dots)
