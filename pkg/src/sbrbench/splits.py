"""Train/test split families for the benchmark experiments.

Every generator is a pure function of (dataset, spec) and emits a manifest
describing exactly what was produced, so runs are reproducible and
cacheable.  Boundary instants use half-open [start, end) intervals with
the test side owning the boundary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import (
    SECONDS_PER_DAY,
    Session,
    SessionDataset,
    collapse_repeats,
    content_hash,
)

SPLIT_KINDS = (
    "train_session_length",
    "test_session_length",
    "test_item_frequency",
    "train_recency",
    "train_fraction",
    "train_timespan",
    "temporal_holdout",
)


class SplitError(Exception):
    pass


@dataclass(frozen=True)
class SplitSpec:
    kind: str
    # length bounds [lo, hi) for the session-length kinds
    lo: int | None = None
    hi: int | None = None
    # item-frequency bound: keep items with train freq < max_freq, or
    # >= min_freq for the top bucket (exactly one of the two is set)
    max_freq: int | None = None
    min_freq: int | None = None
    # recency: 'recent' | 'old' | 'mixed', with the period length in days
    recency: str | None = None
    period_days: int = 5
    # train_fraction keeps floor(n / denominator) sessions
    denominator: int | None = None
    # train_timespan keeps the last span_days of the training period
    span_days: int | None = None
    # temporal_holdout reserves the final holdout_days as the test side
    holdout_days: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SPLIT_KINDS:
            raise SplitError(f"unknown split kind {self.kind!r}")
        if self.lo is not None and self.hi is not None and not self.lo < self.hi:
            raise SplitError("length bounds must satisfy lo < hi")
        if self.denominator is not None and self.denominator < 1:
            raise SplitError("fraction denominator must be >= 1")
        if self.span_days is not None and self.span_days < 1:
            raise SplitError("timespan must be >= 1 day")

    def to_dict(self):
        d = {k: v for k, v in self.__dict__.items() if v is not None}
        return d


@dataclass(frozen=True)
class SplitResult:
    derived: SessionDataset
    manifest: dict

    def manifest_json(self):
        return json.dumps(self.manifest, sort_keys=True)


def _dataset_from_sessions(ds, sessions, role_tag=None):
    """Re-number the surviving sessions and recompute freq.

    The parent vocabulary is kept as-is (indices stay stable), so every
    split derived from one base dataset lives in the same index space and
    score vectors always line up.
    """
    role = role_tag or ds.role_tag
    renumbered = [
        Session(i, s.start_time, tuple(s.items)) for i, s in enumerate(sessions)
    ]
    freq = np.zeros(ds.n_items, dtype=np.int64)
    for s in renumbered:
        for it in s.items:
            freq[it] += 1
    return SessionDataset(
        sessions=tuple(renumbered),
        item_ids=ds.item_ids,
        item_index=ds.item_index,
        freq=freq,
        role_tag=role,
        train_freq=None if ds.train_freq is None else ds.train_freq.copy(),
    )


def _manifest(spec, source, derived):
    n_clicks = derived.n_clicks
    used = set()
    for s in derived.sessions:
        used.update(s.items)
    return {
        "spec": spec.to_dict(),
        "source_hash": content_hash(source),
        "derived_hash": content_hash(derived),
        "n_sessions": derived.n_sessions,
        "n_clicks": n_clicks,
        "avg_session_length": n_clicks / derived.n_sessions if derived.n_sessions else 0.0,
        "avg_item_frequency": n_clicks / len(used) if used else 0.0,
    }


def temporal_holdout(ds, n_days):
    """Last-n-days sessions become the test side, the rest train.

    The cutoff is midnight UTC ``n_days`` before the day containing the
    newest session start; a session starting exactly at the cutoff goes to
    test.  Returns raw (train, test); callers normally follow up with
    :func:`sbrbench.dataset.filter_test_items`.
    """
    if not ds.sessions:
        raise SplitError("empty dataset")
    last = max(s.start_time for s in ds.sessions)
    first = min(s.start_time for s in ds.sessions)
    cutoff = (last // SECONDS_PER_DAY - (n_days - 1)) * SECONDS_PER_DAY
    if cutoff <= first:
        raise SplitError(f"dataset does not span more than {n_days} days")
    train = [s for s in ds.sessions if s.start_time < cutoff]
    test = [s for s in ds.sessions if s.start_time >= cutoff]
    return (
        _dataset_from_sessions(ds, train, role_tag="train"),
        _dataset_from_sessions(ds, test, role_tag="test"),
    )


def generate_split(ds, spec, train=None):
    """Apply one SplitSpec to a preprocessed dataset.

    ``train`` is only consulted for the test_item_frequency kind when the
    dataset does not already carry training frequencies.
    """
    kind = spec.kind
    if kind == "temporal_holdout":
        raise SplitError("use temporal_holdout() for the base train/test pair")

    if kind in ("train_session_length", "test_session_length"):
        lo = spec.lo if spec.lo is not None else 0
        hi = spec.hi if spec.hi is not None else float("inf")
        kept = [s for s in ds.sessions if lo <= len(s) < hi]
        derived = _dataset_from_sessions(ds, kept)

    elif kind == "test_item_frequency":
        freq = ds.train_freq
        if freq is None and train is not None:
            freq = train.freq
        if freq is None:
            raise SplitError("test_item_frequency needs training frequencies")
        if (spec.max_freq is None) == (spec.min_freq is None):
            raise SplitError("set exactly one of max_freq / min_freq")
        kept = []
        for s in ds.sessions:
            if spec.max_freq is not None:
                items = [i for i in s.items if freq[i] < spec.max_freq]
            else:
                items = [i for i in s.items if freq[i] >= spec.min_freq]
            items = collapse_repeats(items)
            if len(items) >= 2:
                kept.append(Session(len(kept), s.start_time, tuple(items)))
        derived = _dataset_from_sessions(ds, kept, role_tag="test")

    elif kind == "train_recency":
        derived = _dataset_from_sessions(ds, _recency_sessions(ds, spec))

    elif kind == "train_fraction":
        if spec.denominator is None:
            raise SplitError("train_fraction needs a denominator")
        n_keep = len(ds.sessions) // spec.denominator
        rng = np.random.Generator(np.random.PCG64(spec.seed))
        chosen = rng.choice(len(ds.sessions), size=n_keep, replace=False)
        chosen.sort()
        kept = [ds.sessions[i] for i in chosen]
        derived = _dataset_from_sessions(ds, kept)

    elif kind == "train_timespan":
        if spec.span_days is None:
            raise SplitError("train_timespan needs span_days")
        last = max(s.start_time for s in ds.sessions)
        cutoff = (last // SECONDS_PER_DAY - (spec.span_days - 1)) * SECONDS_PER_DAY
        kept = [s for s in ds.sessions if s.start_time >= cutoff]
        derived = _dataset_from_sessions(ds, kept)

    else:  # pragma: no cover - guarded by SplitSpec validation
        raise SplitError(f"unknown split kind {kind!r}")

    if not derived.sessions:
        raise SplitError(f"split {spec.to_dict()} produced an empty dataset")
    derived.validate()
    return SplitResult(derived=derived, manifest=_manifest(spec, ds, derived))


def _recency_sessions(ds, spec):
    """Recent / old / mixed period selection over the training timespan."""
    if spec.recency not in ("recent", "old", "mixed"):
        raise SplitError(f"unknown recency label {spec.recency!r}")
    period = spec.period_days * SECONDS_PER_DAY
    end = max(s.start_time for s in ds.sessions) + 1  # [start, end)
    start = min(s.start_time for s in ds.sessions)
    if end - start < 2 * period:
        raise SplitError("dataset shorter than two recency periods")

    def between(lo, hi):
        return [s for s in ds.sessions if lo <= s.start_time < hi]

    if spec.recency == "recent":
        return between(end - period, end)
    if spec.recency == "old":
        return between(start, start + period)
    # mixed: newer half of the recent period plus older half of the old one
    half = period // 2
    mixed = between(start, start + half) + between(end - half, end)
    mixed.sort(key=lambda s: s.start_time)
    return mixed


def rq1_train_length_specs(bounds=((2, 5), (5, 10), (10, None))):
    """The three standard training-session-length splits."""
    return [
        SplitSpec(kind="train_session_length", lo=lo, hi=hi) for lo, hi in bounds
    ]
