"""Click-log ingestion, sessionization, and preprocessing.

The pipeline is: ``ingest_events`` -> ``sessionize`` -> ``preprocess``.
A finished :class:`SessionDataset` is immutable by convention and can be
shared freely between scoring workers.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

SECONDS_PER_DAY = 86400

CACHE_FORMAT = "sbr-ds/1"


class DatasetError(Exception):
    """Raised on unreadable input, bad schema, or excessive reject rates."""


@dataclass(frozen=True)
class Event:
    """One click: who (session or user key), what, when (epoch seconds)."""

    session_key: str
    item: str
    timestamp: int

    def __post_init__(self):
        if self.timestamp < 0:
            raise ValueError("negative timestamp")
        if not self.item:
            raise ValueError("empty item")


@dataclass(frozen=True)
class Session:
    id: int
    start_time: int
    items: tuple  # dense item indices, click order

    def __len__(self):
        return len(self.items)


@dataclass(frozen=True)
class SessionDataset:
    """A train or test collection of sessions over a dense item vocabulary.

    ``item_ids[i]`` is the original identifier of dense index ``i`` and
    ``item_index`` is the inverse mapping.  ``freq`` counts clicks per item
    within this dataset.  ``train_freq`` is only present on test sets that
    were re-encoded against a training vocabulary; it carries the training
    occurrence counts needed for frequency-bucketed splits.
    """

    sessions: tuple
    item_ids: tuple
    item_index: dict
    freq: np.ndarray
    role_tag: str = "train"
    train_freq: np.ndarray | None = None

    @property
    def n_items(self):
        return len(self.item_ids)

    @property
    def n_sessions(self):
        return len(self.sessions)

    @property
    def n_clicks(self):
        return sum(len(s) for s in self.sessions)

    def validate(self):
        n = self.n_items
        total = 0
        prev_start = None
        for s in self.sessions:
            for it in s.items:
                if not 0 <= it < n:
                    raise DatasetError(f"item index {it} outside vocabulary")
            total += len(s)
            if prev_start is not None and s.start_time < prev_start:
                raise DatasetError("sessions not sorted by start_time")
            prev_start = s.start_time
        if int(self.freq.sum()) != total:
            raise DatasetError("freq does not sum to total click count")
        return self


@dataclass(frozen=True)
class DatasetStats:
    n_items: int
    n_sessions: int
    n_clicks: int
    timespan_days: int
    avg_item_frequency: float
    avg_session_length: float

    def to_json(self):
        return json.dumps(self.__dict__, sort_keys=True)


@dataclass
class ColumnSchema:
    """Maps raw log columns to event fields, by header name or position."""

    session_col: str | int = "session_id"
    item_col: str | int = "item_id"
    time_col: str | int = "timestamp"
    delimiter: str = ","
    header: bool = True
    # 'seconds' for epoch timestamps, 'days' for day-granularity sources
    # (day d maps to midnight UTC, i.e. d * 86400 seconds).
    time_unit: str = "seconds"
    max_reject_rate: float = 0.01


def _parse_timestamp(raw, unit):
    value = int(float(raw))
    if unit == "days":
        value *= SECONDS_PER_DAY
    return value


def ingest_events(source, schema=None):
    """Read delimiter-separated click records into a list of Events.

    ``source`` is a file path or an iterable of text lines.  Invalid rows
    are counted and skipped; the whole read fails only when the reject
    rate exceeds ``schema.max_reject_rate``.

    Returns ``(events, n_rejected)``.
    """
    schema = schema or ColumnSchema()
    if isinstance(source, (str, bytes)):
        try:
            fh = open(source, "r", newline="")
        except OSError as exc:
            raise DatasetError(f"unreadable source: {exc}") from exc
    else:
        fh = io.StringIO("\n".join(source)) if isinstance(source, list) else source

    with fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        rows = iter(reader)
        positions = None
        if schema.header:
            try:
                head = next(rows)
            except StopIteration:
                raise DatasetError("empty source")
            positions = _resolve_columns(schema, head)
        else:
            positions = _resolve_columns(schema, None)

        events = []
        rejected = 0
        total = 0
        for row in rows:
            if not row:
                continue
            total += 1
            try:
                key = row[positions[0]].strip()
                item = row[positions[1]].strip()
                ts = _parse_timestamp(row[positions[2]], schema.time_unit)
                events.append(Event(key, item, ts))
            except (IndexError, ValueError):
                rejected += 1

    if total and rejected / total > schema.max_reject_rate:
        raise DatasetError(
            f"reject rate {rejected}/{total} exceeds {schema.max_reject_rate:.2%}"
        )
    return events, rejected


def _resolve_columns(schema, header_row):
    cols = (schema.session_col, schema.item_col, schema.time_col)
    positions = []
    for col in cols:
        if isinstance(col, int):
            positions.append(col)
        elif header_row is None:
            raise DatasetError(f"named column {col!r} requires a header row")
        else:
            try:
                positions.append(header_row.index(col))
            except ValueError:
                raise DatasetError(f"missing mapped column {col!r}")
    return positions


def sessionize(events, rule="by-key"):
    """Group events into sessions and intern items to dense indices.

    ``rule`` is ``by-key`` (group on the session key) or ``by-key-and-day``
    (group on user key and UTC day, for day-granularity logs).  Session ids
    are dense integers assigned by ascending (start_time, key).
    """
    if not events:
        raise DatasetError("no events to sessionize")
    if rule not in ("by-key", "by-key-and-day"):
        raise DatasetError(f"unknown sessionization rule {rule!r}")

    groups = {}
    for order, ev in enumerate(events):
        if rule == "by-key-and-day":
            gkey = (ev.session_key, ev.timestamp // SECONDS_PER_DAY)
        else:
            gkey = ev.session_key
        groups.setdefault(gkey, []).append((ev.timestamp, order, ev.item))

    raw_sessions = []
    for gkey, rows in groups.items():
        rows.sort(key=lambda r: (r[0], r[1]))  # stable on timestamp ties
        start = rows[0][0]
        raw_sessions.append((start, str(gkey), [r[2] for r in rows]))
    raw_sessions.sort(key=lambda s: (s[0], s[1]))

    item_index = {}
    item_ids = []
    sessions = []
    counts = []
    for sid, (start, _key, items) in enumerate(raw_sessions):
        encoded = []
        for item in items:
            idx = item_index.get(item)
            if idx is None:
                idx = len(item_ids)
                item_index[item] = idx
                item_ids.append(item)
                counts.append(0)
            counts[idx] += 1
            encoded.append(idx)
        sessions.append(Session(sid, start, tuple(encoded)))

    return SessionDataset(
        sessions=tuple(sessions),
        item_ids=tuple(item_ids),
        item_index=item_index,
        freq=np.asarray(counts, dtype=np.int64),
    )


def collapse_repeats(items):
    """Replace runs of consecutive equal items by a single click."""
    out = []
    for it in items:
        if not out or out[-1] != it:
            out.append(it)
    return out


def preprocess(ds):
    """Collapse consecutive duplicate clicks, then drop length-1 sessions.

    The vocabulary and frequency table are recomputed on the surviving
    clicks, so indices may be re-assigned.
    """
    kept = []
    for s in ds.sessions:
        items = collapse_repeats(s.items)
        if len(items) >= 2:
            kept.append((s.start_time, [ds.item_ids[i] for i in items]))
    return _rebuild(kept, ds.role_tag)


def _rebuild(raw_sessions, role_tag):
    """Re-intern (start_time, original-id list) pairs into a fresh dataset."""
    item_index = {}
    item_ids = []
    counts = []
    sessions = []
    for sid, (start, items) in enumerate(raw_sessions):
        encoded = []
        for item in items:
            idx = item_index.get(item)
            if idx is None:
                idx = len(item_ids)
                item_index[item] = idx
                item_ids.append(item)
                counts.append(0)
            counts[idx] += 1
            encoded.append(idx)
        sessions.append(Session(sid, start, tuple(encoded)))
    return SessionDataset(
        sessions=tuple(sessions),
        item_ids=tuple(item_ids),
        item_index=item_index,
        freq=np.asarray(counts, dtype=np.int64),
        role_tag=role_tag,
    )


def filter_test_items(train, test):
    """Drop test clicks on items unseen in training, then re-clean.

    The returned test set is re-encoded in the TRAIN vocabulary (so score
    vectors line up) and carries ``train_freq`` for frequency-bucket splits.
    """
    kept = []
    for s in test.sessions:
        items = []
        for i in s.items:
            idx = train.item_index.get(test.item_ids[i])
            # vocabulary membership alone is not enough: a shared vocabulary
            # can list items with zero training clicks
            if idx is not None and train.freq[idx] > 0:
                items.append(idx)
        items = collapse_repeats(items)
        if len(items) >= 2:
            kept.append(Session(len(kept), s.start_time, tuple(items)))
    freq = np.zeros(train.n_items, dtype=np.int64)
    for s in kept:
        for it in s.items:
            freq[it] += 1
    return SessionDataset(
        sessions=tuple(kept),
        item_ids=train.item_ids,
        item_index=train.item_index,
        freq=freq,
        role_tag="test",
        train_freq=train.freq.copy(),
    )


def compute_stats(ds):
    if not ds.sessions:
        raise DatasetError("empty dataset has no statistics")
    n_clicks = ds.n_clicks
    times = [s.start_time for s in ds.sessions]
    # distinct items actually clicked (the vocabulary may be a superset on
    # re-encoded test sets)
    used = set()
    for s in ds.sessions:
        used.update(s.items)
    n_items = len(used)
    timespan = max(1, math.ceil((max(times) - min(times)) / SECONDS_PER_DAY))
    return DatasetStats(
        n_items=n_items,
        n_sessions=ds.n_sessions,
        n_clicks=n_clicks,
        timespan_days=timespan,
        avg_item_frequency=n_clicks / n_items,
        avg_session_length=n_clicks / ds.n_sessions,
    )


def save_dataset(ds, path):
    """Write a version-tagged line-delimited cache of the dataset."""
    with open(path, "w") as fh:
        header = {
            "format": CACHE_FORMAT,
            "role_tag": ds.role_tag,
            "item_ids": list(ds.item_ids),
            "freq": ds.freq.tolist(),
            "train_freq": None if ds.train_freq is None else ds.train_freq.tolist(),
        }
        fh.write(json.dumps(header) + "\n")
        for s in ds.sessions:
            fh.write(json.dumps([s.id, s.start_time, list(s.items)]) + "\n")


def load_dataset(path):
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header.get("format") != CACHE_FORMAT:
            raise DatasetError(f"unsupported cache format {header.get('format')!r}")
        sessions = []
        for line in fh:
            sid, start, items = json.loads(line)
            sessions.append(Session(sid, start, tuple(items)))
    item_ids = tuple(header["item_ids"])
    train_freq = header["train_freq"]
    return SessionDataset(
        sessions=tuple(sessions),
        item_ids=item_ids,
        item_index={item: i for i, item in enumerate(item_ids)},
        freq=np.asarray(header["freq"], dtype=np.int64),
        role_tag=header["role_tag"],
        train_freq=None if train_freq is None else np.asarray(train_freq, dtype=np.int64),
    )


def content_hash(ds):
    """Stable hex digest of the dataset content, used in split manifests."""
    import hashlib

    h = hashlib.sha256()
    h.update(repr(ds.item_ids).encode())
    for s in ds.sessions:
        h.update(f"{s.start_time}:{s.items}".encode())
    return h.hexdigest()[:16]
