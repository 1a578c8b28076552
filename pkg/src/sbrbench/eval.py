"""Prefix-expansion evaluation loop, accuracy/coverage/popularity metrics,
and resource measurement.

Every test session of length L yields L-1 prediction events: the prefix
ending at position p with the click at p+1 as target.  All metrics are
averaged over prediction events.
"""

from __future__ import annotations

import json
import resource
import time
from dataclasses import dataclass, field

import numpy as np


class EvalError(Exception):
    pass


def expand_prefixes(ds):
    """Yield (prefix, target) for every prediction event in the dataset."""
    for s in ds.sessions:
        items = s.items
        for p in range(1, len(items)):
            yield items[:p], items[p]


def score_event(ranking, target, k):
    """(hit, reciprocal rank) of the target within the top-k of a ranking."""
    pos = ranking.truncated(k).position_of(target)
    if pos == 0:
        return 0, 0.0
    return 1, 1.0 / pos


@dataclass
class MetricReport:
    model: str
    cutoffs: tuple
    hr: dict
    mrr: dict
    cov: dict
    pop: dict
    n_events: int
    split_manifest: str | None = None

    def validate(self):
        for k in self.cutoffs:
            if not 0.0 <= self.mrr[k] <= self.hr[k] <= 1.0:
                raise EvalError(f"metric identity violated at cutoff {k}")
            if not 0.0 <= self.cov[k] <= 1.0 or not 0.0 <= self.pop[k] <= 1.0:
                raise EvalError(f"cov/pop out of range at cutoff {k}")
        return self

    def to_json(self):
        rec = {
            "model": self.model,
            "n_events": self.n_events,
            "split_manifest": self.split_manifest,
        }
        for k in self.cutoffs:
            rec[f"hr@{k}"] = self.hr[k]
            rec[f"mrr@{k}"] = self.mrr[k]
            rec[f"cov@{k}"] = self.cov[k]
            rec[f"pop@{k}"] = self.pop[k]
        return json.dumps(rec, sort_keys=True)


def evaluate(
    predictor,
    test,
    train_freq=None,
    cutoffs=(1, 3, 5, 10, 20),
    exclude_current=False,
    latencies=None,
):
    """Run the prefix-expansion loop and compute HR/MRR/COV/POP per cutoff.

    ``train_freq`` defaults to the frequencies carried by the test set
    (or the predictor's).  ``exclude_current`` removes the currently viewed
    (last prefix) item from every ranking.  ``latencies``, if a list, is
    filled with per-event prediction seconds.
    """
    cutoffs = tuple(sorted(cutoffs))
    if not test.sessions:
        raise EvalError("empty test set")
    if train_freq is None:
        train_freq = test.train_freq
    if train_freq is None:
        train_freq = getattr(predictor, "train_freq_", None)
    if train_freq is None:
        raise EvalError("no training frequencies available")
    train_freq = np.asarray(train_freq)
    max_freq = float(train_freq.max())
    n_train_items = int(np.count_nonzero(train_freq))
    max_k = cutoffs[-1]

    hits = {k: 0 for k in cutoffs}
    rr = {k: 0.0 for k in cutoffs}
    seen_items = {k: set() for k in cutoffs}
    pop_sum = {k: 0.0 for k in cutoffs}
    n_events = 0

    for prefix, target in expand_prefixes(test):
        exclude = (prefix[-1],) if exclude_current else ()
        t0 = time.monotonic()
        ranking = predictor.predict(prefix, max_k, exclude=exclude)
        if latencies is not None:
            latencies.append(time.monotonic() - t0)
        n_events += 1
        for k in cutoffs:
            hit, rec = score_event(ranking, target, k)
            hits[k] += hit
            rr[k] += rec
            top = ranking.items[:k]
            seen_items[k].update(int(i) for i in top)
            if len(top) and max_freq > 0:
                pop_sum[k] += float(train_freq[top].mean()) / max_freq

    return MetricReport(
        model=getattr(predictor, "name", type(predictor).__name__),
        cutoffs=cutoffs,
        hr={k: hits[k] / n_events for k in cutoffs},
        mrr={k: rr[k] / n_events for k in cutoffs},
        cov={k: len(seen_items[k]) / n_train_items for k in cutoffs},
        pop={k: pop_sum[k] / n_events for k in cutoffs},
        n_events=n_events,
    ).validate()


@dataclass
class ResourceReport:
    wall_seconds: float
    peak_rss_bytes: int | None
    mean_latency: float | None = None
    p95_latency: float | None = None

    def to_json(self):
        return json.dumps(self.__dict__, sort_keys=True)


def _peak_rss():
    try:
        rss = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    except (ValueError, OSError):  # pragma: no cover
        return None
    # ru_maxrss is KiB on Linux, bytes on macOS
    import sys

    return rss if sys.platform == "darwin" else rss * 1024


def measure_resources(task, latencies=None):
    """Run ``task()`` and report wall time, peak RSS, and latency stats.

    Peak memory is process-lifetime resident size (approximate: it never
    decreases, so it is an upper bound for the task itself).
    """
    start = time.monotonic()
    task()
    wall = time.monotonic() - start
    mean_lat = p95 = None
    if latencies:
        arr = np.asarray(latencies)
        mean_lat = float(arr.mean())
        p95 = float(np.percentile(arr, 95))
    return ResourceReport(
        wall_seconds=wall,
        peak_rss_bytes=_peak_rss(),
        mean_latency=mean_lat,
        p95_latency=p95,
    )
