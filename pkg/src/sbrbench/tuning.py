"""Random hyperparameter search with validation-based selection.

Parameter spaces follow the benchmark's published ranges: linear ranges
with a fixed step, log-scale sets (powers of a base), or categorical
lists.  Trial seeds derive from (master seed, trial index), so trials are
reproducible and independent.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np

from .baselines import WEIGHT_FUNCTIONS


class TuningError(Exception):
    pass


@dataclass(frozen=True)
class LinearRange:
    lo: float
    hi: float
    step: float

    def values(self):
        n = int(round((self.hi - self.lo) / self.step)) + 1
        vals = [self.lo + i * self.step for i in range(n)]
        if isinstance(self.lo, int) and isinstance(self.step, int):
            vals = [int(v) for v in vals]
        else:
            vals = [round(v, 10) for v in vals]
        return vals


@dataclass(frozen=True)
class LogScale:
    base: float
    exponents: tuple

    def values(self):
        return [self.base**e for e in self.exponents]


@dataclass(frozen=True)
class Categorical:
    choices: tuple

    def values(self):
        return list(self.choices)


ParamSpace = dict  # parameter name -> domain


def sample_config(space, rng):
    """One independent uniform draw per parameter over its discrete domain."""
    config = {}
    for name, domain in space.items():
        values = domain.values()
        if not values:
            raise TuningError(f"empty domain for {name!r}")
        config[name] = values[int(rng.integers(len(values)))]
    return config


def space_for(algorithm):
    """The tuned parameter space of a native algorithm, by name."""
    spaces = {
        "spop": {"top_n": LinearRange(10, 1000, 10)},
        "ar": {"pruning": LinearRange(0, 10, 1)},
        "sr": {
            "pruning": LinearRange(0, 10, 1),
            "weighting": Categorical(WEIGHT_FUNCTIONS),
        },
        "vsknn": {
            "k": LinearRange(50, 500, 10),
            "sample_size": LinearRange(100, 10000, 100),
            "sampling": Categorical(("random", "recent")),
            "similarity": Categorical(("jaccard", "cosine", "binary", "tanimoto")),
            "weighting": Categorical(WEIGHT_FUNCTIONS),
            "weighting_score": Categorical(WEIGHT_FUNCTIONS),
        },
        "smf": {
            "lr": LogScale(10.0, (-3, -2, -1)),
            "factors": LinearRange(50, 200, 10),
            "negatives": LinearRange(100, 4000, 100),
            "dropout": LinearRange(0.1, 0.5, 0.1),
        },
        "item2vec": {
            "start_lr": LinearRange(0.01, 0.05, 0.01),
            "final_lr": LogScale(10.0, (-5, -4, -3)),
            "window": LinearRange(3, 9, 1),
            "dim": LogScale(2, (5, 6, 7, 8, 9)),
            "negatives": LinearRange(10, 100, 10),
        },
    }
    if algorithm not in spaces:
        raise TuningError(f"no parameter space for {algorithm!r}")
    return spaces[algorithm]


@dataclass
class TrialRecord:
    index: int
    config: dict
    hr20: float
    seed: int
    wall_seconds: float
    error: str | None = None

    def to_json(self):
        return json.dumps(
            {
                "index": self.index,
                "config": self.config,
                "hr20": self.hr20,
                "seed": self.seed,
                "wall_seconds": self.wall_seconds,
                "error": self.error,
            },
            sort_keys=True,
        )


def make_validation_split(train):
    """Temporal 90/10: the newest 10% of sessions become the validation set."""
    from .splits import _dataset_from_sessions

    n = len(train.sessions)
    if n < 10:
        raise TuningError("training set too small for a validation split")
    n_val = max(1, n // 10)
    ordered = sorted(train.sessions, key=lambda s: (s.start_time, s.id))
    fit = _dataset_from_sessions(train, ordered[: n - n_val], role_tag="train")
    val = _dataset_from_sessions(train, ordered[n - n_val :], role_tag="test")
    return fit.validate(), val.validate()


def random_search(factory, space, train, validation, n_trials=20, seed=0):
    """Fit/evaluate ``n_trials`` sampled configs; return (best, records).

    ``factory(config)`` builds an unfitted predictor.  The winner is the
    trial with the highest validation HR@20; ties go to the earlier trial.
    """
    from .eval import evaluate

    records = []
    best = None
    best_hr = -np.inf
    for trial in range(n_trials):
        trial_seed = seed * 100003 + trial
        rng = np.random.Generator(np.random.PCG64(trial_seed))
        config = sample_config(space, rng)
        t0 = time.monotonic()
        try:
            model = factory(config)
            model.fit(train)
            report = evaluate(
                model, validation, train_freq=train.freq, cutoffs=(20,)
            )
            hr20 = report.hr[20]
            record = TrialRecord(
                trial, config, hr20, trial_seed, time.monotonic() - t0
            )
            if hr20 > best_hr:
                best_hr = hr20
                best = record
        except Exception as exc:  # keep searching; report at the end
            record = TrialRecord(
                trial, config, 0.0, trial_seed, time.monotonic() - t0, error=str(exc)
            )
        records.append(record)
    if best is None:
        details = "; ".join(f"trial {r.index}: {r.error}" for r in records)
        raise TuningError(f"all trials failed: {details}")
    return best.config, records
