import numpy as np
import pytest

from sbrbench.dataset import Event, preprocess, sessionize


def make_dataset(session_items, start_gap=3600, t0=0, preprocessed=True):
    """Build a SessionDataset from lists of item-id strings (or ints)."""
    events = []
    for i, items in enumerate(session_items):
        base = t0 + i * start_gap
        for j, item in enumerate(items):
            events.append(Event(f"s{i}", str(item), base + j))
    ds = sessionize(events)
    return preprocess(ds) if preprocessed else ds


def random_corpus(rng, n_sessions=20, n_items=10, max_len=8):
    """Random session lists with no consecutive duplicates, length >= 2."""
    sessions = []
    for _ in range(n_sessions):
        length = int(rng.integers(2, max_len + 1))
        items = [int(rng.integers(n_items))]
        while len(items) < length:
            nxt = int(rng.integers(n_items))
            if nxt != items[-1]:
                items.append(nxt)
        sessions.append(items)
    return sessions


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))
