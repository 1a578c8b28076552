import subprocess
import sys

import numpy as np
import pytest

from sbrbench.kernels import _pure

try:
    from sbrbench.kernels import _speedups
except ImportError:  # pragma: no cover
    _speedups = None

needs_compiled = pytest.mark.skipif(
    _speedups is None, reason="compiled kernels unavailable"
)


def random_inverted_index(rng, n_items, n_sessions):
    """CSR inverted index plus the matching per-session item lists."""
    sessions = []
    for _ in range(n_sessions):
        size = int(rng.integers(1, n_items + 1))
        sessions.append(np.sort(rng.choice(n_items, size=size, replace=False)))
    postings = [[] for _ in range(n_items)]
    for sid, items in enumerate(sessions):
        for item in items:
            postings[item].append(sid)
    indptr = np.zeros(n_items + 1, dtype=np.int64)
    flat = []
    for item in range(n_items):
        indptr[item + 1] = indptr[item] + len(postings[item])
        flat.extend(postings[item])
    return indptr, np.asarray(flat, dtype=np.int64), sessions


class TestPureOracle:
    """The pure kernels against direct loop evaluation."""

    def test_index_overlap_brute_force(self, rng):
        for _ in range(20):
            n_items = int(rng.integers(3, 10))
            n_sessions = int(rng.integers(2, 12))
            indptr, flat, sessions = random_inverted_index(rng, n_items, n_sessions)
            size = int(rng.integers(1, n_items + 1))
            prefix = rng.choice(n_items, size=size, replace=False).astype(np.int64)
            weights = rng.random(len(prefix))
            got = _pure.accumulate_index_overlap(
                indptr, flat, prefix, weights, n_sessions
            )
            expected = np.zeros(n_sessions)
            for sid, items in enumerate(sessions):
                for item, w in zip(prefix, weights):
                    if item in items:
                        expected[sid] += w
            np.testing.assert_allclose(got, expected, atol=1e-12)

    def test_neighbor_scores_brute_force(self, rng):
        for _ in range(20):
            n_items = int(rng.integers(3, 10))
            n_sessions = int(rng.integers(2, 10))
            _, _, sessions = random_inverted_index(rng, n_items, n_sessions)
            item_indptr = np.zeros(n_sessions + 1, dtype=np.int64)
            lists = []
            weights = []
            for sid, items in enumerate(sessions):
                item_indptr[sid + 1] = item_indptr[sid] + len(items)
                lists.extend(items)
                weights.extend(rng.random(len(items)))
            lists = np.asarray(lists, dtype=np.int64)
            weights = np.asarray(weights)
            n_kept = int(rng.integers(1, n_sessions + 1))
            kept = rng.choice(n_sessions, size=n_kept, replace=False).astype(np.int64)
            sims = rng.random(n_kept)
            got = _pure.accumulate_neighbor_scores(
                kept, sims, item_indptr, lists, weights, n_items
            )
            expected = np.zeros(n_items)
            for sid, sim in zip(kept, sims):
                lo, hi = item_indptr[sid], item_indptr[sid + 1]
                for item, w in zip(lists[lo:hi], weights[lo:hi]):
                    expected[item] += sim * w
            np.testing.assert_allclose(got, expected, atol=1e-12)


@needs_compiled
class TestBackendEquivalence:
    """The compiled kernels must match the pure fallback bit for bit."""

    def test_index_overlap(self, rng):
        for _ in range(30):
            n_items = int(rng.integers(3, 12))
            n_sessions = int(rng.integers(2, 15))
            indptr, flat, _ = random_inverted_index(rng, n_items, n_sessions)
            size = int(rng.integers(1, n_items + 1))
            prefix = rng.choice(n_items, size=size, replace=False).astype(np.int64)
            weights = rng.random(len(prefix))
            a = _pure.accumulate_index_overlap(indptr, flat, prefix, weights, n_sessions)
            b = _speedups.accumulate_index_overlap(
                indptr, flat, prefix, weights, n_sessions
            )
            np.testing.assert_array_equal(a, b)

    def test_neighbor_scores(self, rng):
        for _ in range(30):
            n_items = int(rng.integers(3, 12))
            n_sessions = int(rng.integers(2, 12))
            _, _, sessions = random_inverted_index(rng, n_items, n_sessions)
            item_indptr = np.zeros(n_sessions + 1, dtype=np.int64)
            lists, weights = [], []
            for sid, items in enumerate(sessions):
                item_indptr[sid + 1] = item_indptr[sid] + len(items)
                lists.extend(items)
                weights.extend(rng.random(len(items)))
            lists = np.asarray(lists, dtype=np.int64)
            weights = np.asarray(weights)
            n_kept = int(rng.integers(1, n_sessions + 1))
            kept = rng.choice(n_sessions, size=n_kept, replace=False).astype(np.int64)
            sims = rng.random(n_kept)
            a = _pure.accumulate_neighbor_scores(
                kept, sims, item_indptr, lists, weights, n_items
            )
            b = _speedups.accumulate_neighbor_scores(
                kept, sims, item_indptr, lists, weights, n_items
            )
            np.testing.assert_array_equal(a, b)

    def test_sgns_update(self, rng):
        for _ in range(30):
            n, dim = int(rng.integers(4, 10)), int(rng.integers(2, 8))
            w_in = rng.normal(size=(n, dim))
            w_out = rng.normal(size=(n, dim))
            center = int(rng.integers(n))
            n_targets = int(rng.integers(1, min(4, n) + 1))
            targets = rng.choice(n, size=n_targets, replace=False).astype(np.int64)
            labels = np.zeros(n_targets)
            labels[0] = 1.0
            lr = float(rng.uniform(0.001, 0.1))

            in_a, out_a = w_in.copy(), w_out.copy()
            in_b, out_b = w_in.copy(), w_out.copy()
            loss_a = _pure.sgns_update(in_a, out_a, center, targets, labels, lr)
            loss_b = _speedups.sgns_update(in_b, out_b, center, targets, labels, lr)
            np.testing.assert_allclose(in_a, in_b, atol=1e-15)
            np.testing.assert_allclose(out_a, out_b, atol=1e-15)
            assert loss_a == pytest.approx(loss_b, abs=1e-12)


class TestBackendSelection:
    def test_env_forces_pure(self):
        code = (
            "import sbrbench.kernels as k; print(k.BACKEND)"
        )
        out = subprocess.run(
            [sys.executable, "-c", code],
            env={"SBRBENCH_PURE": "1", "PATH": "/usr/bin:/bin"},
            capture_output=True,
            text=True,
        )
        assert out.stdout.strip() == "pure"

    @needs_compiled
    def test_default_prefers_compiled(self):
        import os

        if os.environ.get("SBRBENCH_PURE"):
            pytest.skip("fallback forced via SBRBENCH_PURE")
        from sbrbench import kernels

        assert kernels.BACKEND == "cython"
