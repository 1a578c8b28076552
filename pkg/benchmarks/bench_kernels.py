"""Timing comparison of the compiled kernels against the numpy fallback.

Run from the repository root:

    python3 benchmarks/bench_kernels.py [--sessions N] [--items N] [--repeat N]
"""

import argparse
import time

import numpy as np

from sbrbench.kernels import _pure

try:
    from sbrbench.kernels import _speedups
except ImportError:
    _speedups = None


def build_inputs(rng, n_items, n_sessions, avg_len):
    sessions = []
    for _ in range(n_sessions):
        size = max(2, int(rng.poisson(avg_len)))
        sessions.append(
            np.sort(rng.choice(n_items, size=min(size, n_items), replace=False))
        )
    postings = [[] for _ in range(n_items)]
    for sid, items in enumerate(sessions):
        for item in items:
            postings[item].append(sid)
    indptr = np.zeros(n_items + 1, dtype=np.int64)
    flat = []
    for item in range(n_items):
        indptr[item + 1] = indptr[item] + len(postings[item])
        flat.extend(postings[item])

    item_indptr = np.zeros(n_sessions + 1, dtype=np.int64)
    lists, weights = [], []
    for sid, items in enumerate(sessions):
        item_indptr[sid + 1] = item_indptr[sid] + len(items)
        lists.extend(items)
        weights.extend(rng.random(len(items)))
    return {
        "indptr": indptr,
        "flat": np.asarray(flat, dtype=np.int64),
        "item_indptr": item_indptr,
        "lists": np.asarray(lists, dtype=np.int64),
        "weights": np.asarray(weights),
        "n_sessions": n_sessions,
        "n_items": n_items,
    }


def timeit(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_backend(mod, data, rng, repeat):
    prefix = rng.choice(data["n_items"], size=10, replace=False).astype(np.int64)
    pw = rng.random(len(prefix))
    kept = rng.choice(data["n_sessions"], size=min(500, data["n_sessions"]),
                      replace=False).astype(np.int64)
    sims = rng.random(len(kept))
    dim = 64
    w_in = rng.normal(size=(data["n_items"], dim))
    w_out = rng.normal(size=(data["n_items"], dim))
    targets = rng.choice(data["n_items"], size=11, replace=False).astype(np.int64)
    labels = np.zeros(11)
    labels[0] = 1.0

    return {
        "accumulate_index_overlap": timeit(
            lambda: mod.accumulate_index_overlap(
                data["indptr"], data["flat"], prefix, pw, data["n_sessions"]
            ),
            repeat,
        ),
        "accumulate_neighbor_scores": timeit(
            lambda: mod.accumulate_neighbor_scores(
                kept, sims, data["item_indptr"], data["lists"], data["weights"],
                data["n_items"],
            ),
            repeat,
        ),
        "sgns_update_x1000": timeit(
            lambda: [
                mod.sgns_update(w_in, w_out, 0, targets, labels, 0.01)
                for _ in range(1000)
            ],
            repeat,
        ),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sessions", type=int, default=20000)
    parser.add_argument("--items", type=int, default=2000)
    parser.add_argument("--avg-len", type=int, default=6)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.Generator(np.random.PCG64(args.seed))
    data = build_inputs(rng, args.items, args.sessions, args.avg_len)

    results = {"pure": bench_backend(_pure, data, rng, args.repeat)}
    if _speedups is not None:
        results["cython"] = bench_backend(_speedups, data, rng, args.repeat)
    else:
        print("compiled kernels unavailable; benchmarking the fallback only")

    width = max(len(k) for k in results["pure"])
    header = f"{'kernel':<{width}}  " + "  ".join(f"{b:>12}" for b in results)
    print(header)
    print("-" * len(header))
    for kernel in results["pure"]:
        row = f"{kernel:<{width}}  " + "  ".join(
            f"{results[b][kernel] * 1e3:>10.3f}ms" for b in results
        )
        if "cython" in results:
            speedup = results["pure"][kernel] / results["cython"][kernel]
            row += f"  ({speedup:.1f}x)"
        print(row)


if __name__ == "__main__":
    main()
