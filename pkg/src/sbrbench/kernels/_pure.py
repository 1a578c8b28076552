"""Pure numpy fallback for the hot scoring/training loops.

The compiled twin in ``_speedups.pyx`` implements the same three entry
points with identical semantics; ``sbrbench.kernels`` picks whichever is
available at import time.
"""

import numpy as np

BACKEND = "pure"


def accumulate_index_overlap(indptr, session_lists, prefix_items, prefix_weights, n_sessions):
    """Weighted overlap of a prefix with every indexed training session.

    ``indptr``/``session_lists`` form a CSR inverted index: the sessions
    containing item ``i`` are ``session_lists[indptr[i]:indptr[i + 1]]``.
    Returns an array of per-session accumulated prefix weights (the dot
    product of the weighted prefix vector with each binary session vector).
    """
    acc = np.zeros(n_sessions, dtype=np.float64)
    for item, w in zip(prefix_items, prefix_weights):
        lo, hi = indptr[item], indptr[item + 1]
        np.add.at(acc, session_lists[lo:hi], w)
    return acc


def accumulate_neighbor_scores(
    neighbor_ids, sims, item_indptr, item_lists, item_weights, n_items
):
    """Sum similarity * position-weight contributions over kept neighbors.

    ``item_lists``/``item_weights`` hold, per training session (CSR via
    ``item_indptr``), its distinct items and their precomputed position
    weights.
    """
    out = np.zeros(n_items, dtype=np.float64)
    for sid, sim in zip(neighbor_ids, sims):
        lo, hi = item_indptr[sid], item_indptr[sid + 1]
        out[item_lists[lo:hi]] += sim * item_weights[lo:hi]
    return out


def sgns_update(w_in, w_out, center, targets, labels, lr):
    """One skip-gram negative-sampling step; updates matrices in place.

    ``targets[0]`` is the positive context, the rest are negatives;
    ``labels`` are 1/0 accordingly.  Returns the summed logistic loss.
    """
    h = w_in[center]
    vecs = w_out[targets]
    logits = vecs @ h
    f = 1.0 / (1.0 + np.exp(-logits))
    g = (labels - f) * lr
    grad_h = g @ vecs
    w_out[targets] += np.outer(g, h)
    w_in[center] += grad_h
    # clamped logistic loss, for monitoring only
    p = np.clip(np.where(labels > 0, f, 1.0 - f), 1e-12, None)
    return float(-np.log(p).sum())
