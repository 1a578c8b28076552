"""Gradient-trained baselines: skip-gram item embeddings and
session-based matrix factorization with the BPR-max ranking loss.

Training is single-threaded and fully deterministic under a fixed seed;
all arithmetic is float64 so the finite-difference gradient checks in the
test suite hold at tight tolerances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .baselines import NotFittedError, Predictor
from .eval import expand_prefixes


class TrainingDiverged(Exception):
    pass


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def bpr_max_loss(target_score, negative_scores, lam=0.0):
    """BPR-max: softmax-weighted pairwise sigmoids plus score regularization.

    Returns ``(loss, grad_target, grad_negatives)``.  The softmax weights
    over the negative scores are part of the objective, so the negative
    gradients include the softmax dependence.
    """
    r_t = float(target_score)
    r_j = np.asarray(negative_scores, dtype=np.float64)
    if len(r_j) == 0:
        raise ValueError("need at least one negative score")

    shifted = r_j - r_j.max()
    e = np.exp(shifted)
    s = e / e.sum()
    sig = _sigmoid(r_t - r_j)
    p = max(float(np.dot(s, sig)), 1e-12)
    reg = float(np.dot(s, r_j**2))
    loss = -math.log(p) + lam * reg

    dp_dt = float(np.dot(s, sig * (1.0 - sig)))
    grad_t = -dp_dt / p

    # d s_i / d r_j = s_i (delta_ij - s_j)
    dp_dj = s * sig - s * p - s * sig * (1.0 - sig)
    dreg_dj = s * r_j**2 - s * reg + 2.0 * s * r_j
    grad_j = -dp_dj / p + lam * dreg_dj
    return loss, grad_t, grad_j


# ---------------------------------------------------------------------------
# Item2Vec
# ---------------------------------------------------------------------------


@dataclass
class Item2VecConfig:
    dim: int = 32
    window: int = 3
    negatives: int = 10
    start_lr: float = 0.025
    final_lr: float = 0.0001
    epochs: int = 5
    subsample: float = 1e-4
    min_freq: int = 1
    seed: int = 0


class Item2Vec(Predictor):
    """Skip-gram with negative sampling over session item co-occurrence.

    Prediction scores candidates by cosine between their vectors and the
    mean vector of the prefix items.
    """

    name = "item2vec"

    def __init__(self, config=None, **kwargs):
        self.config = config or Item2VecConfig(**kwargs)

    def fit(self, train):
        cfg = self.config
        n = train.n_items
        if n == 0:
            raise ValueError("empty vocabulary")
        self.train_freq_ = train.freq.copy()
        rng = np.random.Generator(np.random.PCG64(cfg.seed))
        self.w_in_ = rng.uniform(-0.5 / cfg.dim, 0.5 / cfg.dim, size=(n, cfg.dim))
        self.w_out_ = np.zeros((n, cfg.dim))

        freq = train.freq.astype(np.float64)
        total = freq.sum()
        mask = train.freq >= cfg.min_freq
        # negative table: unigram^(3/4)
        noise = np.where(mask, freq, 0.0) ** 0.75
        if noise.sum() == 0:
            raise ValueError("empty vocabulary after frequency threshold")
        self.noise_cdf_ = np.cumsum(noise / noise.sum())
        # frequent-item downsampling keep probability (word2vec convention)
        rel = np.where(freq > 0, freq / total, 1.0)
        keep = (np.sqrt(rel / cfg.subsample) + 1.0) * cfg.subsample / rel
        self.keep_prob_ = np.clip(keep, 0.0, 1.0)

        pairs_per_epoch = max(
            1, sum(max(0, len(s.items) - 1) for s in train.sessions)
        )
        total_steps = cfg.epochs * pairs_per_epoch
        step = 0
        for _epoch in range(cfg.epochs):
            for s in train.sessions:
                items = [
                    it
                    for it in s.items
                    if mask[it] and rng.random() < self.keep_prob_[it]
                ]
                for i, center in enumerate(items):
                    lo = max(0, i - cfg.window)
                    hi = min(len(items), i + cfg.window + 1)
                    for j in range(lo, hi):
                        if j == i:
                            continue
                        lr = cfg.start_lr + (cfg.final_lr - cfg.start_lr) * min(
                            1.0, step / total_steps
                        )
                        self._train_pair(center, items[j], lr, rng)
                step += max(0, len(items) - 1)
        return self

    def _train_pair(self, center, context, lr, rng):
        cfg = self.config
        targets = [context]
        seen = {context}
        while len(targets) < cfg.negatives + 1:
            cand = int(np.searchsorted(self.noise_cdf_, rng.random()))
            if cand not in seen:  # the update kernel needs distinct targets
                seen.add(cand)
                targets.append(cand)
        labels = np.zeros(len(targets))
        labels[0] = 1.0
        kernels.sgns_update(
            self.w_in_,
            self.w_out_,
            center,
            np.asarray(targets, dtype=np.int64),
            labels,
            lr,
        )

    @property
    def embeddings(self):
        if not hasattr(self, "w_in_"):
            raise NotFittedError("item2vec is not fitted")
        return self.w_in_

    def score(self, prefix):
        emb = self.embeddings
        rows = [emb[i] for i in prefix if 0 <= i < len(emb)]
        scores = np.zeros(len(emb))
        if not rows:
            return scores
        sess = np.mean(rows, axis=0)
        sess_norm = np.linalg.norm(sess)
        if sess_norm == 0:
            return scores
        norms = np.linalg.norm(emb, axis=1)
        ok = norms > 0
        scores[ok] = (emb[ok] @ sess) / (norms[ok] * sess_norm)
        return scores

    def export_text(self, path):
        """Header-plus-rows text dump: item id followed by its vector."""
        emb = self.embeddings
        with open(path, "w") as fh:
            fh.write(f"{emb.shape[0]} {emb.shape[1]}\n")
            for idx in range(emb.shape[0]):
                vals = " ".join(f"{v:.8g}" for v in emb[idx])
                fh.write(f"{idx} {vals}\n")


# ---------------------------------------------------------------------------
# Session-based matrix factorization
# ---------------------------------------------------------------------------


@dataclass
class SmfConfig:
    factors: int = 50
    lr: float = 0.01
    negatives: int = 100
    momentum: float = 0.2
    bpr_lambda: float = 0.5
    dropout: float = 0.1
    skip_prob: float = 0.1
    batch_size: int = 32
    epochs: int = 5
    init_scale: float = 0.05
    seed: int = 0


class SessionMF(Predictor):
    """Matrix factorization mixing whole-session preference with the
    last-click transition, trained on prefix/target events with BPR-max.

    score(n) = w1 * <mean prefix factors, V_n> + w2 * <T_last, V_n>
    where w1/w2 are learned scalars (initialized at 0.5).
    """

    name = "smf"

    def __init__(self, config=None, **kwargs):
        self.config = config or SmfConfig(**kwargs)

    def fit(self, train, validation_score=None, patience=2):
        """Train on ``train``; ``validation_score`` is an optional callable
        evaluated after each epoch (higher is better) driving early stopping
        with the given patience.  The best-epoch parameters are kept.
        """
        cfg = self.config
        n = train.n_items
        rng = np.random.Generator(np.random.PCG64(cfg.seed))
        self.train_freq_ = train.freq.copy()
        self.n_items_ = n
        self.item_factors_ = rng.uniform(
            -cfg.init_scale, cfg.init_scale, size=(n, cfg.factors)
        )
        self.transition_factors_ = rng.uniform(
            -cfg.init_scale, cfg.init_scale, size=(n, cfg.factors)
        )
        self.w1_ = 0.5
        self.w2_ = 0.5

        events = list(expand_prefixes(train))
        vel = {
            "V": np.zeros_like(self.item_factors_),
            "T": np.zeros_like(self.transition_factors_),
            "w1": 0.0,
            "w2": 0.0,
        }
        best = None
        best_metric = -np.inf
        since_improve = 0
        self.epoch_losses_ = []
        for _epoch in range(cfg.epochs):
            order = rng.permutation(len(events))
            epoch_loss = 0.0
            n_seen = 0
            for start in range(0, len(order), cfg.batch_size):
                batch = [events[i] for i in order[start : start + cfg.batch_size]]
                loss, count = self._train_batch(batch, vel, rng)
                epoch_loss += loss
                n_seen += count
            if not math.isfinite(epoch_loss):
                raise TrainingDiverged(f"non-finite loss {epoch_loss!r}")
            self.epoch_losses_.append(epoch_loss / max(1, n_seen))
            if validation_score is not None:
                metric = validation_score(self)
                if metric > best_metric:
                    best_metric = metric
                    best = (
                        self.item_factors_.copy(),
                        self.transition_factors_.copy(),
                        self.w1_,
                        self.w2_,
                    )
                    since_improve = 0
                else:
                    since_improve += 1
                    if since_improve >= patience:
                        break
        if best is not None:
            self.item_factors_, self.transition_factors_, self.w1_, self.w2_ = best
        return self

    def _train_batch(self, batch, vel, rng):
        cfg = self.config
        n = self.n_items_
        grad_v = {}
        grad_t = {}
        grad_w1 = 0.0
        grad_w2 = 0.0
        total_loss = 0.0
        count = 0
        for prefix, target in batch:
            if rng.random() < cfg.skip_prob:
                continue
            kept = [i for i in prefix if rng.random() >= cfg.dropout]
            if not kept:
                kept = [prefix[-1]]
            last = prefix[-1]
            negatives = self._sample_negatives(target, rng)

            V = self.item_factors_
            T = self.transition_factors_
            m = V[kept].mean(axis=0)
            cand = [target] + negatives
            cand_vecs = V[cand]
            scores = self.w1_ * (cand_vecs @ m) + self.w2_ * (cand_vecs @ T[last])
            loss, g_t, g_j = bpr_max_loss(scores[0], scores[1:], cfg.bpr_lambda)
            total_loss += loss
            count += 1
            g_scores = np.concatenate(([g_t], g_j))

            # chain rule through score(n) = w1 m.V_n + w2 T_last.V_n
            grad_w1 += float(g_scores @ (cand_vecs @ m))
            grad_w2 += float(g_scores @ (cand_vecs @ T[last]))
            common = self.w1_ * m + self.w2_ * T[last]
            for g, c in zip(g_scores, cand):
                grad_v[c] = grad_v.get(c, 0.0) + g * common
            back_m = self.w1_ * (g_scores @ cand_vecs) / len(kept)
            for p in kept:
                grad_v[p] = grad_v.get(p, 0.0) + back_m
            grad_t[last] = grad_t.get(last, 0.0) + self.w2_ * (g_scores @ cand_vecs)

        if count == 0:
            return 0.0, 0
        self._apply(vel, grad_v, grad_t, grad_w1, grad_w2)
        return total_loss, count

    def _sample_negatives(self, target, rng):
        cfg = self.config
        n_neg = min(cfg.negatives, self.n_items_ - 1)
        chosen = []
        seen = {target}
        while len(chosen) < n_neg:
            cand = int(rng.integers(self.n_items_))
            if cand not in seen:
                seen.add(cand)
                chosen.append(cand)
        return chosen

    def _apply(self, vel, grad_v, grad_t, grad_w1, grad_w2):
        cfg = self.config
        for idx, g in grad_v.items():
            vel["V"][idx] = cfg.momentum * vel["V"][idx] - cfg.lr * g
            self.item_factors_[idx] += vel["V"][idx]
        for idx, g in grad_t.items():
            vel["T"][idx] = cfg.momentum * vel["T"][idx] - cfg.lr * g
            self.transition_factors_[idx] += vel["T"][idx]
        vel["w1"] = cfg.momentum * vel["w1"] - cfg.lr * grad_w1
        vel["w2"] = cfg.momentum * vel["w2"] - cfg.lr * grad_w2
        self.w1_ += vel["w1"]
        self.w2_ += vel["w2"]

    def score(self, prefix):
        if not hasattr(self, "item_factors_"):
            raise NotFittedError("smf is not fitted")
        V = self.item_factors_
        T = self.transition_factors_
        in_vocab = [i for i in prefix if 0 <= i < self.n_items_]
        scores = np.zeros(self.n_items_)
        if not in_vocab:
            return scores
        m = V[in_vocab].mean(axis=0)
        last = in_vocab[-1]
        return self.w1_ * (V @ m) + self.w2_ * (V @ T[last])
