"""Skip-gram with negative sampling.

Sequential SGD in the style of the classic word2vec trainer: a dynamic
window per centre position, negatives drawn from the unigram^0.75
distribution through a cumulative table, frequent-token subsampling, and a
learning rate that decays linearly with token progress. Everything draws
from one seeded generator, so a (corpus, config) pair gives one table.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import expit

from src.newsclf.errors import IngestionError, ParameterError
from src.newsclf.tensor import DTYPE, IdArray, Tensor, make_rng
from src.newsclf.text.vocab import PAD_ID, RESERVED, Vocabulary
from src.utils.logger import get_logger

logger = get_logger("sgns")

NEGATIVE_POWER = 0.75
CUM_TABLE_DOMAIN = 2**31 - 1


class SgnsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dim: int = Field(default=200, ge=1)
    window: int = Field(default=5, ge=1)
    negatives: int = Field(default=5, ge=1)
    epochs: int = Field(default=5, ge=1)
    lr: float = Field(default=0.025, gt=0.0)
    min_lr: float = Field(default=1e-4, ge=0.0)
    subsample: float = Field(default=1e-3, ge=0.0)
    seed: int = 0


@dataclass
class SgnsResult:
    table: Tensor              # [|V|×dim] centre vectors
    epoch_losses: list[float]  # mean pair loss per epoch


def generate_pairs(
    ids: Sequence[int], window: int, rng: np.random.Generator, fixed_window: Optional[int] = None
) -> list[tuple[int, int]]:
    """(centre, context) pairs; for each position the left neighbour precedes the right one at every offset.

    Pad and unk ids are removed before windowing.
    """
    if window < 1:
        raise ParameterError(f"window must be >= 1, got {window}")
    seq = [int(i) for i in ids if int(i) >= RESERVED]
    pairs: list[tuple[int, int]] = []
    n = len(seq)
    for t, centre in enumerate(seq):
        span = fixed_window if fixed_window is not None else int(rng.integers(1, window + 1))
        for k in range(1, span + 1):
            if t - k >= 0:
                pairs.append((centre, seq[t - k]))
            if t + k < n:
                pairs.append((centre, seq[t + k]))
    return pairs


def make_cum_table(counts: np.ndarray, power: float = NEGATIVE_POWER, domain: int = CUM_TABLE_DOMAIN) -> np.ndarray:
    """Cumulative unigram^power table; ``searchsorted`` of a uniform integer draws an id."""
    weights = counts.astype(DTYPE) ** power
    total = weights.sum()
    if total <= 0:
        raise IngestionError("no trainable tokens for negative sampling")
    return np.round(np.cumsum(weights) / total * domain).astype(np.int64)


def _draw_negatives(cum_table: np.ndarray, exclude: int, k: int, rng: np.random.Generator) -> list[int]:
    out: list[int] = []
    while len(out) < k:
        w = int(np.searchsorted(cum_table, rng.integers(cum_table[-1]), side="right"))
        if w != exclude:
            out.append(w)
    return out


def sgns_pair_loss(centre: Tensor, outputs: Tensor) -> float:
    """−log σ(c·o₀) − Σ_{j≥1} log σ(−c·o_j); row 0 of *outputs* is the true context."""
    scores = outputs @ centre
    signs = np.ones_like(scores)
    signs[1:] = -1.0
    return float(np.sum(np.logaddexp(0.0, -signs * scores)))


def sgns_pair_grad(centre: Tensor, outputs: Tensor) -> tuple[Tensor, Tensor]:
    """Gradients of :func:`sgns_pair_loss` w.r.t. the centre vector and each output row."""
    labels = np.zeros(outputs.shape[0])
    labels[0] = 1.0
    err = expit(outputs @ centre) - labels
    return err @ outputs, np.outer(err, centre)


def _keep_probabilities(counts: np.ndarray, threshold: float) -> np.ndarray:
    keep = np.ones(counts.shape[0])
    if threshold <= 0:
        return keep
    total = counts.sum()
    seen = counts > 0
    limit = threshold * total
    keep[seen] = np.minimum((np.sqrt(counts[seen] / limit) + 1.0) * limit / counts[seen], 1.0)
    return keep


def sgns_train(corpus: Sequence[IdArray], vocab_size: int, config: SgnsConfig) -> SgnsResult:
    """Train centre/output tables over *corpus* (sequences of token ids) and return the centre table."""
    if vocab_size < 2:
        raise ParameterError(f"vocab_size must be >= 2, got {vocab_size}")
    sequences = [np.asarray(s, dtype=np.int64) for s in corpus]
    sequences = [s[s >= RESERVED] for s in sequences]
    total_tokens = int(sum(s.size for s in sequences))
    if total_tokens == 0:
        raise IngestionError("pretraining corpus has no in-vocabulary tokens")
    if max(int(s.max()) for s in sequences if s.size) >= vocab_size:
        raise ParameterError(f"corpus contains ids >= vocab_size {vocab_size}")

    counts = np.bincount(np.concatenate(sequences), minlength=vocab_size)
    if np.count_nonzero(counts) < 2:
        raise IngestionError("negative sampling needs at least two distinct tokens")
    cum_table = make_cum_table(counts)
    keep_prob = _keep_probabilities(counts, config.subsample)

    rng = make_rng(config.seed)
    dim = config.dim
    w_in = rng.uniform(-0.5 / dim, 0.5 / dim, size=(vocab_size, dim))
    w_out = np.zeros((vocab_size, dim), dtype=DTYPE)
    labels = np.zeros(config.negatives + 1)
    labels[0] = 1.0

    budget = config.epochs * total_tokens
    processed = 0
    epoch_losses: list[float] = []
    for epoch in range(1, config.epochs + 1):
        loss_sum = 0.0
        pair_count = 0
        for seq in sequences:
            lr = max(config.min_lr, config.lr - (config.lr - config.min_lr) * processed / budget)
            processed += seq.size
            kept = seq[rng.random(seq.size) < keep_prob[seq]]
            for centre, context in generate_pairs(kept, config.window, rng):
                idx = [context] + _draw_negatives(cum_table, context, config.negatives, rng)
                l1 = w_in[centre]
                l2 = w_out[idx]
                scores = l2 @ l1
                signs = 2.0 * labels - 1.0
                loss_sum += float(np.sum(np.logaddexp(0.0, -signs * scores)))
                g = (labels - expit(scores)) * lr
                np.add.at(w_out, idx, np.outer(g, l1))
                w_in[centre] += g @ l2
                pair_count += 1
        mean = loss_sum / pair_count if pair_count else 0.0
        epoch_losses.append(mean)
        logger.info(f"sgns epoch {epoch}/{config.epochs}: mean pair loss {mean:.6f} over {pair_count} pairs")

    w_in[PAD_ID] = 0.0
    return SgnsResult(table=w_in, epoch_losses=epoch_losses)


def nearest_neighbors(table: Tensor, token: str, k: int, vocab: Vocabulary) -> list[tuple[str, float]]:
    """Top-*k* tokens by cosine similarity to *token*; query, pad and unk excluded, ties by id."""
    query = vocab.lookup(token)
    norms = np.linalg.norm(table, axis=1)
    q = table[query]
    denom = norms * norms[query]
    cos = np.divide(table @ q, denom, out=np.zeros(table.shape[0]), where=denom > 0)
    candidates = np.array([i for i in range(RESERVED, table.shape[0]) if i != query], dtype=np.int64)
    if candidates.size == 0:
        return []
    order = candidates[np.lexsort((candidates, -cos[candidates]))]
    return [(vocab.token_of(int(i)), float(cos[i])) for i in order[:k]]
