"""Encoded examples and padded mini-batches."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from src.newsclf.errors import EmptyDatasetError, EmptyTextError, LabelError, ParameterError
from src.newsclf.layers.loss import one_hot
from src.newsclf.tensor import IdArray, Tensor, make_rng
from src.newsclf.text.huffpost import NewsRecord
from src.newsclf.text.tokenizer import tokenize
from src.newsclf.text.vocab import Vocabulary, encode
from src.utils.logger import get_logger

logger = get_logger("batching")


@dataclass(frozen=True)
class Example:
    """One labeled text; ``ids`` always has max_len entries, pad beyond ``length``."""

    label: int
    text: str
    ids: IdArray
    length: int


@dataclass(frozen=True)
class Batch:
    ids: IdArray        # [B×max_len]
    lengths: IdArray    # [B]
    labels: Tensor      # [B×K] one-hot
    label_ids: IdArray  # [B]

    def __len__(self) -> int:
        return self.ids.shape[0]


def make_example(text: str, label: int, vocab: Vocabulary, max_len: int) -> Example:
    ids, length = encode(tokenize(text), vocab, max_len)
    return Example(label=label, text=text, ids=ids, length=length)


def encode_records(
    records: Sequence[NewsRecord], vocab: Vocabulary, max_len: int
) -> list[Example]:
    """Encode labeled records; records that tokenize to nothing are dropped with a warning."""
    out: list[Example] = []
    for r in records:
        if r.label is None:
            raise LabelError(f"record in category '{r.category}' has no label")
        try:
            out.append(make_example(r.text, r.label, vocab, max_len))
        except EmptyTextError:
            logger.warning(f"⚠️ dropped record with no tokens (category '{r.category}')")
    return out


def make_batch(examples: Sequence[Example], num_classes: int) -> Batch:
    labels = np.array([e.label for e in examples], dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise LabelError(f"class ids must be in [0, {num_classes}), got {labels.tolist()}")
    return Batch(
        ids=np.stack([e.ids for e in examples]),
        lengths=np.array([e.length for e in examples], dtype=np.int64),
        labels=one_hot(labels, num_classes),
        label_ids=labels,
    )


def batch_iter(
    examples: Sequence[Example],
    batch_size: int,
    num_classes: int,
    shuffle: bool = False,
    seed: Optional[int] = None,
) -> Iterator[Batch]:
    """Yield consecutive batches (the last one may be partial); each example appears once.

    Arguments are validated eagerly, before the first batch is requested.
    """
    if batch_size < 1:
        raise ParameterError(f"batch_size must be >= 1, got {batch_size}")
    if not examples:
        raise EmptyDatasetError("cannot iterate over an empty dataset")
    order = np.arange(len(examples))
    if shuffle:
        order = make_rng(0 if seed is None else seed).permutation(len(examples))
    return _batches(examples, order, batch_size, num_classes)


def _batches(
    examples: Sequence[Example], order: np.ndarray, batch_size: int, num_classes: int
) -> Iterator[Batch]:
    for start in range(0, len(order), batch_size):
        yield make_batch([examples[i] for i in order[start:start + batch_size]], num_classes)
