"""Text embedding files: a ``<count> <dim>`` header, then ``token v1 … vdim`` per id."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Union

import numpy as np

from src.newsclf.errors import EmbeddingFormatError
from src.newsclf.tensor import DTYPE, Tensor
from src.newsclf.text.vocab import Vocabulary


def save_embeddings(path: Union[str, Path], table: Tensor, vocab: Vocabulary) -> None:
    """Write one row per vocabulary id, pad and unk included; floats use ``repr`` so reloads are exact."""
    if table.shape[0] != len(vocab):
        raise EmbeddingFormatError(f"table has {table.shape[0]} rows, vocabulary has {len(vocab)} tokens")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as f:
        f.write(f"{table.shape[0]} {table.shape[1]}\n")
        for token, row in zip(vocab.tokens, table):
            f.write(token + " " + " ".join(repr(float(x)) for x in row) + "\n")


def load_embeddings(
    path: Union[str, Path], vocab: Optional[Vocabulary] = None, dim: Optional[int] = None
) -> Tensor:
    """Read an embedding file, checking its header and, when given, the vocabulary order and dim."""
    path = Path(path)
    if not path.exists():
        raise EmbeddingFormatError(f"embedding file not found: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise EmbeddingFormatError(f"{path} is empty")
    try:
        count, file_dim = (int(v) for v in lines[0].split())
    except ValueError:
        raise EmbeddingFormatError(f"{path}:1: header must be '<count> <dim>', got {lines[0]!r}") from None
    if dim is not None and file_dim != dim:
        raise EmbeddingFormatError(f"{path}: dim {file_dim} does not match expected {dim}")
    if vocab is not None and count != len(vocab):
        raise EmbeddingFormatError(f"{path}: {count} rows but the vocabulary has {len(vocab)} tokens")
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != count:
        raise EmbeddingFormatError(f"{path}: header declares {count} rows, found {len(body)}")

    table = np.empty((count, file_dim), dtype=DTYPE)
    for i, line in enumerate(body):
        parts = line.split(" ")
        lineno = i + 2
        if len(parts) != file_dim + 1:
            raise EmbeddingFormatError(f"{path}:{lineno}: expected {file_dim} values, got {len(parts) - 1}")
        if vocab is not None and parts[0] != vocab.tokens[i]:
            raise EmbeddingFormatError(
                f"{path}:{lineno}: token {parts[0]!r} where the vocabulary has {vocab.tokens[i]!r}"
            )
        try:
            table[i] = [float(v) for v in parts[1:]]
        except ValueError:
            raise EmbeddingFormatError(f"{path}:{lineno}: non-numeric value") from None
    return table
