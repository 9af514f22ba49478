"""Token ↔ id vocabulary with reserved pad/unk ids, plus its text listing."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from src.newsclf.errors import EmptyTextError, ParameterError, VocabularyError
from src.newsclf.tensor import IdArray
from src.utils.logger import get_logger

logger = get_logger("vocab")

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_ID = 0
UNK_ID = 1
RESERVED = 2


@dataclass
class Vocabulary:
    """Dense ids 0…|V|−1; ids 0 and 1 are ``<pad>`` and ``<unk>``."""

    tokens: list[str] = field(default_factory=lambda: [PAD_TOKEN, UNK_TOKEN])
    counts: list[int] = field(default_factory=lambda: [0, 0])
    min_count: int = 1
    max_size: int = 0
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.tokens[:RESERVED] != [PAD_TOKEN, UNK_TOKEN]:
            raise VocabularyError(f"vocabulary must start with {PAD_TOKEN} and {UNK_TOKEN}")
        if len(self.counts) != len(self.tokens):
            raise VocabularyError("token and count lists differ in length")
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise VocabularyError("duplicate token in vocabulary")

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: object) -> bool:
        return token in self.index

    def id_of(self, token: str) -> int:
        return self.index.get(token, UNK_ID)

    def lookup(self, token: str) -> int:
        """Strict lookup: raises VocabularyError for unknown tokens."""
        try:
            return self.index[token]
        except KeyError:
            raise VocabularyError(f"token '{token}' is not in the vocabulary") from None

    def token_of(self, token_id: int) -> str:
        return self.tokens[token_id]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.tokens[int(i)] for i in ids if int(i) != PAD_ID]

    def save(self, path: Union[str, Path]) -> None:
        """One ``token id count`` line per entry, in id order."""
        lines = [f"{tok} {i} {self.counts[i]}" for i, tok in enumerate(self.tokens)]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Vocabulary":
        path = Path(path)
        if not path.exists():
            raise VocabularyError(f"vocabulary file not found: {path}")
        tokens: list[str] = []
        counts: list[int] = []
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            parts = line.split(" ")
            if len(parts) != 3:
                raise VocabularyError(f"{path}:{lineno}: expected 'token id count', got {line!r}")
            token, raw_id, raw_count = parts
            try:
                token_id, count = int(raw_id), int(raw_count)
            except ValueError:
                raise VocabularyError(f"{path}:{lineno}: non-integer id or count") from None
            if token_id != len(tokens):
                raise VocabularyError(f"{path}:{lineno}: ids must be dense, expected {len(tokens)}")
            tokens.append(token)
            counts.append(count)
        return cls(tokens=tokens, counts=counts)


def build_vocab(corpus: Iterable[Sequence[str]], min_count: int = 1, max_size: int = 50_000) -> Vocabulary:
    """Keep tokens seen ≥ *min_count* times, ranked by (frequency desc, token asc).

    At most ``max_size − 2`` tokens are kept so the total including pad/unk
    never exceeds *max_size*.
    """
    if min_count < 1:
        raise ParameterError(f"min_count must be >= 1, got {min_count}")
    if max_size < RESERVED:
        raise ParameterError(f"max_size must be >= {RESERVED}, got {max_size}")
    freq: Counter[str] = Counter()
    for tokens in corpus:
        freq.update(tokens)
    ranked = sorted(
        ((tok, n) for tok, n in freq.items() if n >= min_count and tok not in (PAD_TOKEN, UNK_TOKEN)),
        key=lambda item: (-item[1], item[0]),
    )[: max_size - RESERVED]
    vocab = Vocabulary(
        tokens=[PAD_TOKEN, UNK_TOKEN] + [tok for tok, _ in ranked],
        counts=[0, 0] + [n for _, n in ranked],
        min_count=min_count,
        max_size=max_size,
    )
    logger.debug(f"vocabulary: {len(freq)} distinct tokens, {len(vocab)} kept (min_count={min_count})")
    return vocab


def encode(tokens: Sequence[str], vocab: Vocabulary, max_len: int) -> tuple[IdArray, int]:
    """Map, truncate to *max_len* and right-pad; returns (ids, true length)."""
    if max_len < 1:
        raise ParameterError(f"max_len must be >= 1, got {max_len}")
    if not tokens:
        raise EmptyTextError("cannot encode an empty token list")
    length = min(len(tokens), max_len)
    ids = np.full(max_len, PAD_ID, dtype=np.int64)
    ids[:length] = [vocab.id_of(tok) for tok in tokens[:length]]
    return ids, length
