from __future__ import annotations

import math
from collections import defaultdict
from typing import Callable, Hashable, Sequence, TypeVar

import numpy as np

from src.newsclf.errors import ParameterError, StratificationError
from src.newsclf.tensor import make_rng

T = TypeVar("T")


def _test_count(n: int, fraction: float) -> int:
    """floor(n·fraction + 1/2), moved to 1 or n-1 only when it would empty the test or train side."""
    k = math.floor(n * fraction + 0.5)
    return min(max(k, 1), n - 1)


def stratified_split(
    records: Sequence[T],
    test_fraction: float,
    seed: int,
    key: Callable[[T], Hashable] = lambda r: r.category,  # type: ignore[attr-defined]
) -> tuple[list[T], list[T]]:
    """Per class, send round-half-up(n_c · test_fraction) records to test by seeded shuffle.

    A class whose rounded count is 0 still sends one record to test, and one whose
    count is n_c keeps one in train; every other count is the plain rounded value.

    Classes are visited in sorted order with one generator, so the split is a
    pure function of (records, fraction, seed). Both outputs keep input order.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ParameterError(f"test_fraction must be in (0, 1), got {test_fraction}")
    by_class: dict[Hashable, list[int]] = defaultdict(list)
    for i, r in enumerate(records):
        by_class[key(r)].append(i)

    rng = make_rng(seed)
    in_test = np.zeros(len(records), dtype=bool)
    for cls in sorted(by_class, key=str):
        idx = by_class[cls]
        if len(idx) < 2:
            raise StratificationError(f"class '{cls}' has {len(idx)} record(s); at least 2 are needed")
        chosen = rng.permutation(len(idx))[: _test_count(len(idx), test_fraction)]
        in_test[np.asarray(idx)[chosen]] = True

    train = [r for i, r in enumerate(records) if not in_test[i]]
    test = [r for i, r in enumerate(records) if in_test[i]]
    return train, test
