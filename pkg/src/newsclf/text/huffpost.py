"""HuffPost news-category dataset ingestion and the processed split-file format.

Input: UTF-8, one JSON object per line with string fields ``category``,
``headline`` and ``short_description``; other fields are ignored.
Split files add an integer ``label``.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from src.newsclf.errors import IngestionError
from src.utils.logger import get_logger

logger = get_logger("huffpost")

REQUIRED_FIELDS = ("category", "headline", "short_description")
DEFAULT_MAX_MALFORMED_FRACTION = 0.1


@dataclass(frozen=True)
class NewsRecord:
    category: str
    headline: str
    short_description: str
    label: Optional[int] = None

    @property
    def text(self) -> str:
        return f"{self.headline} {self.short_description}"

    def with_label(self, label: int) -> "NewsRecord":
        return NewsRecord(self.category, self.headline, self.short_description, label)


def _parse_line(line: str) -> tuple[Optional[dict], Optional[str]]:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        return None, f"invalid JSON ({e.msg})"
    if not isinstance(obj, dict):
        return None, "line is not a JSON object"
    return obj, None


def _missing_fields(obj: dict) -> list[str]:
    return [k for k in REQUIRED_FIELDS if not isinstance(obj.get(k), str)]


def load_huffpost(
    path: Union[str, Path],
    categories: Optional[Iterable[str]] = None,
    max_malformed_fraction: float = DEFAULT_MAX_MALFORMED_FRACTION,
) -> list[NewsRecord]:
    """Read every valid record, keeping only *categories* when an allow-list is given.

    Malformed lines (not JSON, or not an object) are skipped with a warning naming
    the line number; more than *max_malformed_fraction* of nonblank lines malformed
    is an ingestion error. Objects missing a required field are skipped with a
    warning too, but are counted apart and never trip that limit.
    """
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"dataset file not found: {path}")
    allow = set(categories) if categories is not None else None
    records: list[NewsRecord] = []
    total = malformed = incomplete = 0
    try:
        handle = path.open(encoding="utf-8")
    except OSError as e:
        raise IngestionError(f"cannot read dataset {path}: {e}") from e
    with handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            total += 1
            obj, problem = _parse_line(line)
            if obj is None:
                malformed += 1
                logger.warning(f"⚠️ {path.name}:{lineno}: {problem}; record skipped")
                continue
            missing = _missing_fields(obj)
            if missing:
                incomplete += 1
                logger.warning(
                    f"⚠️ {path.name}:{lineno}: missing or non-string field(s): {', '.join(missing)}; record skipped"
                )
                continue
            if allow is not None and obj["category"] not in allow:
                continue
            label = obj.get("label")
            records.append(
                NewsRecord(
                    category=obj["category"],
                    headline=obj["headline"],
                    short_description=obj["short_description"],
                    label=label if isinstance(label, int) else None,
                )
            )
    if total == 0:
        raise IngestionError(f"dataset {path} contains no records")
    if malformed / total > max_malformed_fraction:
        raise IngestionError(
            f"{malformed} of {total} lines in {path} are malformed "
            f"(limit {max_malformed_fraction:.0%})"
        )
    logger.info(
        f"loaded {len(records)} records from {path.name} "
        f"({malformed} malformed, {incomplete} incomplete skipped)"
    )
    return records


def top_categories(records: Sequence[NewsRecord], n: int) -> list[str]:
    """The *n* most frequent categories, ties broken by name."""
    freq = Counter(r.category for r in records)
    ranked = sorted(freq.items(), key=lambda item: (-item[1], item[0]))
    return [name for name, _ in ranked[:n]]


def assign_labels(records: Iterable[NewsRecord], categories: Sequence[str]) -> list[NewsRecord]:
    """Label each record by its category's position in *categories*; others are dropped."""
    for name in categories:
        if name.splitlines() != [name]:
            raise IngestionError(f"category name {name!r} is empty or contains a line break")
    label_of = {name: i for i, name in enumerate(categories)}
    return [r.with_label(label_of[r.category]) for r in records if r.category in label_of]


def write_split(path: Union[str, Path], records: Iterable[NewsRecord]) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8", newline="\n") as f:
        for r in records:
            if r.label is None:
                raise IngestionError(f"record in category '{r.category}' has no label")
            row = {
                "category": r.category,
                "headline": r.headline,
                "short_description": r.short_description,
                "label": r.label,
            }
            f.write(json.dumps(row, ensure_ascii=False) + "\n")
            count += 1
    return count


def read_split(path: Union[str, Path]) -> list[NewsRecord]:
    """Load a processed split file; every record must carry its label."""
    records = load_huffpost(path, max_malformed_fraction=0.0)
    unlabeled = sum(1 for r in records if r.label is None)
    if unlabeled:
        raise IngestionError(f"{unlabeled} record(s) in {path} have no integer label")
    return records


def write_categories(path: Union[str, Path], categories: Sequence[str]) -> None:
    Path(path).write_text("".join(f"{name}\n" for name in categories), encoding="utf-8")


def read_categories(path: Union[str, Path]) -> list[str]:
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"category listing not found: {path}")
    return [line for line in path.read_text(encoding="utf-8").splitlines() if line]
