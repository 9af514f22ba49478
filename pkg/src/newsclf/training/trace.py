"""Loss-trace CSV files: per optimizer step and per epoch."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, TextIO, Union

from src.newsclf.errors import TraceFormatError

STEP_HEADER = ("epoch", "step", "loss")
EPOCH_HEADER = ("epoch", "train_loss", "precision", "recall", "f1")


@dataclass(frozen=True)
class StepRecord:
    epoch: int
    step: int
    loss: float


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    precision: float
    recall: float
    f1: float


@dataclass
class LossTrace:
    steps: list[StepRecord] = field(default_factory=list)
    epochs: list[EpochRecord] = field(default_factory=list)


def epoch_trace_path(step_path: Union[str, Path]) -> Path:
    """Companion per-epoch file: ``loss.csv`` → ``loss.epochs.csv``."""
    p = Path(step_path)
    return p.with_name(f"{p.stem}.epochs{p.suffix or '.csv'}")


class TraceWriter:
    """Appends rows as they happen and flushes each one, so a crashed run keeps its trace."""

    def __init__(self, step_path: Optional[Union[str, Path]]) -> None:
        self._step: Optional[TextIO] = None
        self._epoch: Optional[TextIO] = None
        if step_path is None:
            return
        step_path = Path(step_path)
        step_path.parent.mkdir(parents=True, exist_ok=True)
        self._step = step_path.open("w", encoding="utf-8", newline="")
        self._epoch = epoch_trace_path(step_path).open("w", encoding="utf-8", newline="")
        self._write(self._step, STEP_HEADER)
        self._write(self._epoch, EPOCH_HEADER)

    @staticmethod
    def _write(handle: Optional[TextIO], row: tuple) -> None:
        if handle is None:
            return
        csv.writer(handle, lineterminator="\n").writerow(row)
        handle.flush()

    def step(self, rec: StepRecord) -> None:
        self._write(self._step, (rec.epoch, rec.step, repr(rec.loss)))

    def epoch(self, rec: EpochRecord) -> None:
        self._write(
            self._epoch,
            (rec.epoch, repr(rec.train_loss), repr(rec.precision), repr(rec.recall), repr(rec.f1)),
        )

    def close(self) -> None:
        for handle in (self._step, self._epoch):
            if handle is not None:
                handle.close()

    def __enter__(self) -> "TraceWriter":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


def read_step_trace(path: Union[str, Path]) -> list[StepRecord]:
    """Parse an ``epoch,step,loss`` CSV; any malformed row raises TraceFormatError with its line number."""
    path = Path(path)
    if not path.exists():
        raise TraceFormatError(f"trace file not found: {path}")
    with path.open(encoding="utf-8", newline="") as f:
        rows = list(csv.reader(f))
    if not rows or tuple(rows[0]) != STEP_HEADER:
        raise TraceFormatError(f"{path}:1: expected header {','.join(STEP_HEADER)}")
    records: list[StepRecord] = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3:
            raise TraceFormatError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
        try:
            records.append(StepRecord(epoch=int(row[0]), step=int(row[1]), loss=float(row[2])))
        except ValueError:
            raise TraceFormatError(f"{path}:{lineno}: non-numeric field in {row!r}") from None
    return records
