"""Training loop, evaluation and seeded restarts.

One optimizer step per mini-batch: zero gradients, train-mode forward,
backward of the regularised loss, Adam. After each epoch the model is
scored in eval mode and a checkpoint is written whenever eval macro-F1
strictly improves, so ties keep the earlier epoch. The returned model
carries the best epoch's parameters.
"""

from __future__ import annotations

import math
import shutil
from functools import partial
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import anyio
import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.newsclf.errors import DivergenceError, EmptyDatasetError, NumericError, ParameterError
from src.newsclf.metrics import MetricsReport, confusion, precision_recall_f1
from src.newsclf.models.checkpoint import save_checkpoint
from src.newsclf.models.config import ModelConfig
from src.newsclf.models.network import Model, backward, build_model, forward
from src.newsclf.tensor import Tensor, make_rng
from src.newsclf.text.batching import Example, batch_iter, make_batch
from src.newsclf.text.vocab import Vocabulary
from src.newsclf.training.adam import AdamState, adam_step
from src.newsclf.training.trace import (
    EpochRecord,
    LossTrace,
    StepRecord,
    TraceWriter,
    epoch_trace_path,
)
from src.utils.logger import get_logger

logger = get_logger("trainer")

EVAL_CHUNK = 64


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(default=10, ge=1)
    batch_size: int = Field(default=32, ge=1)
    lr: float = Field(default=1e-3, gt=0.0)
    seed: int = 0
    checkpoint_path: Optional[Path] = None
    trace_path: Optional[Path] = None
    restarts: int = Field(default=1, ge=1)
    threads: int = Field(default=1, ge=1)


class TrainResult(NamedTuple):
    model: Model
    trace: LossTrace
    best_epoch: int
    best_f1: float
    checkpoint_path: Optional[Path]


class Evaluation(NamedTuple):
    report: MetricsReport
    probs: Tensor
    preds: np.ndarray


# ── evaluation ───────────────────────────────────────────────────────────


def _probs_chunk(model: Model, examples: Sequence[Example]) -> Tensor:
    batch = make_batch(examples, model.config.num_classes)
    return forward(model, batch, "eval").probs


async def _probs_parallel(model: Model, chunks: list[Sequence[Example]], threads: int) -> list[Tensor]:
    out: list[Optional[Tensor]] = [None] * len(chunks)
    limiter = anyio.CapacityLimiter(threads)

    async def run(i: int) -> None:
        out[i] = await anyio.to_thread.run_sync(partial(_probs_chunk, model, chunks[i]), limiter=limiter)

    async with anyio.create_task_group() as tg:
        for i in range(len(chunks)):
            tg.start_soon(run, i)
    return [p for p in out if p is not None]


def predict_probs(model: Model, examples: Sequence[Example], threads: int = 1) -> Tensor:
    """Eval-mode probabilities [N×K]; with threads > 1 chunks run on worker threads, reassembled in order."""
    if not examples:
        raise EmptyDatasetError("nothing to evaluate")
    chunks = [examples[i:i + EVAL_CHUNK] for i in range(0, len(examples), EVAL_CHUNK)]
    if threads > 1 and len(chunks) > 1:
        parts = anyio.run(_probs_parallel, model, chunks, threads)
    else:
        parts = [_probs_chunk(model, c) for c in chunks]
    return np.vstack(parts)


def evaluate(model: Model, examples: Sequence[Example], threads: int = 1) -> Evaluation:
    probs = predict_probs(model, examples, threads)
    preds = np.argmax(probs, axis=1)
    cm = confusion(preds, [e.label for e in examples], model.config.num_classes)
    return Evaluation(report=precision_recall_f1(cm), probs=probs, preds=preds)


# ── training ─────────────────────────────────────────────────────────────


def train(
    model: Model,
    train_set: Sequence[Example],
    eval_set: Sequence[Example],
    config: TrainConfig,
    vocab: Optional[Vocabulary] = None,
    categories: Optional[Sequence[str]] = None,
    run: Optional[dict[str, str]] = None,
) -> TrainResult:
    if not train_set:
        raise EmptyDatasetError("training set is empty")
    if config.checkpoint_path is not None and vocab is None:
        raise ParameterError("writing checkpoints needs the vocabulary")
    if not eval_set:
        logger.warning("⚠️ eval set is empty; scoring epochs on the training set")
        eval_set = train_set
    labels = list(categories) if categories is not None else [str(k) for k in range(model.config.num_classes)]

    num_classes = model.config.num_classes
    dropout_rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(config.seed).spawn(1)[0]))
    state = AdamState(lr=config.lr)
    trace = LossTrace()
    steps_per_epoch = math.ceil(len(train_set) / config.batch_size)
    best_f1, best_epoch = -math.inf, 0
    best_params = model.params.snapshot()
    last_good: Optional[Path] = None
    step = 0

    with TraceWriter(config.trace_path) as writer:
        for epoch in range(1, config.epochs + 1):
            losses: list[float] = []
            for batch in batch_iter(train_set, config.batch_size, num_classes, shuffle=True, seed=config.seed + epoch):
                step += 1
                model.params.zero_grad()
                try:
                    result = forward(model, batch, "train", dropout_rng)
                    loss = backward(model, result.caches, result.probs, batch.labels)
                    if not math.isfinite(loss):
                        raise NumericError(f"loss is {loss}")
                    adam_step(model.params, None, state)
                except NumericError as e:
                    logger.error(f"❌ non-finite values at epoch {epoch} step {step}: {e}")
                    raise DivergenceError(
                        f"training diverged at epoch {epoch}, step {step}: {e}"
                        + (f"; last good checkpoint: {last_good}" if last_good else ""),
                        checkpoint_path=last_good,
                    ) from e
                rec = StepRecord(epoch=epoch, step=step, loss=loss)
                trace.steps.append(rec)
                writer.step(rec)
                losses.append(loss)

            scored = evaluate(model, eval_set, config.threads).report
            epoch_rec = EpochRecord(
                epoch=epoch,
                train_loss=float(np.mean(losses)),
                precision=scored.macro_precision,
                recall=scored.macro_recall,
                f1=scored.macro_f1,
            )
            trace.epochs.append(epoch_rec)
            writer.epoch(epoch_rec)
            logger.info(
                f"epoch {epoch}/{config.epochs}: train_loss={epoch_rec.train_loss:.4f} "
                f"P={epoch_rec.precision:.3f} R={epoch_rec.recall:.3f} F1={epoch_rec.f1:.3f} "
                f"({steps_per_epoch} steps)"
            )

            if scored.macro_f1 > best_f1:
                best_f1, best_epoch = scored.macro_f1, epoch
                best_params = model.params.snapshot()
                if config.checkpoint_path is not None and vocab is not None:
                    last_good = save_checkpoint(
                        config.checkpoint_path, model, vocab, labels, {**(run or {}), "epoch": str(epoch)}
                    )
                    logger.info(f"✅ checkpoint written to {last_good} (epoch {epoch}, F1 {best_f1:.3f})")

    model.params.restore(best_params)
    return TrainResult(model=model, trace=trace, best_epoch=best_epoch, best_f1=best_f1, checkpoint_path=last_good)


def with_restart_suffix(path: Optional[Path], restart: int) -> Optional[Path]:
    """``model.ntc`` → ``model.r2.ntc`` for restart 2."""
    if path is None:
        return None
    return path.with_name(f"{path.stem}.r{restart}{path.suffix}")


def train_with_restarts(
    model_config: ModelConfig,
    train_set: Sequence[Example],
    eval_set: Sequence[Example],
    config: TrainConfig,
    vocab: Optional[Vocabulary] = None,
    categories: Optional[Sequence[str]] = None,
    run: Optional[dict[str, str]] = None,
) -> TrainResult:
    """Train ``config.restarts`` models with seeds seed, seed+1, …; keep the best by eval macro-F1.

    With more than one restart every run writes suffixed artifacts and the
    winner's checkpoint and traces are copied to the unsuffixed paths.
    """
    best: Optional[TrainResult] = None
    best_restart = 0
    for r in range(config.restarts):
        seed = config.seed + r
        multi = config.restarts > 1
        run_config = config.model_copy(
            update={
                "seed": seed,
                "checkpoint_path": with_restart_suffix(config.checkpoint_path, r) if multi else config.checkpoint_path,
                "trace_path": with_restart_suffix(config.trace_path, r) if multi else config.trace_path,
            }
        )
        mcfg = model_config.model_copy(update={"seed": seed})
        model = build_model(mcfg, make_rng(seed))
        if multi:
            logger.info(f"restart {r + 1}/{config.restarts} (seed {seed})")
        result = train(model, train_set, eval_set, run_config, vocab, categories, run)
        if best is None or result.best_f1 > best.best_f1:
            best, best_restart = result, r

    assert best is not None
    if config.restarts > 1:
        logger.info(f"✅ best restart: {best_restart} (F1 {best.best_f1:.3f})")
        if best.checkpoint_path is not None and config.checkpoint_path is not None:
            shutil.copyfile(best.checkpoint_path, config.checkpoint_path)
            best = best._replace(checkpoint_path=config.checkpoint_path)
        src_trace = with_restart_suffix(config.trace_path, best_restart)
        if src_trace is not None and config.trace_path is not None:
            shutil.copyfile(src_trace, config.trace_path)
            shutil.copyfile(epoch_trace_path(src_trace), epoch_trace_path(config.trace_path))
    return best
