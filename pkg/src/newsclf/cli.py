from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from src.newsclf.embeddings.sgns import sgns_train
from src.newsclf.embeddings.store import save_embeddings
from src.newsclf.errors import ConfigError, GradientCheckError, IngestionError
from src.newsclf.gradcheck import run_suite
from src.newsclf.metrics import Average, report
from src.newsclf.models.checkpoint import load_checkpoint
from src.newsclf.models.network import predict
from src.newsclf.plot import plot_trace
from src.newsclf.text.batching import encode_records
from src.newsclf.text.huffpost import (
    NewsRecord,
    assign_labels,
    load_huffpost,
    read_categories,
    read_split,
    top_categories,
    write_categories,
    write_split,
)
from src.newsclf.text.split import stratified_split
from src.newsclf.text.tokenizer import tokenize
from src.newsclf.text.vocab import Vocabulary, build_vocab
from src.newsclf.training.trainer import evaluate, train_with_restarts
from src.newsclf.yaml_config import RunConfig
from src.utils.logger import get_logger

logger = get_logger("cli")

TRAIN_FILE = "train.jsonl"
TEST_FILE = "test.jsonl"
VOCAB_FILE = "vocab.txt"
CATEGORIES_FILE = "categories.txt"
SUMMARY_FILE = "summary.txt"

PathLike = Union[str, Path]


def parse_classes(classes: str) -> Union[int, list[str]]:
    """``"4"`` → keep the 4 most frequent categories; ``"A,B"`` → exactly those, in that order."""
    classes = classes.strip()
    if classes.isdigit():
        n = int(classes)
        if n < 1:
            raise ConfigError(f"--classes must be >= 1, got {n}")
        return n
    names = [name.strip() for name in classes.split(",") if name.strip()]
    if not names:
        raise ConfigError("--classes needs a count or a comma-separated category list")
    if len(set(names)) != len(names):
        raise ConfigError(f"--classes lists a category twice: {classes}")
    return names


def _summary(categories: Sequence[str], train: Sequence[NewsRecord], test: Sequence[NewsRecord], vocab: Vocabulary) -> str:
    width = max([len("category")] + [len(c) for c in categories])
    lines = [
        f"categories: {len(categories)}",
        f"{'category':<{width}}  {'label':>5}  {'train':>7}  {'test':>7}",
    ]
    train_counts = np.bincount([r.label for r in train], minlength=len(categories))
    test_counts = np.bincount([r.label for r in test], minlength=len(categories))
    for k, name in enumerate(categories):
        lines.append(f"{name:<{width}}  {k:>5}  {train_counts[k]:>7}  {test_counts[k]:>7}")
    lines.append(f"{'total':<{width}}  {'':>5}  {len(train):>7}  {len(test):>7}")
    lines.append(f"vocabulary: {len(vocab)} entries")
    return "\n".join(lines)


def cmd_prepare(data: PathLike, out_dir: PathLike, config: Optional[RunConfig] = None) -> str:
    """Select categories, split stratified, build the vocabulary from the train side and write everything."""
    config = config or RunConfig()
    out_dir = Path(out_dir)
    wanted = parse_classes(config.classes)
    records = load_huffpost(
        data,
        categories=wanted if isinstance(wanted, list) else None,
        max_malformed_fraction=config.max_malformed_fraction,
    )
    if isinstance(wanted, int):
        categories = top_categories(records, wanted)
        if len(categories) < wanted:
            logger.warning(f"⚠️ only {len(categories)} categories present, {wanted} requested")
    else:
        present = {r.category for r in records}
        missing = [c for c in wanted if c not in present]
        if missing:
            raise IngestionError(f"categories not found in {data}: {', '.join(missing)}")
        categories = wanted

    labeled = assign_labels(records, categories)
    train, test = stratified_split(labeled, config.test_fraction, config.seed)
    vocab = build_vocab((tokenize(r.text) for r in train), config.min_count, config.max_vocab)

    out_dir.mkdir(parents=True, exist_ok=True)
    write_split(out_dir / TRAIN_FILE, train)
    write_split(out_dir / TEST_FILE, test)
    vocab.save(out_dir / VOCAB_FILE)
    write_categories(out_dir / CATEGORIES_FILE, categories)
    summary = _summary(categories, train, test, vocab)
    (out_dir / SUMMARY_FILE).write_text(summary + "\n", encoding="utf-8")
    logger.info(f"✅ prepared {len(train)} train / {len(test)} test records in {out_dir}")
    return summary


def cmd_pretrain(
    data: PathLike,
    out: PathLike,
    vocab_path: Optional[PathLike] = None,
    config: Optional[RunConfig] = None,
) -> str:
    """Skip-gram pretraining over a prepared split; the vocabulary defaults to the one beside *data*."""
    config = config or RunConfig()
    data = Path(data)
    vocab = Vocabulary.load(vocab_path if vocab_path is not None else data.parent / VOCAB_FILE)
    records = read_split(data)
    corpus = [np.array([vocab.id_of(t) for t in tokenize(r.text)], dtype=np.int64) for r in records]
    result = sgns_train(corpus, len(vocab), config.sgns_config())
    save_embeddings(out, result.table, vocab)
    lines = [f"epoch {i}: loss {loss:.6f}" for i, loss in enumerate(result.epoch_losses, start=1)]
    lines.append(f"wrote {len(vocab)}×{result.table.shape[1]} embeddings to {out}")
    return "\n".join(lines)


def default_trace_path(checkpoint: PathLike) -> Path:
    """``model.ntc`` → ``model.loss.csv``."""
    p = Path(checkpoint)
    return p.with_name(f"{p.stem}.loss.csv")


def cmd_train(
    data_dir: PathLike,
    out: PathLike,
    trace: Optional[PathLike] = None,
    config: Optional[RunConfig] = None,
    threads: int = 1,
) -> str:
    """Train on ``train.jsonl``, select epochs on ``test.jsonl``, write checkpoint and traces."""
    config = config or RunConfig()
    data_dir = Path(data_dir)
    vocab = Vocabulary.load(data_dir / VOCAB_FILE)
    categories = read_categories(data_dir / CATEGORIES_FILE)
    model_config = config.model_config_for(len(vocab), len(categories))
    train_set = encode_records(read_split(data_dir / TRAIN_FILE), vocab, model_config.max_len)
    eval_set = encode_records(read_split(data_dir / TEST_FILE), vocab, model_config.max_len)
    trace_path = Path(trace) if trace is not None else default_trace_path(out)
    train_config = config.train_config(Path(out), trace_path, threads)

    result = train_with_restarts(
        model_config, train_set, eval_set, train_config, vocab, categories, run=config.pairs()
    )
    final = evaluate(result.model, eval_set, threads).report
    lines = [
        f"best epoch: {result.best_epoch} (eval macro-F1 {result.best_f1:.3f})",
        f"checkpoint: {result.checkpoint_path}",
        f"trace: {trace_path}",
        "",
        report([(config.arch, final)]).text,
    ]
    return "\n".join(lines)


def _checkpoint_name(path: Path, arch: str) -> str:
    return arch if path.stem == arch else f"{path.stem} ({arch})"


def cmd_eval(
    checkpoints: Sequence[PathLike],
    data: PathLike,
    average: Average = "macro",
    csv_out: Optional[PathLike] = None,
    threads: int = 1,
) -> str:
    """One comparison row per checkpoint over the same test split."""
    records = read_split(data)
    rows = []
    for path in map(Path, checkpoints):
        ckpt = load_checkpoint(path)
        labeled = assign_labels(records, ckpt.categories)
        if len(labeled) < len(records):
            logger.warning(f"⚠️ {len(records) - len(labeled)} records have categories unknown to {path.name}")
        examples = encode_records(labeled, ckpt.vocab, ckpt.model.config.max_len)
        rows.append((_checkpoint_name(path, ckpt.model.config.arch), evaluate(ckpt.model, examples, threads).report))
    rendered = report(rows, average)
    if csv_out is not None:
        Path(csv_out).parent.mkdir(parents=True, exist_ok=True)
        Path(csv_out).write_text(rendered.csv, encoding="utf-8")
    return f"{rendered.text}\n\n{rendered.csv.rstrip()}"


def cmd_predict(checkpoint: PathLike, text: str, show_attention: bool = False) -> str:
    ckpt = load_checkpoint(checkpoint)
    pred = predict(ckpt.model, text, ckpt.vocab, ckpt.categories)
    names = ckpt.categories or [str(k) for k in range(len(pred.probs))]
    width = max(len(n) for n in names)
    lines = [f"label: {pred.category if pred.category is not None else pred.label}", "probabilities:"]
    lines += [f"  {name:<{width}}  {p:.4f}" for name, p in zip(names, pred.probs)]
    if show_attention:
        if pred.alpha is None:
            lines.append(f"attention not available for {ckpt.model.config.arch} models")
        else:
            lines.append("attention:")
            lines.append("  " + " ".join(f"{tok}:{w:.4f}" for tok, w in zip(pred.tokens, pred.alpha)))
    return "\n".join(lines)


def cmd_gradcheck(arch: Optional[str] = None, seed: int = 0, seeds: int = 1, threads: int = 1) -> str:
    """Run the finite-difference suite; a failing check raises GradientCheckError carrying the report."""
    suite = run_suite([arch] if arch else None, range(seed, seed + seeds), threads=threads)
    parts = [suite.summary()]
    if arch:
        parts += [suite.table(check) for check in suite.checks() if check.startswith("model:")]
    text = "\n\n".join(parts)
    if not suite.passed:
        raise GradientCheckError(f"{text}\n\ngradient check FAILED (worst rel_err {suite.worst():.3e})")
    return f"{text}\n\nall gradient checks passed (worst rel_err {suite.worst():.3e})"


def cmd_plot(trace: PathLike, out: PathLike) -> str:
    path = plot_trace(trace, out)
    return f"wrote {path}"
