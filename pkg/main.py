import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from pydantic import ValidationError

from src.newsclf.cli import (
    cmd_eval,
    cmd_gradcheck,
    cmd_plot,
    cmd_predict,
    cmd_pretrain,
    cmd_prepare,
    cmd_train,
)
from src.newsclf.errors import NewsClfError
from src.newsclf.models.config import ARCHITECTURES
from src.newsclf.yaml_config import NewsClfSettings, RunConfig, load_config
from src.utils.logger import configure_logging, get_logger

logger = get_logger("main")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="News text classification with Bi-LSTM + attention")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], default=None)
    parser.add_argument("--log-file", type=Path, default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    # prepare
    prepare = sub.add_parser("prepare", help="Select categories, split train/test, build the vocabulary")
    prepare.add_argument("--data", type=Path, required=True, help="HuffPost JSON-lines file")
    prepare.add_argument("--out-dir", type=Path, required=True)
    prepare.add_argument("--classes", type=str, default=None, help="Count of most frequent categories, or a comma list")
    prepare.add_argument("--test-fraction", type=float, default=None)
    prepare.add_argument("--max-malformed", dest="max_malformed_fraction", type=float, default=None)
    prepare.add_argument("--min-count", type=int, default=None)
    prepare.add_argument("--max-vocab", type=int, default=None)
    prepare.add_argument("--seed", type=int, default=None)
    prepare.add_argument("--config", type=Path, default=None, help="Flat YAML run configuration")

    # pretrain
    pretrain = sub.add_parser("pretrain", help="Skip-gram embedding pretraining")
    pretrain.add_argument("--data", type=Path, required=True, help="Prepared train split")
    pretrain.add_argument("--vocab", type=Path, default=None, help="Defaults to vocab.txt beside --data")
    pretrain.add_argument("--out", type=Path, required=True)
    pretrain.add_argument("--dim", type=int, default=None)
    pretrain.add_argument("--window", type=int, default=None)
    pretrain.add_argument("--negatives", type=int, default=None)
    pretrain.add_argument("--epochs", dest="pretrain_epochs", type=int, default=None)
    pretrain.add_argument("--seed", type=int, default=None)
    pretrain.add_argument("--config", type=Path, default=None)

    # train
    train = sub.add_parser("train", help="Train one architecture")
    train.add_argument("--data-dir", type=Path, required=True, help="Output directory of 'prepare'")
    train.add_argument("--out", type=Path, required=True, help="Checkpoint path")
    train.add_argument("--trace", type=Path, default=None, help="Step-loss CSV (default: <out>.loss.csv)")
    train.add_argument("--arch", choices=ARCHITECTURES, default=None)
    train.add_argument("--epochs", type=int, default=None)
    train.add_argument("--batch-size", type=int, default=None)
    train.add_argument("--lr", type=float, default=None)
    train.add_argument("--dropout", type=float, default=None)
    train.add_argument("--lam", type=float, default=None, help="L2 weight")
    train.add_argument("--hidden", type=int, default=None)
    train.add_argument("--dim", type=int, default=None, help="Embedding dimension")
    train.add_argument("--max-len", type=int, default=None)
    train.add_argument("--embed", type=str, default=None, help="Embedding file, or 'random'")
    train.add_argument("--freeze-embed", action=argparse.BooleanOptionalAction, default=None)
    train.add_argument("--graph", action=argparse.BooleanOptionalAction, default=None)
    train.add_argument("--loss", choices=["ce", "mse"], default=None)
    train.add_argument("--restarts", type=int, default=None)
    train.add_argument("--seed", type=int, default=None)
    train.add_argument("--threads", type=int, default=None)
    train.add_argument("--config", type=Path, default=None)

    # eval
    ev = sub.add_parser("eval", help="Compare checkpoints on a test split")
    ev.add_argument("--ckpt", type=Path, nargs="+", required=True)
    ev.add_argument("--data", type=Path, required=True)
    ev.add_argument("--average", choices=["macro", "micro"], default="macro")
    ev.add_argument("--csv", type=Path, default=None)
    ev.add_argument("--threads", type=int, default=None)

    # predict
    pred = sub.add_parser("predict", help="Classify one text")
    pred.add_argument("--ckpt", type=Path, required=True)
    pred.add_argument("--text", type=str, required=True)
    pred.add_argument("--show-attention", action="store_true")

    # gradcheck
    gc = sub.add_parser("gradcheck", help="Finite-difference check of every backward pass")
    gc.add_argument("--arch", choices=ARCHITECTURES, default=None, help="Omit to check all six")
    gc.add_argument("--seed", type=int, default=0)
    gc.add_argument("--seeds", type=int, default=1, help="Number of consecutive seeds")
    gc.add_argument("--threads", type=int, default=None)

    # plot
    plot = sub.add_parser("plot", help="Render a step-loss trace as SVG")
    plot.add_argument("--trace", type=Path, required=True)
    plot.add_argument("--out", type=Path, required=True)

    return parser


_RUN_KEYS = tuple(RunConfig.model_fields)


def _run_config(args: argparse.Namespace) -> RunConfig:
    overrides = {k: v for k, v in vars(args).items() if k in _RUN_KEYS}
    config = load_config(args.config).with_overrides(overrides)
    print("\n".join(config.echo()))
    print()
    return config


def dispatch(args: argparse.Namespace, settings: NewsClfSettings) -> str:
    threads = getattr(args, "threads", None) or settings.threads
    if args.command == "prepare":
        return cmd_prepare(args.data, args.out_dir, _run_config(args))
    if args.command == "pretrain":
        return cmd_pretrain(args.data, args.out, args.vocab, _run_config(args))
    if args.command == "train":
        return cmd_train(args.data_dir, args.out, args.trace, _run_config(args), threads)
    if args.command == "eval":
        return cmd_eval(args.ckpt, args.data, args.average, args.csv, threads)
    if args.command == "predict":
        return cmd_predict(args.ckpt, args.text, args.show_attention)
    if args.command == "gradcheck":
        return cmd_gradcheck(args.arch, args.seed, args.seeds, threads)
    return cmd_plot(args.trace, args.out)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand; returns the exit code (0 ok, 1 check failed, 2 bad input, 3 diverged)."""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        settings = NewsClfSettings()
    except ValidationError as e:
        print(f"error: invalid NEWSCLF_* environment: {e}", file=sys.stderr)
        return 2
    configure_logging(level=args.log_level or settings.log_level, log_file=args.log_file)
    try:
        print(dispatch(args, settings))
    except NewsClfError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
