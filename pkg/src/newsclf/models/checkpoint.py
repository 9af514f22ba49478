"""NTC1 checkpoint files.

Layout::

    NTC1
    config.<key>=<value>        one per ModelConfig field
    run.<key>=<value>           effective run settings (informational)
    label.<i>=<category>
    vocab.<id>=<token>
    param.<name>=<d1>x<d2>...   manifest, in parameter enumeration order
    end
    <little-endian float64 values of every parameter, manifest order>

The loader rebuilds the model from the config lines and requires the
manifest to match it exactly.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from src.newsclf.errors import CheckpointError, ConfigError, VocabularyError
from src.newsclf.models.config import ModelConfig, from_pairs, to_pairs
from src.newsclf.models.network import Model, build_model
from src.newsclf.tensor import make_rng
from src.newsclf.text.vocab import Vocabulary
from src.utils.logger import get_logger

logger = get_logger("checkpoint")

MAGIC = b"NTC1\n"
END = b"end\n"
FLOAT = np.dtype("<f8")


@dataclass
class Checkpoint:
    model: Model
    vocab: Vocabulary
    categories: list[str]
    run: dict[str, str] = field(default_factory=dict)


def _shape_text(shape: tuple[int, ...]) -> str:
    return "x".join(str(d) for d in shape)


def encode_checkpoint(
    model: Model,
    vocab: Vocabulary,
    categories: Sequence[str],
    run: Optional[dict[str, str]] = None,
) -> bytes:
    lines = [f"config.{k}={v}" for k, v in to_pairs(model.config)]
    lines += [f"run.{k}={v}" for k, v in (run or {}).items()]
    lines += [f"label.{i}={name}" for i, name in enumerate(categories)]
    lines += [f"vocab.{i}={tok}" for i, tok in enumerate(vocab.tokens)]
    lines += [f"param.{name}={_shape_text(shape)}" for name, shape in model.params.shapes().items()]
    broken = next((line for line in lines if "\n" in line or "\r" in line), None)
    if broken is not None:
        raise CheckpointError(f"header entry contains a line break: {broken!r}")
    header = ("\n".join(lines) + "\n").encode("utf-8")
    body = b"".join(model.params[name].astype(FLOAT).tobytes(order="C") for name in model.params.names())
    return MAGIC + header + END + body


def save_checkpoint(
    path: Union[str, Path],
    model: Model,
    vocab: Vocabulary,
    categories: Sequence[str],
    run: Optional[dict[str, str]] = None,
) -> Path:
    """Write the checkpoint atomically (temp file + rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(encode_checkpoint(model, vocab, categories, run))
    os.replace(tmp, path)
    return path


def _split_header(data: bytes, source: str) -> tuple[list[str], bytes]:
    if not data.startswith(MAGIC):
        raise CheckpointError(f"{source}: not an NTC1 checkpoint (bad magic)")
    cursor = len(MAGIC)
    lines: list[str] = []
    while True:
        nl = data.find(b"\n", cursor)
        if nl < 0:
            raise CheckpointError(f"{source}: truncated header (no 'end' line)")
        raw = data[cursor:nl + 1]
        cursor = nl + 1
        if raw == END:
            return lines, data[cursor:]
        try:
            lines.append(raw[:-1].decode("utf-8"))
        except UnicodeDecodeError:
            raise CheckpointError(f"{source}: header is not valid UTF-8") from None


def decode_checkpoint(data: bytes, source: str = "<bytes>") -> Checkpoint:
    header, body = _split_header(data, source)
    config_pairs: list[tuple[str, str]] = []
    run: dict[str, str] = {}
    labels: dict[int, str] = {}
    tokens: dict[int, str] = {}
    manifest: list[tuple[str, str]] = []
    for lineno, line in enumerate(header, start=2):
        key, sep, value = line.partition("=")
        section, _, name = key.partition(".")
        if not sep or not name:
            raise CheckpointError(f"{source}:{lineno}: malformed header line {line!r}")
        if section == "config":
            config_pairs.append((name, value))
        elif section == "run":
            run[name] = value
        elif section in ("label", "vocab"):
            try:
                index = int(name)
            except ValueError:
                raise CheckpointError(f"{source}:{lineno}: non-integer {section} index {name!r}") from None
            (labels if section == "label" else tokens)[index] = value
        elif section == "param":
            manifest.append((name, value))
        else:
            raise CheckpointError(f"{source}:{lineno}: unknown header section '{section}'")

    try:
        config = from_pairs(ModelConfig, config_pairs)
        model = build_model(config, make_rng(config.seed), pretrained=False)
        vocab = Vocabulary(tokens=[tokens[i] for i in range(len(tokens))], counts=[0] * len(tokens))
    except (ConfigError, VocabularyError, KeyError) as e:
        raise CheckpointError(f"{source}: inconsistent header: {e}") from None

    expected = [(name, _shape_text(shape)) for name, shape in model.params.shapes().items()]
    if manifest != expected:
        raise CheckpointError(f"{source}: parameter manifest does not match the configured {config.arch} model")
    if len(vocab) != config.vocab_size:
        raise CheckpointError(f"{source}: {len(vocab)} vocabulary entries, config says {config.vocab_size}")

    needed = model.params.count() * FLOAT.itemsize
    if len(body) < needed:
        raise CheckpointError(f"{source}: truncated body ({len(body)} of {needed} bytes)")
    if len(body) > needed:
        raise CheckpointError(f"{source}: {len(body) - needed} unexpected trailing bytes")
    values = np.frombuffer(body, dtype=FLOAT)
    offset = 0
    for name in model.params.names():
        slot = model.params[name]
        slot[...] = values[offset:offset + slot.size].reshape(slot.shape)
        offset += slot.size

    categories = [labels[i] for i in sorted(labels)]
    return Checkpoint(model=model, vocab=vocab, categories=categories, run=run)


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"{path}: cannot read checkpoint: {e}") from e
    return decode_checkpoint(data, source=str(path))
