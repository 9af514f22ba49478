from __future__ import annotations

from pathlib import Path
from typing import Any, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.newsclf.embeddings.sgns import SgnsConfig
from src.newsclf.errors import ConfigError
from src.newsclf.models.config import ModelConfig, encode_value, validate_config
from src.newsclf.training.trainer import TrainConfig
from src.utils.logger import LogLevel, get_logger

logger = get_logger("config")


class NewsClfSettings(BaseSettings):
    """Process environment: ``NEWSCLF_THREADS`` and ``NEWSCLF_LOG_LEVEL``."""

    threads: int = Field(default=1, ge=1)
    log_level: LogLevel = "INFO"

    model_config = SettingsConfigDict(env_prefix="NEWSCLF_")


class RunConfig(BaseModel):
    """Every tunable of the experiment protocol in one flat mapping.

    Defaults mirror the library defaults (lr 0.001, 10 epochs, dropout 0.5,
    embedding dimension 200). Values come from an optional YAML file and are
    overridden by command-line flags.
    """

    model_config = ConfigDict(extra="forbid")

    seed: int = 0

    # prepare
    classes: str = "4"
    test_fraction: float = Field(default=0.2, gt=0.0, lt=1.0)
    max_malformed_fraction: float = Field(default=0.1, ge=0.0, le=1.0)
    min_count: int = Field(default=1, ge=1)
    max_vocab: int = Field(default=50_000, ge=2)

    # pretrain
    dim: int = Field(default=200, ge=1)
    window: int = Field(default=5, ge=1)
    negatives: int = Field(default=5, ge=1)
    pretrain_epochs: int = Field(default=5, ge=1)
    pretrain_lr: float = Field(default=0.025, gt=0.0)
    subsample: float = Field(default=1e-3, ge=0.0)

    # train
    arch: Literal["rnn", "cnn", "lstm", "bilstm", "attn", "bilstm-attn"] = "bilstm-attn"
    epochs: int = Field(default=10, ge=1)
    batch_size: int = Field(default=32, ge=1)
    lr: float = Field(default=1e-3, gt=0.0)
    dropout: float = Field(default=0.5, ge=0.0, lt=1.0)
    lam: float = Field(default=1e-4, ge=0.0)
    hidden: int = Field(default=128, ge=1)
    max_len: int = Field(default=64, ge=1)
    attention_dim: Optional[int] = Field(default=None, ge=1)
    embed: str = "random"
    freeze_embed: bool = False
    graph: bool = False
    loss: Literal["ce", "mse"] = "ce"
    conv_widths: list[int] = Field(default_factory=lambda: [3, 4, 5])
    conv_filters: int = Field(default=64, ge=1)
    restarts: int = Field(default=1, ge=1)

    @field_validator("classes", mode="before")
    @classmethod
    def _classes_text(cls, value: Any) -> Any:
        return str(value) if isinstance(value, int) and not isinstance(value, bool) else value

    @field_validator("conv_widths", mode="before")
    @classmethod
    def _split_widths(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [int(v) for v in value.split(",") if v.strip()]
        if isinstance(value, int):
            return [value]
        return value

    def with_overrides(self, overrides: dict[str, Any]) -> "RunConfig":
        """Apply flag values; ``None`` means the flag was not given."""
        given = {k: v for k, v in overrides.items() if v is not None}
        return validate_config(RunConfig, {**self.model_dump(), **given})

    def echo(self) -> list[str]:
        """``key=value`` lines, in field order; feeding them back reproduces the config."""
        return [f"{name}={encode_value(getattr(self, name))}" for name in type(self).model_fields]

    def pairs(self) -> dict[str, str]:
        return {name: encode_value(getattr(self, name)) for name in type(self).model_fields}

    # ── views for the library configs ───────────────────────────────────

    def model_config_for(self, vocab_size: int, num_classes: int) -> ModelConfig:
        return validate_config(
            ModelConfig,
            dict(
                arch=self.arch,
                vocab_size=vocab_size,
                embed_dim=self.dim,
                hidden=self.hidden,
                num_classes=num_classes,
                max_len=self.max_len,
                dropout=self.dropout,
                lam=self.lam,
                seed=self.seed,
                attention_dim=self.attention_dim,
                embed_init=self.embed,
                embed_trainable=not self.freeze_embed,
                graph=self.graph,
                conv_widths=self.conv_widths,
                conv_filters=self.conv_filters,
                loss=self.loss,
            ),
        )

    def train_config(
        self, checkpoint_path: Optional[Path], trace_path: Optional[Path], threads: int = 1
    ) -> TrainConfig:
        return validate_config(
            TrainConfig,
            dict(
                epochs=self.epochs,
                batch_size=self.batch_size,
                lr=self.lr,
                seed=self.seed,
                checkpoint_path=checkpoint_path,
                trace_path=trace_path,
                restarts=self.restarts,
                threads=threads,
            ),
        )

    def sgns_config(self) -> SgnsConfig:
        return validate_config(
            SgnsConfig,
            dict(
                dim=self.dim,
                window=self.window,
                negatives=self.negatives,
                epochs=self.pretrain_epochs,
                lr=self.pretrain_lr,
                subsample=self.subsample,
                seed=self.seed,
            ),
        )


def load_config(path: Optional[Union[str, Path]]) -> RunConfig:
    """Read a flat YAML mapping of scalars; no path gives the defaults.

    Unlike a best-effort settings file, any problem here is fatal: a run
    must not silently fall back to defaults the user did not ask for.
    """
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, encoding="utf-8") as f:
            raw = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        logger.error(f"❌ Invalid YAML in {path}: {e}")
        raise ConfigError(f"invalid YAML in {path}: {e}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a key/value mapping, got {type(raw).__name__}")
    nested = [k for k, v in raw.items() if isinstance(v, (dict, list))]
    if nested:
        raise ConfigError(f"{path}: values must be scalars, got nested value for {', '.join(map(str, nested))}")
    unknown = sorted(str(k) for k in raw if str(k) not in RunConfig.model_fields)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s): {', '.join(unknown)}")
    return validate_config(RunConfig, {str(k): v for k, v in raw.items()})


def save_config(config: RunConfig, path: Union[str, Path]) -> None:
    """Write *config* as a flat YAML mapping that ``load_config`` reads back unchanged."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = config.model_dump()
    data["conv_widths"] = encode_value(config.conv_widths)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(data, f, default_flow_style=False, sort_keys=False, allow_unicode=True)
