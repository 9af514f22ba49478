from __future__ import annotations

from typing import Any, Iterable, Literal, Optional, Type, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.newsclf.errors import ConfigError

ARCHITECTURES: tuple[str, ...] = ("rnn", "cnn", "lstm", "bilstm", "attn", "bilstm-attn")

M = TypeVar("M", bound=BaseModel)


class ModelConfig(BaseModel):
    """Everything that determines a model's parameter shapes and forward behaviour."""

    model_config = ConfigDict(extra="forbid")

    arch: str = "bilstm-attn"
    vocab_size: int = Field(default=2, ge=2)
    embed_dim: int = Field(default=200, ge=1)
    hidden: int = Field(default=128, ge=1)
    num_classes: int = Field(default=4, ge=1)
    max_len: int = Field(default=64, ge=1)
    dropout: float = Field(default=0.5, ge=0.0, lt=1.0)
    lam: float = Field(default=1e-4, ge=0.0)
    seed: int = 0
    attention_dim: Optional[int] = Field(default=None, ge=1)
    embed_init: str = "random"
    embed_trainable: bool = True
    graph: bool = False
    conv_widths: list[int] = Field(default_factory=lambda: [3, 4, 5])
    conv_filters: int = Field(default=64, ge=1)
    loss: Literal["ce", "mse"] = "ce"

    @property
    def attn_dim(self) -> int:
        return self.attention_dim if self.attention_dim is not None else 2 * self.hidden


# ── flat key=value encoding (checkpoint headers, config echo) ─────────────


def encode_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(encode_value(v) for v in value)
    return str(value)


def to_pairs(config: BaseModel) -> list[tuple[str, str]]:
    return [(name, encode_value(getattr(config, name))) for name in type(config).model_fields]


def _is_list_field(model: Type[BaseModel], name: str) -> bool:
    annotation = model.model_fields[name].annotation
    return getattr(annotation, "__origin__", None) is list


def from_pairs(model: Type[M], pairs: Iterable[tuple[str, str]]) -> M:
    """Rebuild *model* from ``to_pairs`` output; unknown keys and bad values raise ConfigError."""
    raw: dict[str, Any] = {}
    for key, value in pairs:
        if key not in model.model_fields:
            raise ConfigError(f"unknown {model.__name__} key '{key}'")
        if _is_list_field(model, key):
            raw[key] = [v for v in value.split(",") if v]
        elif value == "" and model.model_fields[key].default is None:
            raw[key] = None
        else:
            raw[key] = value
    return validate_config(model, raw)


def validate_config(model: Type[M], raw: dict[str, Any]) -> M:
    try:
        return model.model_validate(raw)
    except ValidationError as e:
        problems = "; ".join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"invalid {model.__name__}: {problems}") from None
