"""The six classifier architectures behind one forward/backward/predict contract.

Every architecture maps one encoded example to a feature vector ``v`` and
shares the dense+softmax head. Batches are handled by iterating examples.

Parameter enumeration order (checkpoint order) is registration order:
embedding, recurrent blocks (forward direction first), attention, graph,
convolutions (ascending width), head.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import ClassVar, NamedTuple, Optional, Sequence

import numpy as np

from src.newsclf.embeddings.store import load_embeddings
from src.newsclf.errors import ConfigError, EmbeddingFormatError, StateError
from src.newsclf.graph import GcnCache, WeightedGraph, gcn_aggregate
from src.newsclf.layers.attention import (
    AttentionWeightsCache,
    add_attention_params,
    attention_pool,
    attention_weights,
)
from src.newsclf.layers.cache import ForwardCache, LayerGrads
from src.newsclf.layers.conv import add_conv_params, conv1d_maxpool
from src.newsclf.layers.dense import DenseSoftmaxCache, add_dense_params, dense_softmax
from src.newsclf.layers.dropout import Mode, dropout
from src.newsclf.layers.embedding import PREFIX as EMBED_PREFIX
from src.newsclf.layers.embedding import add_embedding_params, embedding_forward
from src.newsclf.layers.loss import ce_grad_logits, mse_grad_probs, regularized_loss
from src.newsclf.layers.recurrent import add_lstm_params, add_rnn_params, bidirectional_run, run_sequence
from src.newsclf.models.config import ARCHITECTURES, ModelConfig
from src.newsclf.params import LayerParams, ParamSet, glorot_uniform
from src.newsclf.tensor import DTYPE, IdArray, Tensor
from src.newsclf.text.batching import Batch
from src.newsclf.text.tokenizer import tokenize
from src.newsclf.text.vocab import Vocabulary, encode
from src.utils.logger import get_logger

logger = get_logger("models")


# ── composite caches ─────────────────────────────────────────────────────


def _merge(into: dict[str, Tensor], grads: dict[str, Tensor]) -> None:
    for name, g in grads.items():
        into[name] = into[name] + g if name in into else g


@dataclass
class ChainCache(ForwardCache):
    """Stage caches in forward order; backward threads the gradient through them in reverse."""

    stages: list[ForwardCache] = field(default_factory=list)

    def _backward(self, grad_out: Tensor) -> LayerGrads:
        params: dict[str, Tensor] = {}
        grad: Optional[Tensor] = grad_out
        for stage in reversed(self.stages):
            if grad is None:
                raise StateError(f"{type(stage).__name__} received no upstream gradient")
            result = stage.backward(grad)
            _merge(params, result.params)
            grad = result.grad_in
        return LayerGrads(grad, params)


@dataclass
class ZeroPadCache(ForwardCache):
    """Rows appended as zeros after ``length``; they carry no gradient upstream."""

    length: int

    def _backward(self, grad_out: Tensor) -> LayerGrads:
        return LayerGrads(grad_out[: self.length], {})


@dataclass
class LastStateCache(ForwardCache):
    """Readout of the final hidden state: forward row length−1, and for two directions also backward row 0."""

    rows: int
    length: int
    width: int
    bidirectional: bool

    def _backward(self, grad_out: Tensor) -> LayerGrads:
        grad = np.zeros((self.rows, self.width), dtype=DTYPE)
        if self.bidirectional:
            h = self.width // 2
            grad[self.length - 1, :h] = grad_out[:h]
            grad[0, h:] += grad_out[h:]
        else:
            grad[self.length - 1] = grad_out
        return LayerGrads(grad, {})


@dataclass
class ConvBankCache(ForwardCache):
    branches: list[ForwardCache]
    sizes: list[int]

    def _backward(self, grad_out: Tensor) -> LayerGrads:
        params: dict[str, Tensor] = {}
        grad_seq: Optional[Tensor] = None
        offset = 0
        for branch, size in zip(self.branches, self.sizes):
            result = branch.backward(grad_out[offset:offset + size])
            offset += size
            _merge(params, result.params)
            grad_seq = result.grad_in if grad_seq is None else grad_seq + result.grad_in
        return LayerGrads(grad_seq, params)


@dataclass
class GraphPoolCache(ForwardCache):
    """Attention weights → adjacency √(α_i α_j) → one GCN round → α-weighted pooling."""

    weights: AttentionWeightsCache
    gcn: GcnCache
    graph_layer: LayerParams
    alpha: Tensor        # [L]
    adjacency: Tensor    # [L×L]
    pooled_in: Tensor    # GCN output [L×n]

    def _backward(self, grad_out: Tensor) -> LayerGrads:
        length = self.alpha.shape[0]
        d_alpha = self.pooled_in @ grad_out
        gcn = self.gcn.backward(np.outer(self.alpha, grad_out))
        for name in ("W", "b"):
            self.graph_layer.accumulate(name, gcn.params[name])
        dA_A = gcn.params["A"] * self.adjacency
        d_alpha = d_alpha + (dA_A.sum(axis=1) + dA_A.sum(axis=0)) / (2.0 * self.alpha)
        rows = self.weights.rows
        d_alpha_full = np.zeros(rows, dtype=DTYPE)
        d_alpha_full[:length] = d_alpha
        through = self.weights.backward(d_alpha_full)
        grad_h = through.grad_in
        grad_h[:length] += gcn.grad_in
        params = dict(through.params)
        params[self.graph_layer.key("W")] = gcn.params["W"]
        params[self.graph_layer.key("b")] = gcn.params["b"]
        return LayerGrads(grad_h, params)


@dataclass
class ExampleCache(ForwardCache):
    """Body (ids → v) plus head (v → y) for one example."""

    body: ForwardCache
    head: DenseSoftmaxCache

    def _backward(self, grad_out: Tensor) -> LayerGrads:
        return self._through_body(self.head.backward(grad_out))

    def backward_logits(self, grad_logits: Tensor) -> LayerGrads:
        self._claim()
        return self._through_body(self.head.backward_logits(grad_logits))

    def _through_body(self, head: LayerGrads) -> LayerGrads:
        body = self.body.backward(head.grad_in)
        params = dict(head.params)
        _merge(params, body.params)
        return LayerGrads(body.grad_in, params)


class ForwardResult(NamedTuple):
    probs: Tensor                   # [B×K]
    caches: list[ExampleCache]
    alphas: list[Optional[Tensor]]  # per example, [max_len] with zeros on pad, or None


@dataclass
class Prediction:
    label: int
    probs: Tensor
    alpha: Optional[Tensor]
    tokens: list[str]
    category: Optional[str] = None


# ── models ───────────────────────────────────────────────────────────────


class Model(ABC):
    """Config + ParamSet + the wiring that turns one encoded example into a feature vector."""

    tag: ClassVar[str]
    has_attention: ClassVar[bool] = False

    def __init__(self, config: ModelConfig, rng: np.random.Generator) -> None:
        self.config = config
        self.params = ParamSet()
        self.embed = add_embedding_params(self.params, config.vocab_size, config.embed_dim, rng)
        self._build(rng)
        self.head = add_dense_params(self.params, self.feature_dim, config.num_classes, rng)
        if not config.embed_trainable:
            self.params.frozen.add(self.embed.key("table"))

    @property
    @abstractmethod
    def feature_dim(self) -> int: ...

    @abstractmethod
    def _build(self, rng: np.random.Generator) -> None:
        """Register the architecture-specific parameters between embedding and head."""

    @abstractmethod
    def _encode(
        self, x: Tensor, length: int, mode: Mode, rng: Optional[np.random.Generator], chain: ChainCache
    ) -> tuple[Tensor, Optional[Tensor]]:
        """Map embedded rows to (v, alpha), appending stage caches to *chain*."""

    def _embedded_rows(self, length: int) -> int:
        return length

    def forward_example(
        self, ids: IdArray, length: int, mode: Mode, rng: Optional[np.random.Generator]
    ) -> tuple[Tensor, Optional[Tensor], ExampleCache]:
        chain = ChainCache()
        x, emb_cache = embedding_forward(ids[: self._embedded_rows(length)], self.embed)
        chain.stages.append(emb_cache)
        v, alpha = self._encode(x, length, mode, rng, chain)
        y, head_cache = dense_softmax(v, self.head)
        if alpha is not None:
            full = np.zeros(len(ids), dtype=DTYPE)
            full[: alpha.shape[0]] = alpha
            alpha = full
        return y, alpha, ExampleCache(body=chain, head=head_cache)

    def _dropout(self, x: Tensor, mode: Mode, rng: Optional[np.random.Generator], chain: ChainCache) -> Tensor:
        out, cache = dropout(x, self.config.dropout, mode, rng)
        chain.stages.append(cache)
        return out


class _RecurrentModel(Model):
    cell: ClassVar[str]

    def _build(self, rng: np.random.Generator) -> None:
        add = add_lstm_params if self.cell == "lstm" else add_rnn_params
        self.recurrent = add(self.params, self.cell, self.config.embed_dim, self.config.hidden, rng)

    @property
    def feature_dim(self) -> int:
        return self.config.hidden

    def _encode(
        self, x: Tensor, length: int, mode: Mode, rng: Optional[np.random.Generator], chain: ChainCache
    ) -> tuple[Tensor, Optional[Tensor]]:
        x = self._dropout(x, mode, rng, chain)
        H, cache = run_sequence(self.cell, x, length, self.recurrent)  # type: ignore[arg-type]
        chain.stages.append(cache)
        chain.stages.append(LastStateCache(rows=length, length=length, width=H.shape[1], bidirectional=False))
        v = self._dropout(H[length - 1].copy(), mode, rng, chain)
        return v, None


class RNNModel(_RecurrentModel):
    tag = "rnn"
    cell = "rnn"


class LSTMModel(_RecurrentModel):
    tag = "lstm"
    cell = "lstm"


class BiLSTMModel(Model):
    tag = "bilstm"

    def _build(self, rng: np.random.Generator) -> None:
        d, h = self.config.embed_dim, self.config.hidden
        self.fwd = add_lstm_params(self.params, "lstm_fwd", d, h, rng)
        self.bwd = add_lstm_params(self.params, "lstm_bwd", d, h, rng)

    @property
    def feature_dim(self) -> int:
        return 2 * self.config.hidden

    def _bilstm(
        self, x: Tensor, length: int, mode: Mode, rng: Optional[np.random.Generator], chain: ChainCache
    ) -> Tensor:
        x = self._dropout(x, mode, rng, chain)
        H, cache = bidirectional_run(x, length, self.fwd, self.bwd, cell="lstm")
        chain.stages.append(cache)
        return H

    def _encode(
        self, x: Tensor, length: int, mode: Mode, rng: Optional[np.random.Generator], chain: ChainCache
    ) -> tuple[Tensor, Optional[Tensor]]:
        H = self._bilstm(x, length, mode, rng, chain)
        h = self.config.hidden
        chain.stages.append(LastStateCache(rows=H.shape[0], length=length, width=2 * h, bidirectional=True))
        v = np.concatenate([H[length - 1, :h], H[0, h:]])
        return self._dropout(v, mode, rng, chain), None


class BiLSTMAttentionModel(BiLSTMModel):
    tag = "bilstm-attn"
    has_attention = True

    def _build(self, rng: np.random.Generator) -> None:
        super()._build(rng)
        n = 2 * self.config.hidden
        self.attn = add_attention_params(self.params, n, self.config.attn_dim, rng)
        self.graph_layer: Optional[LayerParams] = None
        if self.config.graph:
            self.graph_layer = self.params.view("graph")
            self.graph_layer.add("W", glorot_uniform(rng, (n, n), n, n))
            self.graph_layer.add("b", np.zeros(n))

    def _encode(
        self, x: Tensor, length: int, mode: Mode, rng: Optional[np.random.Generator], chain: ChainCache
    ) -> tuple[Tensor, Optional[Tensor]]:
        H = self._bilstm(x, length, mode, rng, chain)
        if self.graph_layer is None:
            s, alpha, cache = attention_pool(H, length, self.attn)
            chain.stages.append(cache)
        else:
            s, alpha = self._graph_pool(H, length, chain)
        return self._dropout(s, mode, rng, chain), alpha[:length]

    def _graph_pool(self, H: Tensor, length: int, chain: ChainCache) -> tuple[Tensor, Tensor]:
        assert self.graph_layer is not None
        alpha_full, weights_cache = attention_weights(H, length, self.attn)
        alpha = alpha_full[:length]
        adjacency = np.sqrt(np.outer(alpha, alpha))
        hg, gcn_cache = gcn_aggregate(
            WeightedGraph(adjacency=adjacency, features=H[:length]),
            self.graph_layer["W"],
            self.graph_layer["b"],
        )
        chain.stages.append(
            GraphPoolCache(
                weights=weights_cache,
                gcn=gcn_cache,
                graph_layer=self.graph_layer,
                alpha=alpha,
                adjacency=adjacency,
                pooled_in=hg,
            )
        )
        return alpha @ hg, alpha_full


class AttentionModel(Model):
    """Attention pooling straight over the embeddings; no recurrence and no dropout."""

    tag = "attn"
    has_attention = True

    def _build(self, rng: np.random.Generator) -> None:
        self.attn = add_attention_params(self.params, self.config.embed_dim, self.config.attn_dim, rng)

    @property
    def feature_dim(self) -> int:
        return self.config.embed_dim

    def _encode(
        self, x: Tensor, length: int, mode: Mode, rng: Optional[np.random.Generator], chain: ChainCache
    ) -> tuple[Tensor, Optional[Tensor]]:
        s, alpha, cache = attention_pool(x, length, self.attn)
        chain.stages.append(cache)
        return s, alpha[:length]


class CNNModel(Model):
    tag = "cnn"

    def _build(self, rng: np.random.Generator) -> None:
        self.widths = sorted(self.config.conv_widths)
        if not self.widths or min(self.widths) < 1:
            raise ConfigError(f"conv widths must be positive, got {self.config.conv_widths}")
        self.convs = [
            add_conv_params(self.params, w, self.config.conv_filters, self.config.embed_dim, rng)
            for w in self.widths
        ]

    @property
    def feature_dim(self) -> int:
        return self.config.conv_filters * len(self.config.conv_widths)

    def _encode(
        self, x: Tensor, length: int, mode: Mode, rng: Optional[np.random.Generator], chain: ChainCache
    ) -> tuple[Tensor, Optional[Tensor]]:
        rows = max(length, self.widths[-1])
        if rows > length:
            x = np.vstack([x, np.zeros((rows - length, x.shape[1]), dtype=DTYPE)])
            chain.stages.append(ZeroPadCache(length=length))
        x = self._dropout(x, mode, rng, chain)
        outs, caches = zip(*(conv1d_maxpool(x, layer) for layer in self.convs))
        chain.stages.append(ConvBankCache(branches=list(caches), sizes=[o.shape[0] for o in outs]))
        return np.concatenate(outs), None


_MODEL_CLASSES: tuple[type[Model], ...] = (
    RNNModel, CNNModel, LSTMModel, BiLSTMModel, AttentionModel, BiLSTMAttentionModel,
)
MODEL_REGISTRY: dict[str, type[Model]] = {cls.tag: cls for cls in _MODEL_CLASSES}


# ── public contract ──────────────────────────────────────────────────────


def build_model(config: ModelConfig, rng: np.random.Generator, pretrained: bool = True) -> Model:
    """Instantiate and initialise the architecture named by ``config.arch``.

    With ``pretrained`` and an ``embed_init`` path, the embedding table is
    replaced by the file's vectors after the seeded initialisation.
    """
    try:
        cls = MODEL_REGISTRY[config.arch]
    except KeyError:
        raise ConfigError(
            f"unknown architecture '{config.arch}'; valid tags: {', '.join(ARCHITECTURES)}"
        ) from None
    if config.graph and cls is not BiLSTMAttentionModel:
        raise ConfigError("the graph aggregation round is only available for bilstm-attn")
    model = cls(config, rng)
    if pretrained and config.embed_init != "random":
        table = load_embeddings(config.embed_init, dim=config.embed_dim)
        if table.shape[0] != config.vocab_size:
            raise EmbeddingFormatError(
                f"{config.embed_init}: {table.shape[0]} rows, model vocabulary has {config.vocab_size}"
            )
        model.params[f"{EMBED_PREFIX}.table"][...] = table
        logger.info(f"✅ loaded pretrained embeddings from {config.embed_init}")
    return model


def forward(
    model: Model, batch: Batch, mode: Mode = "eval", rng: Optional[np.random.Generator] = None
) -> ForwardResult:
    """Class probabilities [B×K] for every row of *batch*; eval mode draws nothing from *rng*."""
    rows, caches, alphas = [], [], []
    for ids, length in zip(batch.ids, batch.lengths):
        y, alpha, cache = model.forward_example(ids, int(length), mode, rng)
        rows.append(y)
        caches.append(cache)
        alphas.append(alpha)
    return ForwardResult(probs=np.vstack(rows), caches=caches, alphas=alphas)


def backward(model: Model, caches: Sequence[ExampleCache], probs: Tensor, labels: Tensor) -> float:
    """Accumulate gradients of the regularised loss into ``model.params.grads``; returns the loss.

    Gradients are added to the existing slots; call ``params.zero_grad()`` between steps.
    """
    cfg = model.config
    m = probs.shape[0]
    loss = regularized_loss(cfg.loss, probs, labels, model.params, cfg.lam, m)
    for cache, y, t in zip(caches, probs, labels):
        if cfg.loss == "ce":
            cache.backward_logits(ce_grad_logits(y, t, m))
        else:
            cache.backward(mse_grad_probs(y, t, m))
    model.params.add_l2_grad(cfg.lam)
    return loss


def predict(
    model: Model, text: str, vocab: Vocabulary, categories: Optional[Sequence[str]] = None
) -> Prediction:
    """Eval-mode prediction for raw *text*; argmax ties go to the lowest class id."""
    tokens = tokenize(text)
    ids, length = encode(tokens, vocab, model.config.max_len)
    probs, alpha, _ = model.forward_example(ids, length, "eval", None)
    label = int(np.argmax(probs))
    return Prediction(
        label=label,
        probs=probs,
        alpha=alpha[:length] if alpha is not None else None,
        tokens=tokens[:length],
        category=categories[label] if categories is not None and label < len(categories) else None,
    )
