"""Finite-difference verification of every hand-written backward pass.

Two kinds of checks make up the suite:

* layer checks drive one layer with random inputs and a random linear
  read-out (or cross-entropy for the head) and compare the gradients of
  every parameter and of the input;
* model checks build a toy model for an architecture tag, draw all
  parameters from uniform(−0.5, 0.5) and compare the gradient of the full
  regularised loss on a two-example batch, in train mode with the dropout
  rng re-seeded before every evaluation so all calls see the same masks.

Results are kept per parameter group (one entry per parameter tensor, plus
``input`` for layer inputs) so a failure points at the tensor whose
backward is wrong.
"""

from __future__ import annotations

import copy
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from src.newsclf.graph import WeightedGraph, gcn_aggregate
from src.newsclf.layers.attention import add_attention_params, attention_pool
from src.newsclf.layers.conv import add_conv_params, conv1d_maxpool
from src.newsclf.layers.dense import add_dense_params, dense_softmax
from src.newsclf.layers.dropout import dropout
from src.newsclf.layers.embedding import add_embedding_params, embedding_forward
from src.newsclf.layers.loss import ce_grad_logits, loss_ce_l2, one_hot, regularized_loss
from src.newsclf.layers.recurrent import add_lstm_params, add_rnn_params, bidirectional_run, run_sequence
from src.newsclf.models.config import ARCHITECTURES, ModelConfig
from src.newsclf.models.network import Model, backward, build_model, forward
from src.newsclf.params import ParamSet
from src.newsclf.tensor import GradCheckReport, Tensor, grad_check, make_rng
from src.newsclf.text.batching import Batch
from src.utils.logger import get_logger

logger = get_logger("gradcheck")

EPSILON = 1e-5
MODEL_TOL = 1e-4
TIGHT_TOL = 1e-6

TOY_VOCAB = 50
TOY_DIM = 8
TOY_HIDDEN = 4
TOY_LEN = 6
TOY_CLASSES = 3
TOY_LAMBDA = 0.1
TOY_DROPOUT = 0.25
INIT_RANGE = 0.5

LAYER_CHECKS = ("embedding", "rnn", "lstm", "bilstm", "attention", "conv", "dense", "dropout", "graph")


@dataclass(frozen=True)
class GroupResult:
    check: str
    group: str
    size: int
    max_rel_err: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tol


@dataclass
class SuiteReport:
    results: list[GroupResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def checks(self) -> list[str]:
        return list(dict.fromkeys(r.check for r in self.results))

    def worst(self, check: Optional[str] = None) -> float:
        errs = [r.max_rel_err for r in self.results if check is None or r.check == check]
        return max(errs, default=0.0)

    def summary(self) -> str:
        """One line per check: worst rel_err and PASS/FAIL."""
        names = self.checks()
        width = max([len("check")] + [len(n) for n in names])
        lines = [f"{'check':<{width}}  {'max rel_err':>11}  status"]
        for name in names:
            ok = all(r.passed for r in self.results if r.check == name)
            lines.append(f"{name:<{width}}  {self.worst(name):>11.3e}  {'PASS' if ok else 'FAIL'}")
        return "\n".join(lines)

    def table(self, check: Optional[str] = None) -> str:
        """Worst rel_err per parameter group."""
        rows = [r for r in self.results if check is None or r.check == check]
        cw = max([len("check")] + [len(r.check) for r in rows])
        gw = max([len("group")] + [len(r.group) for r in rows])
        lines = [f"{'check':<{cw}}  {'group':<{gw}}  {'size':>6}  {'max rel_err':>11}  status"]
        for r in rows:
            lines.append(
                f"{r.check:<{cw}}  {r.group:<{gw}}  {r.size:>6}  {r.max_rel_err:>11.3e}  {'ok' if r.passed else 'FAIL'}"
            )
        return "\n".join(lines)


def _group_result(check: str, group: str, report: GradCheckReport) -> GroupResult:
    return GroupResult(check=check, group=group, size=report.rel_err.size, max_rel_err=report.max_rel_err, tol=report.tol)


# ── layer checks ─────────────────────────────────────────────────────────


@dataclass
class LayerCase:
    """Tensors perturbed in place, the scalar objective over them, and its analytic gradients."""

    name: str
    tensors: dict[str, Tensor]
    objective: Callable[[], float]
    gradients: Callable[[], dict[str, Tensor]]
    tol: float = MODEL_TOL


def _randomise(params: ParamSet, rng: np.random.Generator) -> None:
    for name in params:
        params[name][...] = rng.uniform(-INIT_RANGE, INIT_RANGE, size=params[name].shape)


def _embedding_case(rng: np.random.Generator) -> LayerCase:
    params = ParamSet()
    layer = add_embedding_params(params, 10, 4, rng)
    _randomise(params, rng)
    ids = np.array([3, 1, 3, 7, 0], dtype=np.int64)
    R = rng.normal(size=(ids.size, 4))

    def objective() -> float:
        return float(np.sum(embedding_forward(ids, layer)[0] * R))

    def gradients() -> dict[str, Tensor]:
        return embedding_forward(ids, layer)[1].backward(R).params

    return LayerCase("embedding", {"embed.table": params["embed.table"]}, objective, gradients, TIGHT_TOL)


def _sequence_case(name: str, cell: str, steps: int, rng: np.random.Generator) -> LayerCase:
    params = ParamSet()
    add = add_lstm_params if cell == "lstm" else add_rnn_params
    layer = add(params, cell, TOY_DIM, TOY_HIDDEN, rng)
    _randomise(params, rng)
    x = rng.uniform(-1.0, 1.0, size=(steps, TOY_DIM))
    R = rng.normal(size=(steps, TOY_HIDDEN))

    def objective() -> float:
        return float(np.sum(run_sequence(cell, x, steps, layer)[0] * R))  # type: ignore[arg-type]

    def gradients() -> dict[str, Tensor]:
        grads = run_sequence(cell, x, steps, layer)[1].backward(R)  # type: ignore[arg-type]
        return {**grads.params, "input": grads.grad_in}

    return LayerCase(name, {**{n: params[n] for n in params}, "input": x}, objective, gradients)


def _bilstm_case(rng: np.random.Generator) -> LayerCase:
    params = ParamSet()
    fwd = add_lstm_params(params, "lstm_fwd", TOY_DIM, TOY_HIDDEN, rng)
    bwd = add_lstm_params(params, "lstm_bwd", TOY_DIM, TOY_HIDDEN, rng)
    _randomise(params, rng)
    length = 3
    x = rng.uniform(-1.0, 1.0, size=(length + 1, TOY_DIM))
    R = rng.normal(size=(length + 1, 2 * TOY_HIDDEN))

    def objective() -> float:
        return float(np.sum(bidirectional_run(x, length, fwd, bwd)[0] * R))

    def gradients() -> dict[str, Tensor]:
        grads = bidirectional_run(x, length, fwd, bwd)[1].backward(R)
        return {**grads.params, "input": grads.grad_in}

    return LayerCase("bilstm", {**{n: params[n] for n in params}, "input": x}, objective, gradients)


def _attention_case(rng: np.random.Generator) -> LayerCase:
    params = ParamSet()
    n = 2 * TOY_HIDDEN
    layer = add_attention_params(params, n, n, rng)
    _randomise(params, rng)
    length = 4
    H = rng.uniform(-1.0, 1.0, size=(length + 1, n))
    r = rng.normal(size=n)

    def objective() -> float:
        return float(attention_pool(H, length, layer)[0] @ r)

    def gradients() -> dict[str, Tensor]:
        grads = attention_pool(H, length, layer)[2].backward(r)
        return {**grads.params, "input": grads.grad_in}

    return LayerCase("attention", {**{k: params[k] for k in params}, "input": H}, objective, gradients)


def _conv_case(rng: np.random.Generator) -> LayerCase:
    params = ParamSet()
    layer = add_conv_params(params, 3, 4, TOY_DIM, rng)
    _randomise(params, rng)
    x = rng.uniform(-1.0, 1.0, size=(TOY_LEN, TOY_DIM))
    r = rng.normal(size=4)

    def objective() -> float:
        return float(conv1d_maxpool(x, layer)[0] @ r)

    def gradients() -> dict[str, Tensor]:
        grads = conv1d_maxpool(x, layer)[1].backward(r)
        return {**grads.params, "input": grads.grad_in}

    return LayerCase("conv", {**{k: params[k] for k in params}, "input": x}, objective, gradients)


def _dense_case(rng: np.random.Generator) -> LayerCase:
    params = ParamSet()
    layer = add_dense_params(params, TOY_DIM, TOY_CLASSES, rng)
    _randomise(params, rng)
    v = rng.uniform(-1.0, 1.0, size=TOY_DIM)
    t = one_hot(np.array([1]), TOY_CLASSES)[0]

    def objective() -> float:
        return loss_ce_l2(dense_softmax(v, layer)[0], t)

    def gradients() -> dict[str, Tensor]:
        y, cache = dense_softmax(v, layer)
        grads = cache.backward_logits(ce_grad_logits(y, t, 1))
        return {**grads.params, "input": grads.grad_in}

    return LayerCase("dense", {**{k: params[k] for k in params}, "input": v}, objective, gradients, TIGHT_TOL)


def _dropout_case(rng: np.random.Generator) -> LayerCase:
    x = rng.uniform(-1.0, 1.0, size=(TOY_LEN, TOY_DIM))
    R = rng.normal(size=x.shape)
    mask_seed = int(rng.integers(2**31))

    def objective() -> float:
        return float(np.sum(dropout(x, 0.5, "train", make_rng(mask_seed))[0] * R))

    def gradients() -> dict[str, Tensor]:
        return {"input": dropout(x, 0.5, "train", make_rng(mask_seed))[1].backward(R).grad_in}

    return LayerCase("dropout", {"input": x}, objective, gradients, TIGHT_TOL)


def _graph_case(rng: np.random.Generator) -> LayerCase:
    nodes, width = 5, 4
    A = rng.uniform(0.1, 1.0, size=(nodes, nodes))
    H = rng.uniform(-1.0, 1.0, size=(nodes, width))
    W = rng.uniform(-INIT_RANGE, INIT_RANGE, size=(width, width))
    b = rng.uniform(-INIT_RANGE, INIT_RANGE, size=width)
    R = rng.normal(size=(nodes, width))

    def objective() -> float:
        return float(np.sum(gcn_aggregate(WeightedGraph(A, H), W, b)[0] * R))

    def gradients() -> dict[str, Tensor]:
        grads = gcn_aggregate(WeightedGraph(A, H), W, b)[1].backward(R)
        return {**grads.params, "H": grads.grad_in}

    return LayerCase("graph", {"W": W, "b": b, "A": A, "H": H}, objective, gradients)


_LAYER_BUILDERS: dict[str, Callable[[np.random.Generator], LayerCase]] = {
    "embedding": _embedding_case,
    "rnn": lambda rng: _sequence_case("rnn", "rnn", 3, rng),
    "lstm": lambda rng: _sequence_case("lstm", "lstm", 4, rng),
    "bilstm": _bilstm_case,
    "attention": _attention_case,
    "conv": _conv_case,
    "dense": _dense_case,
    "dropout": _dropout_case,
    "graph": _graph_case,
}


def run_layer_case(case: LayerCase, epsilon: float = EPSILON) -> list[GroupResult]:
    """Central differences for each tensor of *case*, one group at a time (single-threaded: tensors are mutated)."""
    analytic = case.gradients()
    results: list[GroupResult] = []
    for group, tensor in case.tensors.items():

        def f(flat: Tensor, tensor: Tensor = tensor) -> float:
            saved = tensor.copy()
            tensor[...] = flat.reshape(tensor.shape)
            try:
                return case.objective()
            finally:
                tensor[...] = saved

        report = grad_check(f, tensor.copy(), analytic[group], epsilon, case.tol)
        results.append(_group_result(f"layer:{case.name}", group, report))
    return results


def check_layer(name: str, seed: int, epsilon: float = EPSILON) -> list[GroupResult]:
    return run_layer_case(_LAYER_BUILDERS[name](make_rng(seed)), epsilon)


# ── model checks ─────────────────────────────────────────────────────────


def toy_config(arch: str, **overrides: object) -> ModelConfig:
    """Small model config the suite checks every architecture with."""
    values: dict[str, object] = dict(
        arch=arch,
        vocab_size=TOY_VOCAB,
        embed_dim=TOY_DIM,
        hidden=TOY_HIDDEN,
        num_classes=TOY_CLASSES,
        max_len=TOY_LEN,
        dropout=TOY_DROPOUT,
        lam=TOY_LAMBDA,
        conv_filters=3,
    )
    values.update(overrides)
    return ModelConfig(**values)  # type: ignore[arg-type]


def toy_batch(config: ModelConfig, rng: np.random.Generator) -> Batch:
    """Two examples, one full length and one padded."""
    lengths = np.array([config.max_len, max(1, config.max_len - 2)], dtype=np.int64)
    ids = np.zeros((2, config.max_len), dtype=np.int64)
    for row, length in enumerate(lengths):
        ids[row, :length] = rng.integers(2, config.vocab_size, size=length)
    label_ids = rng.integers(0, config.num_classes, size=2)
    return Batch(ids=ids, lengths=lengths, labels=one_hot(label_ids, config.num_classes), label_ids=label_ids)


def model_variants(arch: str) -> list[tuple[str, ModelConfig]]:
    """Configs checked for *arch*; bilstm-attn also covers the graph round and the sum-of-squares loss."""
    variants = [(arch, toy_config(arch))]
    if arch == "bilstm-attn":
        variants.append((f"{arch}+graph", toy_config(arch, graph=True)))
        variants.append((f"{arch}+mse", toy_config(arch, loss="mse")))
    return variants


def check_model(
    config: ModelConfig,
    seed: int,
    epsilon: float = EPSILON,
    tol: float = MODEL_TOL,
    threads: int = 1,
    label: Optional[str] = None,
) -> list[GroupResult]:
    """Compare the full-loss gradient of a freshly built model against central differences.

    With ``threads > 1`` every worker thread evaluates on its own deep copy
    of the model.
    """
    rng = make_rng(seed)
    model = build_model(config, rng, pretrained=False)
    _randomise(model.params, rng)
    batch = toy_batch(config, rng)
    mask_seed = int(rng.integers(2**31))
    names = model.params.trainable()

    def loss_of(m: Model) -> float:
        result = forward(m, batch, "train", make_rng(mask_seed))
        return regularized_loss(config.loss, result.probs, batch.labels, m.params, config.lam)

    model.params.zero_grad()
    result = forward(model, batch, "train", make_rng(mask_seed))
    backward(model, result.caches, result.probs, batch.labels)
    analytic = model.params.flat_grad(names)
    theta = model.params.flatten(names)

    local = threading.local()

    def f(flat: Tensor) -> float:
        replica: Optional[Model] = getattr(local, "model", None)
        if replica is None:
            replica = local.model = copy.deepcopy(model)
        replica.params.assign_flat(flat, names)
        return loss_of(replica)

    report = grad_check(f, theta, analytic, epsilon, tol, threads)
    check = f"model:{label or config.arch}"
    results: list[GroupResult] = []
    offset = 0
    for name in names:
        size = model.params[name].size
        part = slice(offset, offset + size)
        offset += size
        results.append(
            _group_result(
                check,
                name,
                GradCheckReport(report.analytic[part], report.numeric[part], report.rel_err[part], tol),
            )
        )
    return results


# ── suite ────────────────────────────────────────────────────────────────


def run_suite(
    archs: Optional[Sequence[str]] = None,
    seeds: Iterable[int] = (0,),
    layers: bool = True,
    epsilon: float = EPSILON,
    threads: int = 1,
) -> SuiteReport:
    """Layer checks (when *layers*) then model checks for each tag in *archs* (all six by default), for every seed."""
    archs = list(ARCHITECTURES) if archs is None else list(archs)
    report = SuiteReport()
    for seed in seeds:
        if layers:
            for name in LAYER_CHECKS:
                report.results.extend(check_layer(name, seed, epsilon))
        for arch in archs:
            for label, config in model_variants(arch):
                report.results.extend(check_model(config, seed, epsilon, threads=threads, label=label))
        logger.debug(f"gradient checks for seed {seed} done")

    for name in report.checks():
        worst = report.worst(name)
        if all(r.passed for r in report.results if r.check == name):
            logger.info(f"✅ {name}: max rel_err {worst:.3e}")
        else:
            logger.error(f"❌ {name}: max rel_err {worst:.3e}")
    return report
