"""Hand-written forward/backward layers."""

from src.newsclf.layers.attention import attention_pool, attention_weights
from src.newsclf.layers.cache import ForwardCache, LayerGrads, layer_backward
from src.newsclf.layers.conv import conv1d_maxpool
from src.newsclf.layers.dense import dense_softmax
from src.newsclf.layers.dropout import dropout
from src.newsclf.layers.embedding import embedding_forward
from src.newsclf.layers.loss import loss_ce_l2, loss_mse_l2
from src.newsclf.layers.recurrent import (
    bidirectional_run,
    lstm_cell_step,
    lstm_forward,
    rnn_cell_step,
    rnn_forward,
)

__all__ = [
    "ForwardCache",
    "LayerGrads",
    "attention_pool",
    "attention_weights",
    "bidirectional_run",
    "conv1d_maxpool",
    "dense_softmax",
    "dropout",
    "embedding_forward",
    "layer_backward",
    "loss_ce_l2",
    "loss_mse_l2",
    "lstm_cell_step",
    "lstm_forward",
    "rnn_cell_step",
    "rnn_forward",
]
