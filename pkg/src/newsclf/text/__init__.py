"""Tokenization, vocabulary, dataset ingestion, splitting and batching."""

from src.newsclf.text.batching import Batch, Example, batch_iter, encode_records, make_batch, make_example
from src.newsclf.text.huffpost import NewsRecord, load_huffpost, read_split, top_categories, write_split
from src.newsclf.text.split import stratified_split
from src.newsclf.text.tokenizer import tokenize
from src.newsclf.text.vocab import PAD_ID, UNK_ID, Vocabulary, build_vocab, encode

__all__ = [
    "Batch",
    "Example",
    "NewsRecord",
    "PAD_ID",
    "UNK_ID",
    "Vocabulary",
    "batch_iter",
    "build_vocab",
    "encode",
    "encode_records",
    "load_huffpost",
    "make_batch",
    "make_example",
    "read_split",
    "stratified_split",
    "tokenize",
    "top_categories",
    "write_split",
]
