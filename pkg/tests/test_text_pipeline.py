"""Tests for tokenization, vocabulary, dataset ingestion, splitting and batching."""

from __future__ import annotations

import json
from collections import Counter
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from src.newsclf.errors import (
    EmptyDatasetError,
    EmptyTextError,
    IngestionError,
    LabelError,
    ParameterError,
    StratificationError,
    VocabularyError,
)
from src.newsclf.text.batching import batch_iter, encode_records, make_example
from src.newsclf.text.huffpost import (
    NewsRecord,
    assign_labels,
    load_huffpost,
    read_split,
    top_categories,
    write_split,
)
from src.newsclf.text.split import stratified_split
from src.newsclf.text.tokenizer import tokenize
from src.newsclf.text.vocab import PAD_ID, UNK_ID, Vocabulary, build_vocab, encode


def _line(category: str, headline: str = "h", description: str = "d") -> str:
    return json.dumps({"category": category, "headline": headline, "short_description": description})


def _records(per_class: dict[str, int]) -> list[NewsRecord]:
    out = []
    for cat, n in per_class.items():
        out += [NewsRecord(cat, f"{cat} headline {i}", f"story {i}") for i in range(n)]
    return out


class TestTokenize:
    def test_punctuation_and_case(self) -> None:
        assert tokenize("Hello, World!") == ["hello", "world"]

    def test_empty(self) -> None:
        assert tokenize("") == []

    def test_digits_are_tokens(self) -> None:
        assert tokenize("COVID-19 cases up 3%") == ["covid", "19", "cases", "up", "3"]

    def test_underscore_separates(self) -> None:
        assert tokenize("snake_case") == ["snake", "case"]

    def test_non_ascii_letters_kept(self) -> None:
        assert tokenize("Café Über") == ["café", "über"]


class TestVocabulary:
    def test_min_count_filter(self) -> None:
        vocab = build_vocab([["a", "a", "b"]], min_count=2)
        assert vocab.tokens == ["<pad>", "<unk>", "a"]

    def test_frequency_ties_break_lexicographically(self) -> None:
        vocab = build_vocab([["b", "b", "a", "a"]])
        assert vocab.id_of("a") == 2
        assert vocab.id_of("b") == 3

    def test_frequency_ranks_first(self) -> None:
        vocab = build_vocab([["z", "z", "z", "a"]])
        assert vocab.tokens[2:] == ["z", "a"]

    def test_capacity(self) -> None:
        vocab = build_vocab([["x", "y", "z", "x"]], max_size=3)
        assert len(vocab) == 3
        assert vocab.tokens[2] == "x"

    def test_unknown_maps_to_unk(self) -> None:
        vocab = build_vocab([["a"]])
        assert vocab.id_of("missing") == UNK_ID
        with pytest.raises(VocabularyError):
            vocab.lookup("missing")

    def test_bad_parameters(self) -> None:
        with pytest.raises(ParameterError):
            build_vocab([["a"]], min_count=0)
        with pytest.raises(ParameterError):
            build_vocab([["a"]], max_size=1)

    def test_save_and_load(self, tmp_path: Path) -> None:
        vocab = build_vocab([["b", "a", "a", "c"]])
        path = tmp_path / "vocab.txt"
        vocab.save(path)
        loaded = Vocabulary.load(path)
        assert loaded.tokens == vocab.tokens
        assert loaded.counts == vocab.counts

    def test_load_rejects_sparse_ids(self, tmp_path: Path) -> None:
        path = tmp_path / "vocab.txt"
        path.write_text("<pad> 0 0\n<unk> 1 0\nx 3 1\n", encoding="utf-8")
        with pytest.raises(VocabularyError, match=":3:"):
            Vocabulary.load(path)

    @given(st.lists(st.lists(st.sampled_from("abcdefg"), max_size=8), max_size=6), st.integers(1, 3))
    def test_dense_bijection(self, corpus: list[list[str]], min_count: int) -> None:
        vocab = build_vocab(corpus, min_count=min_count)
        freq = Counter(tok for doc in corpus for tok in doc)
        assert [vocab.id_of(t) for t in vocab.tokens] == list(range(len(vocab)))
        assert all(freq[t] >= min_count for t in vocab.tokens[2:])


class TestEncode:
    def test_pad_and_unknown(self) -> None:
        vocab = Vocabulary(tokens=["<pad>", "<unk>", "a"], counts=[0, 0, 1])
        ids, length = encode(["a", "b"], vocab, 4)
        assert ids.tolist() == [2, 1, 0, 0]
        assert length == 2

    def test_truncation(self) -> None:
        vocab = build_vocab([[str(i) for i in range(10)]])
        ids, length = encode([str(i) for i in range(10)], vocab, 4)
        assert ids.tolist() == [vocab.id_of(str(i)) for i in range(4)]
        assert length == 4

    def test_exact_fit(self) -> None:
        vocab = Vocabulary(tokens=["<pad>", "<unk>", "a"], counts=[0, 0, 1])
        ids, length = encode(["a"], vocab, 1)
        assert ids.tolist() == [2]
        assert length == 1

    def test_empty_tokens(self) -> None:
        with pytest.raises(EmptyTextError):
            encode([], build_vocab([["a"]]), 4)


class TestHuffPost:
    def test_text_concatenation(self, tmp_path: Path) -> None:
        path = tmp_path / "news.jsonl"
        path.write_text(_line("SPORTS", "A", "B") + "\n", encoding="utf-8")
        [record] = load_huffpost(path)
        assert record.category == "SPORTS"
        assert record.text == "A B"

    def test_allow_list(self, tmp_path: Path) -> None:
        path = tmp_path / "news.jsonl"
        path.write_text(_line("SPORTS") + "\n" + _line("POLITICS") + "\n", encoding="utf-8")
        records = load_huffpost(path, categories=["POLITICS"])
        assert [r.category for r in records] == ["POLITICS"]

    def test_malformed_lines_skipped(self, tmp_path: Path, log_messages: list[str]) -> None:
        lines = [_line("SPORTS") for _ in range(8)] + ["{not json", json.dumps({"category": "X"})]
        path = tmp_path / "news.jsonl"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        records = load_huffpost(path, max_malformed_fraction=0.25)
        assert len(records) == 8
        warnings = [m for m in log_messages if m.startswith("WARNING") and "record skipped" in m]
        assert len(warnings) == 2
        assert any("news.jsonl:9" in m for m in warnings)

    def test_too_many_malformed(self, tmp_path: Path) -> None:
        lines = [_line("SPORTS") for _ in range(8)] + ["{", "["]
        path = tmp_path / "news.jsonl"
        path.write_text("\n".join(lines), encoding="utf-8")
        with pytest.raises(IngestionError, match="2 of 10"):
            load_huffpost(path)

    def test_incomplete_records_do_not_count_as_malformed(
        self, tmp_path: Path, log_messages: list[str]
    ) -> None:
        incomplete = [
            json.dumps({"category": "SPORTS", "headline": "h"}),
            json.dumps({"category": "SPORTS", "headline": "h", "short_description": 3}),
            json.dumps({"headline": "h", "short_description": "d"}),
        ]
        lines = [_line("SPORTS") for _ in range(5)] + incomplete * 2 + ["{"]
        path = tmp_path / "news.jsonl"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        records = load_huffpost(path)
        assert len(records) == 5
        skipped = [m for m in log_messages if m.startswith("WARNING") and "missing or non-string" in m]
        assert len(skipped) == 6
        assert any("news.jsonl:6:" in m and "short_description" in m for m in skipped)
        assert any("1 malformed, 6 incomplete skipped" in m for m in log_messages)

    def test_missing_file(self, tmp_path: Path) -> None:
        with pytest.raises(IngestionError):
            load_huffpost(tmp_path / "absent.jsonl")

    def test_top_categories_tiebreak(self) -> None:
        records = _records({"B": 3, "A": 3, "C": 5, "D": 1})
        assert top_categories(records, 3) == ["C", "A", "B"]

    def test_split_file_round_trip(self, tmp_path: Path) -> None:
        labeled = assign_labels(_records({"A": 2, "B": 1}), ["B", "A"])
        path = tmp_path / "train.jsonl"
        assert write_split(path, labeled) == 3
        assert read_split(path) == labeled

    @pytest.mark.parametrize("name", ["WORLD\nNEWS", "WORLD\rNEWS", "WORLD\u2028NEWS", ""])
    def test_category_names_must_fit_on_one_line(self, name: str, tmp_path: Path) -> None:
        path = tmp_path / "news.jsonl"
        path.write_text(_line(name) + "\n" + _line("SPORTS") + "\n", encoding="utf-8")
        records = load_huffpost(path)
        assert [r.category for r in records] == [name, "SPORTS"]
        with pytest.raises(IngestionError, match="line break"):
            assign_labels(records, top_categories(records, 2))

    def test_split_file_needs_labels(self, tmp_path: Path) -> None:
        path = tmp_path / "train.jsonl"
        path.write_text(_line("A") + "\n", encoding="utf-8")
        with pytest.raises(IngestionError, match="no integer label"):
            read_split(path)


class TestStratifiedSplit:
    def test_per_class_counts(self) -> None:
        train, test = stratified_split(_records({"A": 10, "B": 10, "C": 10}), 0.2, seed=1)
        assert Counter(r.category for r in test) == {"A": 2, "B": 2, "C": 2}
        assert len(train) == 24

    def test_deterministic(self) -> None:
        records = _records({"A": 17, "B": 9})
        assert stratified_split(records, 0.3, 5) == stratified_split(records, 0.3, 5)

    def test_seed_changes_selection(self) -> None:
        records = _records({"A": 40})
        assert stratified_split(records, 0.5, 1)[1] != stratified_split(records, 0.5, 2)[1]

    def test_small_class_keeps_both_sides(self) -> None:
        train, test = stratified_split(_records({"A": 2}), 0.05, 0)
        assert len(train) == 1 and len(test) == 1

    @pytest.mark.parametrize(
        ("size", "fraction", "expected"),
        [
            (6, 0.25, 2),  # 1.5 rounds up, not to even
            (14, 0.25, 4),
            (7, 0.5, 4),
            (30, 0.2, 6),
            (2, 0.2, 1),  # rounds to 0, test side kept
            (4, 0.9, 3),  # rounds to 4, train side kept
        ],
    )
    def test_test_count_rounds_half_up(self, size: int, fraction: float, expected: int) -> None:
        train, test = stratified_split(_records({"A": size}), fraction, 0)
        assert (len(train), len(test)) == (size - expected, expected)

    def test_singleton_class(self) -> None:
        with pytest.raises(StratificationError, match="'A'"):
            stratified_split(_records({"A": 1, "B": 5}), 0.2, 0)

    def test_fraction_bounds(self) -> None:
        with pytest.raises(ParameterError):
            stratified_split(_records({"A": 5}), 1.0, 0)

    @given(st.dictionaries(st.sampled_from("ABCD"), st.integers(2, 30), min_size=1), st.integers(0, 1000))
    def test_partition(self, sizes: dict[str, int], seed: int) -> None:
        records = _records(sizes)
        train, test = stratified_split(records, 0.2, seed)
        assert sorted(train + test, key=records.index) == records
        assert not set(map(id, train)) & set(map(id, test))


class TestBatching:
    def _examples(self, n: int) -> list:
        vocab = build_vocab([["word"]])
        return [make_example(f"word {i}", i % 2, vocab, 4) for i in range(n)]

    def test_sizes(self) -> None:
        sizes = [len(b) for b in batch_iter(self._examples(10), 4, 2)]
        assert sizes == [4, 4, 2]

    def test_order_preserved_without_shuffle(self) -> None:
        batches = list(batch_iter(self._examples(6), 4, 2))
        labels = np.concatenate([b.label_ids for b in batches])
        assert labels.tolist() == [0, 1, 0, 1, 0, 1]

    def test_shuffle_reproducible(self) -> None:
        examples = [make_example("word", i % 3, build_vocab([["word"]]), 2) for i in range(9)]
        first = [b.label_ids.tolist() for b in batch_iter(examples, 4, 3, shuffle=True, seed=3)]
        again = [b.label_ids.tolist() for b in batch_iter(examples, 4, 3, shuffle=True, seed=3)]
        assert first == again

    def test_batch_contents(self) -> None:
        [batch] = list(batch_iter(self._examples(2), 2, 2))
        assert batch.ids.shape == (2, 4)
        assert batch.lengths.tolist() == [2, 2]
        np.testing.assert_array_equal(batch.labels, [[1.0, 0.0], [0.0, 1.0]])
        assert batch.ids[0, 2] == PAD_ID

    def test_validated_eagerly(self) -> None:
        with pytest.raises(ParameterError):
            batch_iter(self._examples(3), 0, 2)
        with pytest.raises(EmptyDatasetError):
            batch_iter([], 2, 2)

    def test_label_out_of_range(self) -> None:
        with pytest.raises(LabelError):
            list(batch_iter(self._examples(3), 2, 1))

    def test_empty_text_records_dropped(self, log_messages: list[str]) -> None:
        vocab = build_vocab([["word"]])
        records = [NewsRecord("A", "word", "", 0), NewsRecord("A", "!!", "...", 0)]
        assert len(encode_records(records, vocab, 4)) == 1
        assert any("dropped record" in m for m in log_messages)
