"""Tests for the loguru helpers in src/utils/logger.py."""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Iterator

import pytest
from loguru import logger

from src.utils import logger as logger_module
from src.utils.logger import configure_logging, get_logger


@pytest.fixture
def unconfigured(monkeypatch: pytest.MonkeyPatch) -> Iterator[None]:
    monkeypatch.setattr(logger_module, "_configured", False)
    try:
        yield
    finally:
        logger.remove()
        logger.add(sys.stderr)


class TestGetLogger:
    def test_binds_package_namespace(self, log_messages: list[str]) -> None:
        records: list[dict] = []
        handler_id = logger.add(lambda m: records.append(m.record["extra"]), level="DEBUG")
        try:
            get_logger("trainer").info("✅ checkpoint written")
        finally:
            logger.remove(handler_id)
        assert records == [{"module": "newsclf.trainer"}]
        assert log_messages == ["INFO ✅ checkpoint written"]


class TestConfigureLogging:
    def test_file_sink_respects_level(self, tmp_path: Path, unconfigured: None) -> None:
        log_file = tmp_path / "logs" / "run.log"
        configure_logging("INFO", log_file)
        get_logger("trainer").info("epoch 1/1 done")
        get_logger("trainer").debug("per-step detail")
        logger.remove()
        text = log_file.read_text(encoding="utf-8")
        assert "newsclf.trainer" in text
        assert "epoch 1/1 done" in text
        assert "per-step detail" not in text

    def test_second_call_is_a_no_op(self, tmp_path: Path, unconfigured: None) -> None:
        configure_logging("INFO", tmp_path / "first.log")
        configure_logging("DEBUG", tmp_path / "second.log")
        assert (tmp_path / "first.log").exists()
        assert not (tmp_path / "second.log").exists()
