"""
Root-level pytest configuration.

Registers the hypothesis profiles used by the numeric property tests.
Kernels on small float64 arrays have uneven first-call latency (BLAS
warm-up, scipy imports), so the default profile runs without a deadline.
Select a profile with HYPOTHESIS_PROFILE=ci|dev.
"""

import os
from typing import Iterator

import pytest
from hypothesis import HealthCheck, settings
from loguru import logger

settings.register_profile(
    "dev",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile(
    "ci",
    deadline=None,
    max_examples=200,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "dev"))


@pytest.fixture
def log_messages() -> Iterator[list[str]]:
    """Collect loguru messages emitted during a test as ``LEVEL message`` strings."""
    messages: list[str] = []
    handler_id = logger.add(lambda m: messages.append(f"{m.record['level'].name} {m.record['message']}"), level="DEBUG")
    try:
        yield messages
    finally:
        logger.remove(handler_id)
