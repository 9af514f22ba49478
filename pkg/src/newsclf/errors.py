"""Exception hierarchy shared by every newsclf module.

Each class carries the process exit code the CLI maps it to:
0 success, 1 check failure, 2 input/config error, 3 runtime divergence.
Input errors also inherit the closest builtin so generic handlers keep working.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional


class NewsClfError(Exception):
    """Base class for all newsclf errors."""

    exit_code: int = 2


# ── tensor core ──────────────────────────────────────────────────────────


class DimensionError(NewsClfError, ValueError):
    """Operand shapes are incompatible."""


class DomainError(NewsClfError, ValueError):
    """A function was evaluated outside its domain (e.g. log of a nonpositive entry)."""


class NumericError(NewsClfError, ArithmeticError):
    """NaN or infinite values where finite ones are required."""


class ParameterError(NewsClfError, ValueError):
    """A hyperparameter is outside its valid range."""


# ── layers ───────────────────────────────────────────────────────────────


class EmptySequenceError(NewsClfError, ValueError):
    """A sequence operation received zero valid positions."""


class SequenceTooShortError(NewsClfError, ValueError):
    """Sequence is shorter than the convolution window."""


class LabelError(NewsClfError, ValueError):
    """Targets are not one-hot."""


class StateError(NewsClfError, RuntimeError):
    """A forward cache was consumed twice."""


class TokenIdError(NewsClfError, IndexError):
    """A token id is outside the embedding table."""


# ── data ─────────────────────────────────────────────────────────────────


class IngestionError(NewsClfError, ValueError):
    """Dataset or corpus could not be ingested."""


class EmptyTextError(NewsClfError, ValueError):
    """Text has no tokens after tokenization."""


class EmptyDatasetError(NewsClfError, ValueError):
    """An iteration was requested over zero examples."""


class StratificationError(NewsClfError, ValueError):
    """A class has too few records to be split."""


class VocabularyError(NewsClfError, LookupError):
    """Token lookup failed or a vocabulary listing is missing/corrupt."""


class EmbeddingFormatError(NewsClfError, ValueError):
    """Embedding text file does not match its header or the vocabulary."""


class CheckpointError(NewsClfError, ValueError):
    """Checkpoint file is corrupt, truncated or inconsistent with its header."""


class ConfigError(NewsClfError, ValueError):
    """Invalid or unknown configuration."""


class GraphInputError(NewsClfError, ValueError):
    """Adjacency or node features are invalid."""


class TraceFormatError(NewsClfError, ValueError):
    """A loss-trace CSV could not be parsed."""


# ── run-level outcomes ───────────────────────────────────────────────────


class GradientCheckError(NewsClfError):
    """Analytic gradients disagree with finite differences."""

    exit_code = 1


class DivergenceError(NewsClfError, RuntimeError):
    """Training produced a non-finite loss."""

    exit_code = 3

    def __init__(self, message: str, checkpoint_path: Optional[Path] = None) -> None:
        super().__init__(message)
        self.checkpoint_path = checkpoint_path
