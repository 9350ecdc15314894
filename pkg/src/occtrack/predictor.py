"""The abstract per-frame predictor the control layer runs on top of."""

from __future__ import annotations

from typing import Any, Protocol

from .core import CandidateMask, PredictorOutput
from .memory import MemoryDecision


class PredictorError(RuntimeError):
    pass


class Predictor(Protocol):
    """Backbone boundary.

    A *context* is an opaque handle for one inference state (the main path or
    a branch). Contexts are values: ``advance`` and ``prompt`` return new
    handles and never mutate the ones passed in.
    """

    frame_size: tuple[int, int]
    length: int

    def initial_context(self) -> Any: ...

    def predict(self, t: int, context: Any, memory: MemoryDecision | None = None) -> PredictorOutput: ...

    def prompt(
        self, t: int, candidate: CandidateMask, context_id: str, memory: MemoryDecision | None = None
    ) -> tuple[Any, PredictorOutput]:
        """Re-inject ``candidate`` as a prompt; returns the new context and its output at ``t``."""
        ...

    def advance(self, context: Any, t: int, candidate: CandidateMask) -> Any:
        """Write ``candidate`` into the context's memory."""
        ...
