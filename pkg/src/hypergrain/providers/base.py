"""Provider interface for chat completion and text embedding.

Every model call in the pipeline goes through this boundary, which also owns
usage accounting so construction and generation costs can be reported
separately.
"""
from __future__ import annotations

import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

CONSTRUCTION = "construction"
GENERATION = "generation"


@dataclass(frozen=True)
class ChatRequest:
    system_prompt: str
    user_prompt: str
    temperature: float = 0.0
    max_output_tokens: int = 2048

    def validate(self) -> None:
        if not self.system_prompt.strip() or not self.user_prompt.strip():
            raise ValueError("chat prompts must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]

    @property
    def dimension(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class UsageRecord:
    phase: str
    prompt_tokens: int
    response_tokens: int
    wall_time_ms: float


@dataclass
class PhaseTotals:
    calls: int = 0
    prompt_tokens: int = 0
    response_tokens: int = 0
    wall_time_ms: float = 0.0


@dataclass
class UsageTracker:
    """Thread-safe accumulator of per-call usage, grouped by phase."""

    records: list[UsageRecord] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def add(self, record: UsageRecord) -> None:
        if record.prompt_tokens < 0 or record.response_tokens < 0:
            raise ValueError("token counts must be non-negative")
        with self._lock:
            self.records.append(record)

    def totals(self, phase: str | None = None) -> PhaseTotals:
        out = PhaseTotals()
        with self._lock:
            for rec in self.records:
                if phase is not None and rec.phase != phase:
                    continue
                out.calls += 1
                out.prompt_tokens += rec.prompt_tokens
                out.response_tokens += rec.response_tokens
                out.wall_time_ms += rec.wall_time_ms
        return out

    def report(self) -> dict:
        """Construction/generation breakdown suitable for serialization."""
        out = {}
        for phase in (CONSTRUCTION, GENERATION):
            totals = self.totals(phase)
            out[phase] = {
                "calls": totals.calls,
                "prompt_tokens": totals.prompt_tokens,
                "response_tokens": totals.response_tokens,
                "wall_time_ms": round(totals.wall_time_ms, 3),
            }
        return out


class Provider(ABC):
    """Chat + embedding endpoint with built-in usage accounting."""

    def __init__(self):
        self.usage = UsageTracker()

    @abstractmethod
    def chat(self, request: ChatRequest, phase: str = CONSTRUCTION) -> str:
        """Run one chat completion and return the model text."""

    @abstractmethod
    def embed(self, texts: list[str], phase: str = CONSTRUCTION) -> list[EmbeddingVector]:
        """Embed each text; all returned vectors share one dimension."""

    @staticmethod
    def _validate_embed_inputs(texts: list[str]) -> None:
        if not texts:
            raise ValueError("embed requires at least one text")
        for t in texts:
            if not t.strip():
                raise ValueError("embed inputs must be non-empty")
