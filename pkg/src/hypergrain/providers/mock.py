"""Deterministic offline provider.

Routes chat requests on the section tags the prompt templates use, answers
them with fixed pattern rules, and embeds text as seeded character n-gram
hash vectors. Same inputs give bit-identical outputs on every platform,
which is what the golden end-to-end tests rely on.
"""
from __future__ import annotations

import hashlib
import json
import re
import time

import numpy as np

from ..corpus import count_tokens
from ..errors import ResponseTooLong
from .base import ChatRequest, EmbeddingVector, Provider, UsageRecord

_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")

# Function words excluded from the capitalized-run entity rule. Sentence-initial
# articles and wh-words would otherwise surface as entities in every sentence.
STOPWORDS = frozenset(
    """
    a an the and or but nor if then else when where while who whom whose what
    which why how is are was were be been being am do does did has have had
    having will would shall should can could may might must in on at of for to
    from by with as into onto over under between among during before after
    about against it its it's this that these those he she they we you i his
    her their our your my me him them us there here not no yes so such also
    because although though since until unless
    """.split()
)


def split_sentences(text: str) -> list[str]:
    """Sentence-ish segments; each returned string is verbatim in the input."""
    return [s.strip() for s in _SENTENCE_SPLIT.split(text) if s.strip()]


def find_entity_mentions(text: str) -> list[str]:
    """Entity names as runs of capitalized or numeric tokens.

    Surrounding punctuation is stripped per token; function words never
    start or join a run. Order of first appearance is preserved.
    """
    mentions: list[str] = []
    run: list[str] = []
    for raw in text.split():
        core = raw.strip("\"'`.,;:!?()[]{}<>")
        qualifies = bool(core) and (core[0].isupper() or core.isdigit())
        if qualifies and core.lower() in STOPWORDS:
            qualifies = False
        if qualifies:
            run.append(core)
        elif run:
            mentions.append(" ".join(run))
            run = []
    if run:
        mentions.append(" ".join(run))
    seen: set[str] = set()
    ordered: list[str] = []
    for name in mentions:
        if name not in seen:
            seen.add(name)
            ordered.append(name)
    return ordered


def _section(prompt: str, tag: str) -> str:
    match = re.search(rf"<{tag}>\n?(.*?)\n?</{tag}>", prompt, re.DOTALL)
    return match.group(1) if match else ""


class MockProvider(Provider):
    """Rule-based stand-in for a hosted chat + embeddings endpoint."""

    def __init__(self, dimension: int = 64, seed: int = 0):
        super().__init__()
        if dimension < 8:
            raise ValueError("mock embedding dimension must be >= 8")
        self.dimension = dimension
        self.seed = seed

    # -- chat -------------------------------------------------------------

    def chat(self, request: ChatRequest, phase: str = "construction") -> str:
        request.validate()
        started = time.perf_counter()
        response = self._respond(request.user_prompt)
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        self.usage.add(
            UsageRecord(
                phase=phase,
                prompt_tokens=count_tokens(request.system_prompt) + count_tokens(request.user_prompt),
                response_tokens=count_tokens(response),
                wall_time_ms=elapsed_ms,
            )
        )
        if count_tokens(response) > request.max_output_tokens:
            raise ResponseTooLong(
                f"mock response of {count_tokens(response)} tokens exceeds "
                f"max_output_tokens={request.max_output_tokens}"
            )
        return response

    def _respond(self, prompt: str) -> str:
        if "<anchor>" in prompt:
            return self._pairwise_relations(prompt)
        if "<passage>" in prompt:
            return self._extract(prompt)
        if "<entity>" in prompt:
            return self._summarize(prompt)
        if "<query>" in prompt:
            return self._answer(prompt)
        if "<question>" in prompt:
            return json.dumps(find_entity_mentions(_section(prompt, "question")))
        raise ValueError("mock provider cannot route this prompt")

    def _extract(self, prompt: str) -> str:
        passage = _section(prompt, "passage")
        items = []
        for sentence in split_sentences(passage):
            entities = find_entity_mentions(sentence)
            items.append(
                {"statement": sentence, "source_span": sentence, "entities": entities}
            )
        return json.dumps(items)

    def _summarize(self, prompt: str) -> str:
        name = _section(prompt, "entity")
        statements = [s for s in _section(prompt, "statements").splitlines() if s.strip()]
        leads = "; ".join(s.lstrip("- ").strip() for s in statements[:3])
        return f"{name}: {leads}" if leads else name

    def _pairwise_relations(self, prompt: str) -> str:
        try:
            evidence = json.loads(_section(prompt, "evidence"))
        except json.JSONDecodeError:
            evidence = []
        edges = []
        for item in evidence:
            statement = item.get("statement", "")
            span = item.get("span", statement)
            mentions = find_entity_mentions(statement)
            for left, right in zip(mentions, mentions[1:]):
                relation = self._between(statement, left, right)
                if relation:
                    edges.append(
                        {
                            "source": left,
                            "target": right,
                            "relation": relation,
                            "evidence_span": span,
                        }
                    )
        return json.dumps(edges)

    @staticmethod
    def _between(statement: str, left: str, right: str) -> str:
        start = statement.find(left)
        end = statement.find(right, start + len(left))
        if start < 0 or end <= start:
            return ""
        middle = statement[start + len(left):end].strip(" ,;:")
        words = middle.split()
        if not words or len(words) > 8:
            return ""
        return " ".join(words).rstrip(".!?")

    def _answer(self, prompt: str) -> str:
        evidence = _section(prompt, "evidence")
        query = _section(prompt, "query")
        for header in ("Relations:", "Statements:", "Entities:", "Context:"):
            block = self._first_item(evidence, header)
            if block:
                return block
        return f"No supporting evidence was retrieved; cannot answer: {query.strip()}"

    @staticmethod
    def _first_item(evidence: str, header: str) -> str:
        lines = evidence.splitlines()
        for i, line in enumerate(lines):
            if line.strip() == header:
                for candidate in lines[i + 1:]:
                    stripped = candidate.strip()
                    if stripped.startswith("- "):
                        return stripped[2:].strip()
                    if stripped and not stripped.startswith("- "):
                        break
        return ""

    # -- embeddings --------------------------------------------------------

    def embed(self, texts: list[str], phase: str = "construction") -> list[EmbeddingVector]:
        self._validate_embed_inputs(texts)
        started = time.perf_counter()
        vectors = [self._embed_one(t) for t in texts]
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        self.usage.add(
            UsageRecord(
                phase=phase,
                prompt_tokens=sum(count_tokens(t) for t in texts),
                response_tokens=0,
                wall_time_ms=elapsed_ms,
            )
        )
        return vectors

    def _embed_one(self, text: str) -> EmbeddingVector:
        normalized = " ".join(text.casefold().split())
        padded = f"\x02{normalized}\x03"
        vec = np.zeros(self.dimension)
        for i in range(len(padded) - 2):
            gram = padded[i:i + 3]
            digest = hashlib.sha256(f"{self.seed}|{gram}".encode()).digest()
            index = int.from_bytes(digest[:4], "big") % self.dimension
            sign = 1.0 if digest[4] & 1 else -1.0
            vec[index] += sign
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            vec[0] = 1.0
            norm = 1.0
        return EmbeddingVector(tuple(float(v) for v in vec / norm))
