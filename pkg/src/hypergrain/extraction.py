"""Windowed knowledge extraction over a document's chunks.

Each chunk is extracted together with a bounded prefix of preceding chunks.
The window start index follows a truncated schedule so consecutive windows
overlap by a fixed number of chunks, which keeps context available at chunk
boundaries without unbounded prompt growth.
"""
from __future__ import annotations

import json
import logging
import re
import threading
from collections import OrderedDict
from dataclasses import dataclass

from .corpus import PARAGRAPH_SEPARATOR, Chunk
from .errors import DegenerateWindow, ExtractionParseFailure
from .prompts import SYSTEM_PROMPT, load_template, render
from .providers import ChatRequest, Provider

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class WindowConfig:
    g_max: int = 3
    g_overlap: int = 2

    def __post_init__(self):
        if self.g_max < 1 or self.g_overlap < 0:
            raise ValueError(f"require g_max >= 1 and g_overlap >= 0, got {self}")
        if self.g_overlap >= self.g_max:
            raise ValueError(f"require g_overlap < g_max, got {self}")


@dataclass(frozen=True)
class KnowledgeItem:
    item_id: str
    k_text: str
    k_ref: str
    k_entities: tuple[str, ...]
    k_index: int
    chunk_index: int
    window_start: int  # first chunk index of the window the span lives in
    ref_offset: int  # char offset of k_ref within the window text


def window_start(i: int, config: WindowConfig) -> int:
    """Effective start index s(i) of the extraction window for chunk i.

    s(i) = max(1, t(i)) with
    t(i) = floor((i - 1 - g_overlap) / (g_max - g_overlap)) * (g_max - g_overlap) + 1.
    Python floor division gives the mathematical floor for the negative
    numerators that occur at small i.
    """
    if i < 1:
        raise ValueError(f"chunk index must be >= 1, got {i}")
    step = config.g_max - config.g_overlap
    if step == 0:
        raise DegenerateWindow("g_max == g_overlap leaves the window schedule undefined")
    tau = ((i - 1 - config.g_overlap) // step) * step + 1
    return max(1, tau)


def build_prefix(chunks: list[Chunk], i: int, config: WindowConfig) -> list[Chunk]:
    """Chunks C_{s(i)} .. C_{i-1}; empty for the first chunk."""
    if not 1 <= i <= len(chunks):
        raise ValueError(f"chunk index {i} outside 1..{len(chunks)}")
    if i == 1:
        return []
    start = window_start(i, config)
    return chunks[start - 1:i - 1]


def window_text(prefix: list[Chunk], chunk: Chunk) -> str:
    """The text a span may reference: prefix chunks plus the chunk itself."""
    return PARAGRAPH_SEPARATOR.join([c.text for c in prefix] + [chunk.text])


def parse_json_array(response: str) -> list:
    """Extract the first well-formed JSON array from a model response.

    Tolerates surrounding prose and code fences.
    """
    decoder = json.JSONDecoder()
    for match in re.finditer(r"\[", response):
        try:
            value, _ = decoder.raw_decode(response, match.start())
        except json.JSONDecodeError:
            continue
        if isinstance(value, list):
            return value
    raise ExtractionParseFailure("no JSON array found in response")


def locate_span(span: str, text: str) -> tuple[str, int] | None:
    """Find a span in text, verbatim first, then whitespace-insensitively.

    Returns the exact substring of `text` and its offset, or None. The fuzzy
    pass rewrites the span to the matched substring so the verbatim
    invariant holds afterwards.
    """
    span = span.strip()
    if not span:
        return None
    offset = text.find(span)
    if offset >= 0:
        return span, offset
    tokens = span.split()
    if not tokens:
        return None
    pattern = r"\s+".join(re.escape(tok) for tok in tokens)
    match = re.search(pattern, text)
    if match:
        return match.group(0), match.start()
    return None


class PrefixCache:
    """Bounded LRU over window extraction results.

    Keys are (doc_id, window_start, previous_chunk_index); for a fixed window
    config that pins the window, so repeated extraction of the same window is
    served without a provider call.
    """

    def __init__(self, max_entries: int = 256):
        self.max_entries = max_entries
        self._entries: OrderedDict[tuple, list[KnowledgeItem]] = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, key: tuple) -> list[KnowledgeItem] | None:
        with self._lock:
            if key in self._entries:
                self._entries.move_to_end(key)
                self.hits += 1
                return list(self._entries[key])
            self.misses += 1
            return None

    def put(self, key: tuple, items: list[KnowledgeItem]) -> None:
        with self._lock:
            self._entries[key] = list(items)
            self._entries.move_to_end(key)
            while len(self._entries) > self.max_entries:
                self._entries.popitem(last=False)


class KnowledgeExtractor:
    """Runs windowed extraction for one provider and window config."""

    def __init__(
        self,
        provider: Provider,
        config: WindowConfig | None = None,
        prompt_dir: str | None = None,
        cache: PrefixCache | None = None,
        temperature: float = 0.0,
    ):
        self.provider = provider
        self.config = config or WindowConfig()
        self.template = load_template("extraction", prompt_dir)
        self.cache = cache
        self.temperature = temperature

    def extract_chunk(
        self, chunk: Chunk, prefix: list[Chunk], start_index: int = 1
    ) -> list[KnowledgeItem]:
        """Extract items from one chunk given its prefix.

        Returned items carry consecutive k_index values starting at
        start_index. Raises ExtractionParseFailure when the response cannot
        be parsed even after one repair attempt.
        """
        scope = window_text(prefix, chunk)
        prompt = render(
            self.template,
            context=PARAGRAPH_SEPARATOR.join(c.text for c in prefix),
            passage=chunk.text,
        )
        raw = self._chat_with_repair(prompt)
        items: list[KnowledgeItem] = []
        index = start_index
        start_chunk = prefix[0].chunk_index if prefix else chunk.chunk_index
        for record in raw:
            parsed = self._validate_record(record, scope, chunk, start_chunk, index)
            if parsed is not None:
                items.append(parsed)
                index += 1
        return items

    def _chat_with_repair(self, prompt: str) -> list:
        request = ChatRequest(
            system_prompt=SYSTEM_PROMPT, user_prompt=prompt, temperature=self.temperature
        )
        response = self.provider.chat(request)
        try:
            return parse_json_array(response)
        except ExtractionParseFailure:
            log.warning("extraction response unparseable, retrying once")
        repair = ChatRequest(
            system_prompt=SYSTEM_PROMPT,
            user_prompt=prompt + "\n\nYour previous reply could not be parsed. "
            "Respond with only the JSON array, nothing else.",
            temperature=self.temperature,
        )
        return parse_json_array(self.provider.chat(repair))

    def _validate_record(
        self, record, scope: str, chunk: Chunk, start_chunk: int, index: int
    ) -> KnowledgeItem | None:
        if not isinstance(record, dict):
            return None
        statement = str(record.get("statement", "")).strip()
        span = str(record.get("source_span", "")).strip()
        raw_entities = record.get("entities", [])
        if not statement or not span or not isinstance(raw_entities, list):
            return None
        entities: list[str] = []
        for name in raw_entities:
            name = str(name).strip()
            if name and name not in entities:
                entities.append(name)
        if len(entities) < 2:
            return None  # an n-ary relation connects at least two entities
        located = locate_span(span, scope)
        if located is None:
            log.warning(
                "dropping item with unlocatable span in %s chunk %d: %r",
                chunk.doc_id, chunk.chunk_index, span[:60],
            )
            return None
        exact_span, offset = located
        return KnowledgeItem(
            item_id=f"{chunk.doc_id}:k{index}",
            k_text=statement,
            k_ref=exact_span,
            k_entities=tuple(entities),
            k_index=index,
            chunk_index=chunk.chunk_index,
            window_start=start_chunk,
            ref_offset=offset,
        )

    def extract_document(self, chunks: list[Chunk], workers: int = 1) -> list[KnowledgeItem]:
        """Extract all chunks of one document in chunk order.

        Per-chunk parse failures are logged and skipped; the call fails only
        when every chunk fails. k_index values are assigned by chunk order
        regardless of any provider-level concurrency.
        """
        if not chunks:
            return []
        doc_id = chunks[0].doc_id
        raw_results: list[list[KnowledgeItem] | None] = [None] * len(chunks)
        failures = 0

        def run(i: int) -> list[KnowledgeItem] | None:
            chunk = chunks[i]
            prefix = build_prefix(chunks, chunk.chunk_index, self.config)
            key = (doc_id, prefix[0].chunk_index if prefix else chunk.chunk_index, chunk.chunk_index - 1)
            if self.cache is not None:
                cached = self.cache.get(key)
                if cached is not None:
                    return cached
            try:
                items = self.extract_chunk(chunk, prefix, start_index=1)
            except ExtractionParseFailure as exc:
                log.warning("skipping %s chunk %d: %s", doc_id, chunk.chunk_index, exc)
                return None
            if self.cache is not None:
                self.cache.put(key, items)
            return items

        if workers > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=workers) as pool:
                raw_results = list(pool.map(run, range(len(chunks))))
        else:
            raw_results = [run(i) for i in range(len(chunks))]

        items: list[KnowledgeItem] = []
        next_index = 1
        for result in raw_results:
            if result is None:
                failures += 1
                continue
            for item in result:
                items.append(
                    KnowledgeItem(
                        item_id=f"{doc_id}:k{next_index}",
                        k_text=item.k_text,
                        k_ref=item.k_ref,
                        k_entities=item.k_entities,
                        k_index=next_index,
                        chunk_index=item.chunk_index,
                        window_start=item.window_start,
                        ref_offset=item.ref_offset,
                    )
                )
                next_index += 1
        if failures == len(chunks):
            raise ExtractionParseFailure(f"every chunk of {doc_id} failed extraction")
        return items
