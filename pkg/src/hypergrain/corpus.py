"""Document ingestion, paragraph segmentation, and dynamic chunk partitioning.

Documents are normalized once at ingestion (line endings unified, blank-line
runs collapsed to a single paragraph break) so that every downstream char
offset indexes a stable string. Paragraphs and chunks are verbatim slices of
that normalized text. Chunks are built by greedy forward aggregation of
paragraphs under a hard token ceiling, with a best-effort floor enforced by
a single tail-merge pass.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .errors import EmptyDocument

# A token counter maps text to a non-negative count. The default treats any
# maximal non-whitespace run as one token, which is deterministic and
# additive across whitespace-joined concatenation.
TokenCounter = Callable[[str], int]


def count_tokens(text: str) -> int:
    """Count tokens as maximal non-whitespace runs."""
    return len(text.split())


PARAGRAPH_SEPARATOR = "\n\n"

_SENTENCE_BOUNDARY = re.compile(r"(?<=[.!?])\s+")
_WHITESPACE_RUN = re.compile(r"\s+")


@dataclass(frozen=True)
class Document:
    """One source document with normalized text."""

    doc_id: str
    text: str
    source_path: str = ""


@dataclass(frozen=True)
class Paragraph:
    """A verbatim slice of the normalized document text.

    char_start/char_end locate the text in the document; pieces produced by
    long-paragraph splitting keep sub-slices of the original span.
    """

    doc_id: str
    ordinal: int
    text: str
    char_start: int = 0
    char_end: int = 0


@dataclass(frozen=True)
class Chunk:
    doc_id: str
    chunk_index: int  # 1-based
    text: str
    token_count: int
    char_start: int
    char_end: int


@dataclass(frozen=True)
class PartitionConfig:
    ct_min: int = 500
    ct_max: int = 600

    def __post_init__(self):
        if not (0 < self.ct_min < self.ct_max):
            raise ValueError(
                f"require 0 < ct_min < ct_max, got ct_min={self.ct_min} ct_max={self.ct_max}"
            )


def normalize_text(raw: str) -> str:
    """Normalize a raw document to the canonical stored form.

    Line endings become a single newline, paragraph separators collapse to
    one blank line, and outer blank lines are dropped. Text inside a
    paragraph is kept verbatim.
    """
    unified = raw.replace("\r\n", "\n").replace("\r", "\n")
    blocks: list[list[str]] = []
    current: list[str] = []
    for line in unified.split("\n"):
        if line.strip():
            current.append(line)
        elif current:
            blocks.append(current)
            current = []
    if current:
        blocks.append(current)
    return PARAGRAPH_SEPARATOR.join("\n".join(block) for block in blocks)


def read_document(doc_id: str, path: str | Path) -> Document:
    raw = Path(path).read_text(encoding="utf-8")
    return Document(doc_id=doc_id, text=normalize_text(raw), source_path=str(path))


def load_corpus_manifest(path: str | Path) -> list[Document]:
    """Load documents listed in a JSONL manifest of {doc_id, path} records.

    Relative paths resolve against the manifest's directory.
    """
    manifest_path = Path(path)
    base = manifest_path.parent
    documents: list[Document] = []
    seen: set[str] = set()
    with manifest_path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{manifest_path}:{lineno}: invalid manifest record: {exc}") from exc
            doc_id = record.get("doc_id")
            doc_path = record.get("path")
            if not doc_id or not doc_path:
                raise ValueError(f"{manifest_path}:{lineno}: manifest record needs doc_id and path")
            if doc_id in seen:
                raise ValueError(f"{manifest_path}:{lineno}: duplicate doc_id {doc_id!r}")
            seen.add(doc_id)
            resolved = Path(doc_path)
            if not resolved.is_absolute():
                resolved = base / resolved
            documents.append(read_document(doc_id, resolved))
    return documents


def segment_paragraphs(document: Document) -> list[Paragraph]:
    """Split a document into ordered paragraphs with char offsets.

    Raises EmptyDocument for whitespace-only input. Joining the result with
    the paragraph separator reproduces the normalized document text.
    """
    if not document.text.strip():
        raise EmptyDocument(f"document {document.doc_id!r} has no text")
    paragraphs: list[Paragraph] = []
    offset = 0
    for i, part in enumerate(document.text.split(PARAGRAPH_SEPARATOR)):
        paragraphs.append(
            Paragraph(
                doc_id=document.doc_id,
                ordinal=i,
                text=part,
                char_start=offset,
                char_end=offset + len(part),
            )
        )
        offset += len(part) + len(PARAGRAPH_SEPARATOR)
    return paragraphs


def _boundary_positions(text: str) -> tuple[list[int], list[int]]:
    """Candidate split positions: after sentence ends, and after whitespace runs."""
    sentence = [m.end() for m in _SENTENCE_BOUNDARY.finditer(text) if 0 < m.end() < len(text)]
    whitespace = [m.end() for m in _WHITESPACE_RUN.finditer(text) if 0 < m.end() < len(text)]
    return sentence, whitespace


def _best_split(text: str, tokenizer: TokenCounter) -> int:
    """Pick the split position nearest the token midpoint.

    Prefers sentence boundaries, falls back to whitespace, then to the char
    midpoint for a single unbroken token run.
    """
    sentence, whitespace = _boundary_positions(text)
    candidates = sentence or whitespace
    if not candidates:
        return max(1, len(text) // 2)
    half = tokenizer(text) / 2.0
    best, best_err = candidates[0], float("inf")
    for pos in candidates:
        err = abs(tokenizer(text[:pos]) - half)
        if err < best_err:
            best, best_err = pos, err
    return best


def split_long_paragraph(
    paragraph: Paragraph,
    ct_max: int,
    tokenizer: TokenCounter = count_tokens,
) -> list[Paragraph]:
    """Recursively halve an overlong paragraph until every piece fits ct_max.

    Pieces are verbatim sub-slices: concatenating them reproduces the input
    text, and their char offsets stay valid against the document.
    """
    if tokenizer(paragraph.text) <= ct_max:
        raise ValueError("split_long_paragraph requires a paragraph above ct_max tokens")

    def split(text: str, base: int) -> list[tuple[str, int]]:
        if tokenizer(text) <= ct_max:
            return [(text, base)]
        pos = _best_split(text, tokenizer)
        left, right = text[:pos], text[pos:]
        if not left or not right:
            return [(text, base)]  # cannot split further
        return split(left, base) + split(right, base + pos)

    return [
        Paragraph(
            doc_id=paragraph.doc_id,
            ordinal=paragraph.ordinal,
            text=piece,
            char_start=paragraph.char_start + base,
            char_end=paragraph.char_start + base + len(piece),
        )
        for piece, base in split(paragraph.text, 0)
    ]


def _presplit(
    paragraphs: list[Paragraph], ct_max: int, tokenizer: TokenCounter
) -> list[Paragraph]:
    out: list[Paragraph] = []
    for para in paragraphs:
        if tokenizer(para.text) > ct_max:
            out.extend(split_long_paragraph(para, ct_max, tokenizer))
        else:
            out.append(para)
    return out


def _join_pieces(pieces: list[Paragraph]) -> str:
    """Rebuild the verbatim document slice a run of pieces covers.

    Adjacent pieces from one split paragraph abut directly; a real paragraph
    boundary contributes the separator.
    """
    parts = [pieces[0].text]
    for prev, piece in zip(pieces, pieces[1:]):
        gap = piece.char_start - prev.char_end
        parts.append(PARAGRAPH_SEPARATOR if gap else "")
        parts.append(piece.text)
    return "".join(parts)


def partition(
    paragraphs: list[Paragraph],
    config: PartitionConfig,
    tokenizer: TokenCounter = count_tokens,
) -> list[Chunk]:
    """Aggregate ordered paragraphs into token-balanced chunks.

    Overlong paragraphs are split first. Greedy forward pass: paragraphs
    join the current chunk while the joined text stays within ct_max. A
    final chunk below ct_min merges into its predecessor only when the merge
    respects ct_max; earlier chunks are never revisited.
    """
    if not paragraphs:
        raise ValueError("partition requires at least one paragraph")
    paragraphs = _presplit(paragraphs, config.ct_max, tokenizer)
    doc_id = paragraphs[0].doc_id

    groups: list[list[Paragraph]] = []
    current: list[Paragraph] = []
    for para in paragraphs:
        if not current:
            current = [para]
            continue
        if tokenizer(_join_pieces(current + [para])) > config.ct_max:
            groups.append(current)
            current = [para]
        else:
            current.append(para)
    groups.append(current)

    # Tail merge: best effort on ct_min, never at the cost of the ct_max bound.
    if len(groups) >= 2 and tokenizer(_join_pieces(groups[-1])) < config.ct_min:
        merged = groups[-2] + groups[-1]
        if tokenizer(_join_pieces(merged)) <= config.ct_max:
            groups[-2:] = [merged]

    chunks: list[Chunk] = []
    for index, group in enumerate(groups, start=1):
        text = _join_pieces(group)
        chunks.append(
            Chunk(
                doc_id=doc_id,
                chunk_index=index,
                text=text,
                token_count=tokenizer(text),
                char_start=group[0].char_start,
                char_end=group[-1].char_end,
            )
        )
    return chunks


def reconstruct_from_chunks(chunks: list[Chunk], document_text: str) -> str:
    """Join chunk texts with the document gaps between them.

    With correct spans this reproduces the normalized document text exactly;
    it is the inverse of partitioning and exists for integrity checks.
    """
    parts: list[str] = []
    for prev, chunk in zip([None] + list(chunks), chunks):
        if prev is not None:
            parts.append(document_text[prev.char_end:chunk.char_start])
        parts.append(chunk.text)
    return "".join(parts)


def partition_document(
    document: Document,
    config: PartitionConfig,
    tokenizer: TokenCounter = count_tokens,
) -> list[Chunk]:
    """Segment and partition one document in a single call."""
    return partition(segment_paragraphs(document), config, tokenizer)
