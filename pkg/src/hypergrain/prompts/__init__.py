"""Prompt template assets.

Templates ship as plain text files with [[NAME]] placeholders and can be
overridden per deployment by pointing the provider config at a directory
containing files with the same names.
"""
from __future__ import annotations

from importlib import resources
from pathlib import Path

TEMPLATE_NAMES = (
    "extraction",
    "entity_summary",
    "pairwise_relations",
    "query_entities",
    "answer",
)

SYSTEM_PROMPT = (
    "You are a careful information extraction and question answering "
    "assistant. Follow the output format instructions exactly."
)


def load_template(name: str, override_dir: str | Path | None = None) -> str:
    if name not in TEMPLATE_NAMES:
        raise KeyError(f"unknown prompt template {name!r}")
    if override_dir is not None:
        candidate = Path(override_dir) / f"{name}.txt"
        if candidate.exists():
            return candidate.read_text(encoding="utf-8")
    return resources.files(__package__).joinpath(f"{name}.txt").read_text(encoding="utf-8")


def render(template: str, **fields: str) -> str:
    """Fill [[NAME]] placeholders. Unknown placeholders are an error."""
    out = template
    for key, value in fields.items():
        out = out.replace(f"[[{key.upper()}]]", value)
    if "[[" in out and "]]" in out:
        start = out.index("[[")
        raise ValueError(f"unfilled placeholder near: {out[start:start + 30]!r}")
    return out
