"""Answer metrics and batch evaluation.

Exact match and token F1 follow the usual QA normalization: lowercase,
punctuation stripped, whitespace collapsed. Article stripping is available
but off by default; scores are only comparable under one pinned scheme.
"""
from __future__ import annotations

import json
import logging
import re
import string
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DatasetError
from .providers import Provider
from .retrieval import RetrievalConfig, answer_query
from .store import KnowledgeBase

log = logging.getLogger(__name__)

_ARTICLES = re.compile(r"\b(a|an|the)\b")


def normalize_answer(text: str, strip_articles: bool = False) -> str:
    text = text.lower()
    if strip_articles:
        text = _ARTICLES.sub(" ", text)
    text = "".join(ch for ch in text if ch not in string.punctuation)
    return " ".join(text.split())


def exact_match(prediction: str, gold: str) -> int:
    return int(normalize_answer(prediction) == normalize_answer(gold))


def token_f1(prediction: str, gold: str) -> float:
    """Harmonic mean of precision and recall over normalized token multisets."""
    pred_tokens = normalize_answer(prediction).split()
    gold_tokens = normalize_answer(gold).split()
    if not pred_tokens or not gold_tokens:
        return float(pred_tokens == gold_tokens)
    overlap = sum((Counter(pred_tokens) & Counter(gold_tokens)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class QAPair:
    question: str
    gold_answer: str
    domain: str = ""

    def __post_init__(self):
        if not self.question.strip() or not self.gold_answer.strip():
            raise ValueError("question and gold_answer must be non-empty")


@dataclass
class EvalItem:
    question: str
    gold_answer: str
    prediction: str
    em: int
    f1: float


@dataclass
class EvalReport:
    items: list[EvalItem] = field(default_factory=list)
    em_mean: float = 0.0
    f1_mean: float = 0.0
    usage: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)
    parse_errors: list[str] = field(default_factory=list)

    def to_record(self) -> dict:
        return {
            "em_mean": self.em_mean,
            "f1_mean": self.f1_mean,
            "items": [
                {
                    "question": it.question,
                    "gold_answer": it.gold_answer,
                    "prediction": it.prediction,
                    "em": it.em,
                    "f1": it.f1,
                }
                for it in self.items
            ],
            "usage": self.usage,
            "config": self.config,
            "flags": self.flags,
            "parse_errors": self.parse_errors,
        }

    def table(self) -> str:
        lines = [f"{'EM':>6} {'F1':>6}  question"]
        for it in self.items:
            lines.append(f"{it.em:>6} {it.f1:>6.3f}  {it.question}")
        lines.append(f"mean EM={self.em_mean:.4f} F1={self.f1_mean:.4f} over {len(self.items)} items")
        return "\n".join(lines)


def load_qa_dataset(path: str | Path) -> tuple[list[QAPair], list[str]]:
    """JSONL of {question, answer, domain?}; bad lines are reported, not fatal."""
    pairs: list[QAPair] = []
    errors: list[str] = []
    file_path = Path(path)
    with file_path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                pairs.append(
                    QAPair(
                        question=record["question"],
                        gold_answer=record["answer"],
                        domain=record.get("domain", ""),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                errors.append(f"{file_path.name}:{lineno}: {exc}")
    if not pairs:
        raise DatasetError(f"{file_path} contains no usable QA pairs")
    return pairs, errors


def run_eval(
    dataset: list[QAPair],
    kb: KnowledgeBase,
    provider: Provider,
    config: RetrievalConfig | None = None,
    disabled: frozenset[str] = frozenset(),
    prompt_dir: str | None = None,
    parse_errors: list[str] | None = None,
) -> EvalReport:
    """Answer every pair, score it, and aggregate means plus usage totals."""
    if not dataset:
        raise DatasetError("evaluation dataset is empty")
    config = config or RetrievalConfig()
    report = EvalReport(
        config={
            "mode": config.mode,
            "n_hyperedges": config.n_hyperedges,
            "n_edges": config.n_edges,
            "tau_hyperedges": config.tau_hyperedges,
            "tau_edges": config.tau_edges,
        },
        flags=sorted(disabled),
        parse_errors=list(parse_errors or []),
    )
    for pair in dataset:
        result = answer_query(
            kb, pair.question, provider, config, disabled=disabled, prompt_dir=prompt_dir
        )
        report.items.append(
            EvalItem(
                question=pair.question,
                gold_answer=pair.gold_answer,
                prediction=result.answer,
                em=exact_match(result.answer, pair.gold_answer),
                f1=token_f1(result.answer, pair.gold_answer),
            )
        )
    report.em_mean = sum(it.em for it in report.items) / len(report.items)
    report.f1_mean = sum(it.f1 for it in report.items) / len(report.items)
    report.usage = provider.usage.report()
    return report


def sensitivity_sweep(
    kb: KnowledgeBase,
    provider: Provider,
    dataset: list[QAPair],
    values: list[int],
    base_config: RetrievalConfig | None = None,
    parameter: str = "n_hyperedges",
    prompt_dir: str | None = None,
) -> dict:
    """Sweep one retrieval cap and record candidate counts and scores.

    The mean retrieved-candidate count is the harness's structural signal: a
    larger cap can never retrieve fewer candidates at a fixed threshold.
    """
    if parameter not in ("n_hyperedges", "n_edges"):
        raise ValueError(f"unsupported sweep parameter {parameter!r}")
    base = base_config or RetrievalConfig()
    points = []
    for value in values:
        config = RetrievalConfig(
            n_hyperedges=value if parameter == "n_hyperedges" else base.n_hyperedges,
            n_edges=value if parameter == "n_edges" else base.n_edges,
            tau_hyperedges=base.tau_hyperedges,
            tau_edges=base.tau_edges,
            mode=base.mode,
            evidence_token_budget=base.evidence_token_budget,
        )
        candidate_counts = []
        ems = []
        f1s = []
        for pair in dataset:
            result = answer_query(kb, pair.question, provider, config, prompt_dir=prompt_dir)
            count = (
                len(result.bundle.hyperedges)
                if parameter == "n_hyperedges"
                else len(result.bundle.edges)
            )
            candidate_counts.append(count)
            ems.append(exact_match(result.answer, pair.gold_answer))
            f1s.append(token_f1(result.answer, pair.gold_answer))
        points.append(
            {
                "value": value,
                "mean_candidates": sum(candidate_counts) / len(candidate_counts),
                "em_mean": sum(ems) / len(ems),
                "f1_mean": sum(f1s) / len(f1s),
            }
        )
    return {"parameter": parameter, "points": points}
