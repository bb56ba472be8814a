"""Per-entity parent accuracy and the loss-only vs loss+greedy comparison."""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

from .corpus import CorpusSplit
from .doc_model import Assignment, Document
from .errors import ValidationError
from .features import ExternalEmbeddings
from .matcher import MatchModel
from .pipeline import parse_hierarchy
from .rules import apply_all_rules

METHODS = ("loss_only", "loss_greedy")
EVAL_SPLITS = ("val", "test")

_ACC = {"type": "number", "minimum": 0.0, "maximum": 1.0}
_SPLIT_ACC = {
    "type": "object",
    "properties": {"val": _ACC, "test": _ACC},
    "required": ["val", "test"],
}
_DETAIL = {
    "type": "object",
    "properties": {
        "overall": _ACC,
        "rule_covered": {"type": ["number", "null"]},
        "residual": {"type": ["number", "null"]},
    },
    "required": ["overall", "rule_covered", "residual"],
}
REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "loss_only": _SPLIT_ACC,
        "loss_greedy": _SPLIT_ACC,
        "detail": {
            "type": "object",
            "properties": {"loss_only": _DETAIL, "loss_greedy": _DETAIL},
            "required": list(METHODS),
        },
    },
    "required": ["loss_only", "loss_greedy", "detail"],
}


def _scored(doc: Document, categories: frozenset[str] | None):
    for e in doc.entities:
        if e.gold_parent is None:
            continue
        if categories is not None and e.category not in categories:
            continue
        yield e


def accuracy_counts(
    predictions: Mapping[str, Assignment],
    gold: Iterable[Document],
    scored_categories: Iterable[str] | None = None,
    only: Mapping[str, set[str] | frozenset[str]] | None = None,
) -> tuple[int, int]:
    """(correct, scored) over labeled entities, optionally limited to ``only[doc_id]`` ids."""
    cats = frozenset(scored_categories) if scored_categories is not None else None
    correct = total = 0
    missing: list[str] = []
    for doc in gold:
        pred = predictions.get(doc.doc_id)
        keep = None if only is None else only.get(doc.doc_id, frozenset())
        for e in _scored(doc, cats):
            if keep is not None and e.id not in keep:
                continue
            if pred is None or e.id not in pred:
                missing.append(f"{doc.doc_id}/{e.id}")
                continue
            total += 1
            correct += pred[e.id] == e.gold_parent
    if missing:
        shown = ", ".join(missing[:20]) + (" ..." if len(missing) > 20 else "")
        raise ValidationError(f"{len(missing)} labeled entities lack predictions: {shown}")
    return correct, total


def accuracy(
    predictions: Mapping[str, Assignment],
    gold: CorpusSplit | Iterable[Document],
    scored_categories: Iterable[str] | None = None,
) -> float:
    """Fraction of labeled entities whose predicted parent equals the gold parent.

    A ROOT prediction matches only an explicit null label; unlabeled entities
    are skipped entirely.
    """
    docs = gold.documents if isinstance(gold, CorpusSplit) else gold
    correct, total = accuracy_counts(predictions, docs, scored_categories)
    if total == 0:
        raise ValidationError("no labeled entities to score")
    return correct / total


def _ratio(pair: tuple[int, int]) -> float | None:
    return pair[0] / pair[1] if pair[1] else None


def predict_corpus(
    docs: Sequence[Document],
    model: MatchModel,
    rules_enabled: bool = True,
    external: ExternalEmbeddings | None = None,
) -> dict[str, Assignment]:
    return {d.doc_id: parse_hierarchy(d, model, rules_enabled, external) for d in docs}


def compare_methods(
    corpus: CorpusSplit,
    model: MatchModel,
    external: ExternalEmbeddings | None = None,
    scored_categories: Iterable[str] | None = None,
) -> dict:
    """Val/test accuracy with rules off ("loss_only") and on ("loss_greedy").

    ``detail`` pools val and test and splits the score into entities the rule
    engine covers and the residual left for the matcher.
    """
    cats = frozenset(scored_categories) if scored_categories is not None else None
    pooled = [*corpus.val, *corpus.test]
    covered, residual = {}, {}
    for d in pooled:
        assignment, rest = apply_all_rules(d)
        covered[d.doc_id] = frozenset(assignment.parents)
        residual[d.doc_id] = rest
    report: dict = {"detail": {}}
    for method, rules_enabled in (("loss_only", False), ("loss_greedy", True)):
        preds = predict_corpus(pooled, model, rules_enabled, external)
        report[method] = {
            split: accuracy(preds, corpus.split(split), cats) for split in EVAL_SPLITS
        }
        report["detail"][method] = {
            "overall": _ratio(accuracy_counts(preds, pooled, cats)),
            "rule_covered": _ratio(accuracy_counts(preds, pooled, cats, covered)),
            "residual": _ratio(accuracy_counts(preds, pooled, cats, residual)),
        }
    return report


def format_table(report: dict) -> str:
    """Two-row accuracy table: method x (val, test)."""
    lines = [
        f"{'Method':<12} | {'val':>8} {'test':>8}",
        f"{'-' * 12}-+-{'-' * 17}",
    ]
    for method, label in (("loss_only", "loss only"), ("loss_greedy", "loss+greedy")):
        row = report[method]
        lines.append(f"{label:<12} | {row['val']:>8.5f} {row['test']:>8.5f}")
    return "\n".join(lines)
