"""Deterministic greedy rules for parent assignment.

Three rule groups run in order:

* ``rule1``: categories that never have a parent map to ROOT.
* ``rule2``: the heading chain section > subsection > subsubsection >
  subsubsubsection > paragraph. Each chain entity attaches to the nearest
  preceding entity (reading order) with a strictly smaller level, else ROOT.
* ``rule3``: fixed category dependencies (captions, forms, lists, form bodies).

Everything the rules leave unassigned is the residual handed to the matcher.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .doc_model import (
    CHAIN_CATEGORIES,
    NO_PARENT_CATEGORIES,
    ROOT,
    Assignment,
    Document,
    Entity,
)
from .errors import ConsistencyError

CAPTION_TARGETS = {"table_caption": "table", "figure_caption": "figure"}

_SECTION_FAMILY = ("section", "subsection", "subsubsection", "subsubsubsection")
FIXED_DEPENDENCIES: dict[str, frozenset[str]] = {
    "table_caption": frozenset({"table"}),
    "figure_caption": frozenset({"figure"}),
    "form": frozenset({"summary", "abstract", *_SECTION_FAMILY}),
    "list": frozenset({"paragraph", *_SECTION_FAMILY}),
    "form_body": frozenset({"form_title", "summary", "abstract", *_SECTION_FAMILY}),
}


@dataclass(frozen=True)
class RuleConfig:
    chain_levels: tuple[str, ...] = CHAIN_CATEGORIES
    fixed_deps: dict[str, frozenset[str]] = field(default_factory=lambda: dict(FIXED_DEPENDENCIES))
    no_parent_set: frozenset[str] = frozenset(NO_PARENT_CATEGORIES)

    def __post_init__(self) -> None:
        if len(self.chain_levels) != 5:
            raise ValueError("chain_levels must list exactly 5 categories")
        if len(self.no_parent_set) != 15:
            raise ValueError("no_parent_set must have exactly 15 categories")
        if set(self.fixed_deps) != set(FIXED_DEPENDENCIES):
            raise ValueError("fixed_deps must cover exactly the five dependent categories")

    def level(self, category: str) -> int | None:
        """Chain level 1..5, or None for non-chain categories."""
        try:
            return self.chain_levels.index(category) + 1
        except ValueError:
            return None

    def to_json(self) -> dict:
        return {
            "no_parent_set": sorted(self.no_parent_set),
            "chain_levels": {cat: i + 1 for i, cat in enumerate(self.chain_levels)},
            "fixed_deps": {k: sorted(v) for k, v in sorted(self.fixed_deps.items())},
        }


DEFAULT_RULES = RuleConfig()


def allowed_parents(category: str, cfg: RuleConfig = DEFAULT_RULES) -> frozenset[str] | None:
    """Parent-category restriction for rule-3 categories; None means unrestricted."""
    return cfg.fixed_deps.get(category)


def apply_root_rule(doc: Document, cfg: RuleConfig = DEFAULT_RULES) -> Assignment:
    out = Assignment()
    for e in doc.entities:
        if e.category in cfg.no_parent_set:
            out.assign(e.id, ROOT, "rule1")
    return out


def apply_section_chain_rule(doc: Document, cfg: RuleConfig = DEFAULT_RULES) -> Assignment:
    out = Assignment()
    # last_seen[k] = most recent id at chain level k+1 in reading order
    last_seen: list[str | None] = [None] * len(cfg.chain_levels)
    last_rank: list[int] = [-1] * len(cfg.chain_levels)
    for rank, eid in enumerate(doc.order):
        level = cfg.level(doc.by_id[eid].category)
        if level is None:
            continue
        if level >= 2:
            best = max(range(level - 1), key=lambda k: last_rank[k])
            parent = last_seen[best]
            out.assign(eid, ROOT if parent is None else parent, "rule2")
        last_seen[level - 1] = eid
        last_rank[level - 1] = rank
    return out


def _center_distance(a: Entity, b: Entity) -> float:
    (ax, ay), (bx, by) = a.bbox.center, b.bbox.center
    return math.hypot(ax - bx, ay - by)


def _nearest_in_flow(doc: Document, child: Entity, targets: list[Entity]) -> Entity | None:
    """Nearest preceding target in reading order, else nearest following, else None."""
    rank = doc.rank
    r = rank[child.id]
    before = [t for t in targets if rank[t.id] < r]
    if before:
        return max(before, key=lambda t: rank[t.id])
    after = [t for t in targets if rank[t.id] > r]
    if after:
        return min(after, key=lambda t: rank[t.id])
    return None


def _caption_parent(doc: Document, child: Entity, targets: list[Entity]) -> Entity | None:
    same_page = [t for t in targets if t.page == child.page]
    if same_page:
        rank = doc.rank
        return min(same_page, key=lambda t: (_center_distance(child, t), rank[t.id]))
    return _nearest_in_flow(doc, child, targets)


def apply_fixed_dependency_rule(
    doc: Document, residual: set[str] | frozenset[str], cfg: RuleConfig = DEFAULT_RULES
) -> Assignment:
    """Rule 3 over the residual ids; entities with no allowed parent in the document stay unassigned."""
    out = Assignment()
    for eid in doc.order:
        if eid not in residual:
            continue
        child = doc.by_id[eid]
        allowed = cfg.fixed_deps.get(child.category)
        if allowed is None:
            continue
        targets = [e for e in doc.entities if e.category in allowed and e.id != eid]
        if child.category in CAPTION_TARGETS:
            parent = _caption_parent(doc, child, targets)
            out.assign(eid, ROOT if parent is None else parent.id, "rule3")
        else:
            parent = _nearest_in_flow(doc, child, targets)
            if parent is not None:
                out.assign(eid, parent.id, "rule3")
    return out


def apply_all_rules(
    doc: Document, cfg: RuleConfig = DEFAULT_RULES
) -> tuple[Assignment, frozenset[str]]:
    """Compose the three rules; returns (partial assignment, residual ids)."""
    first = apply_root_rule(doc, cfg)
    second = apply_section_chain_rule(doc, cfg)
    combined = Assignment()
    combined.update(first)
    combined.update(second)
    residual = frozenset(e.id for e in doc.entities if e.id not in combined)
    combined.update(apply_fixed_dependency_rule(doc, residual, cfg))
    if len(combined) + len(residual - combined.parents.keys()) != len(doc):
        raise ConsistencyError(f"rule outputs inconsistent for document {doc.doc_id!r}")
    return combined, frozenset(residual - combined.parents.keys())
