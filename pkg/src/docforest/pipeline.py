"""Full per-document parse: rules first, matcher on whatever they leave."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .doc_model import ROOT, Assignment, Document
from .errors import ConsistencyError
from .features import ExternalEmbeddings
from .matcher import MatchModel, candidate_mask, embed_document, pick_candidate, score_matrix
from .rules import DEFAULT_RULES, RuleConfig, apply_all_rules


def parse_hierarchy(
    doc: Document,
    model: MatchModel,
    rules_enabled: bool = True,
    external: ExternalEmbeddings | None = None,
    rules: RuleConfig = DEFAULT_RULES,
) -> Assignment:
    """Assign every entity a parent id or ROOT.

    With rules disabled every entity goes to the matcher with all other
    entities as candidates. With rules enabled the matcher only sees the
    rule residual, with rule-3 category restrictions on its candidates.
    An empty candidate set yields ROOT.
    """
    if rules_enabled:
        assignment, residual = apply_all_rules(doc, rules)
        mask = candidate_mask(doc, rules)
    else:
        assignment, residual = Assignment(), frozenset(e.id for e in doc.entities)
        mask = ~np.eye(len(doc.entities), dtype=bool)

    if residual:
        Uc, Up = embed_document(model, doc, external)
        ids = [e.id for e in doc.entities]
        index = {eid: i for i, eid in enumerate(ids)}
        scores = score_matrix(Uc, Up)
        for eid in doc.order:
            if eid not in residual:
                continue
            i = index[eid]
            cand = np.flatnonzero(mask[i])
            if cand.size == 0:
                assignment.assign(eid, ROOT, "matcher")
            else:
                parent = pick_candidate(scores[i, cand], [ids[j] for j in cand], doc)
                assignment.assign(eid, parent, "matcher")

    if len(assignment) != len(doc.entities):
        raise ConsistencyError(f"incomplete assignment for document {doc.doc_id!r}")
    return assignment


@dataclass
class ForestReport:
    cycles: list[list[str]] = field(default_factory=list)
    orphans: int = 0

    def to_json(self) -> dict:
        return {"cycles": self.cycles, "orphans": self.orphans}


def check_forest(doc: Document, a: Assignment) -> ForestReport:
    """Directed cycles of the parent graph and the number of ROOT decisions.

    Each cycle is listed starting from its lexicographically smallest id,
    following parent links; cycles are sorted by that first id.
    """
    missing = [e.id for e in doc.entities if e.id not in a]
    if missing:
        raise ConsistencyError(f"assignment incomplete, missing {missing}")
    a.check(doc)
    state: dict[str, int] = {}  # 1 = on current walk, 2 = finished
    cycles = []
    for start in sorted(doc.by_id):
        if start in state:
            continue
        path = []
        node = start
        while node is not ROOT and node not in state:
            state[node] = 1
            path.append(node)
            node = a.parents[node]
        if node is not ROOT and state[node] == 1:
            cyc = path[path.index(node) :]
            k = cyc.index(min(cyc))
            cycles.append(cyc[k:] + cyc[:k])
        for p in path:
            state[p] = 2
    cycles.sort(key=lambda c: c[0])
    orphans = sum(1 for p in a.parents.values() if p is ROOT)
    return ForestReport(cycles, orphans)
