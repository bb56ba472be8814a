"""Document / entity data model, reading order and JSONL ingestion.

Coordinates stay in source units (pixels); normalization is the feature
builder's job. Parent decisions use the ``ROOT`` sentinel for "no parent" so
that a missing key in an :class:`Assignment` always means "not decided yet".
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Union

from .errors import ConsistencyError, ParseError, ValidationError


class Root(enum.Enum):
    ROOT = "ROOT"

    def __repr__(self) -> str:
        return "ROOT"


ROOT = Root.ROOT

ParentRef = Union[str, Root]

NO_PARENT_CATEGORIES = (
    "abstract",
    "appendix_list",
    "cross",
    "figure",
    "form_title",
    "list_of_figures",
    "list_of_tables",
    "other",
    "references",
    "report_title",
    "section",
    "summary",
    "table",
    "table_of_contents",
    "title",
)
CHAIN_CATEGORIES = ("section", "subsection", "subsubsection", "subsubsubsection", "paragraph")
DEPENDENT_CATEGORIES = ("table_caption", "figure_caption", "form", "list", "form_body")

KNOWN_CATEGORIES: tuple[str, ...] = tuple(
    sorted(set(NO_PARENT_CATEGORIES) | set(CHAIN_CATEGORIES) | set(DEPENDENT_CATEGORIES))
)
_KNOWN = frozenset(KNOWN_CATEGORIES)

PROVENANCES = ("rule1", "rule2", "rule3", "matcher")


def is_known_category(name: str) -> bool:
    return name in _KNOWN


@dataclass(frozen=True)
class BBox:
    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    def as_list(self) -> list[float]:
        return [self.x0, self.y0, self.x1, self.y1]


@dataclass(frozen=True)
class Entity:
    id: str
    category: str
    page: int
    bbox: BBox
    text: str | None = None
    # None: unlabeled; ROOT: labeled "no parent"; str: parent entity id
    gold_parent: ParentRef | None = None

    @property
    def known_category(self) -> bool:
        return is_known_category(self.category)


@dataclass(frozen=True)
class Document:
    doc_id: str
    entities: tuple[Entity, ...]

    def __post_init__(self) -> None:
        if not isinstance(self.entities, tuple):
            object.__setattr__(self, "entities", tuple(self.entities))

    @cached_property
    def by_id(self) -> dict[str, Entity]:
        return {e.id: e for e in self.entities}

    @cached_property
    def order(self) -> tuple[str, ...]:
        return tuple(reading_order(self))

    @cached_property
    def rank(self) -> dict[str, int]:
        """Position of every entity id in reading order."""
        return {eid: i for i, eid in enumerate(self.order)}

    def __len__(self) -> int:
        return len(self.entities)

    def __iter__(self) -> Iterator[Entity]:
        return iter(self.entities)


@dataclass
class Assignment:
    """Per-entity parent decisions with the rule (or matcher) that made them."""

    parents: dict[str, ParentRef] = field(default_factory=dict)
    provenance: dict[str, str] = field(default_factory=dict)

    def assign(self, entity_id: str, parent: ParentRef, provenance: str) -> None:
        if provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {provenance!r}")
        if parent == entity_id:
            raise ConsistencyError(f"entity {entity_id!r} assigned as its own parent")
        self.parents[entity_id] = parent
        self.provenance[entity_id] = provenance

    def update(self, other: "Assignment") -> None:
        overlap = self.parents.keys() & other.parents.keys()
        if overlap:
            raise ConsistencyError(f"overlapping assignments for {sorted(overlap)}")
        for eid, parent in other.parents.items():
            self.assign(eid, parent, other.provenance[eid])

    def __contains__(self, entity_id: object) -> bool:
        return entity_id in self.parents

    def __len__(self) -> int:
        return len(self.parents)

    def __getitem__(self, entity_id: str) -> ParentRef:
        return self.parents[entity_id]

    def check(self, doc: Document) -> None:
        """Raise ConsistencyError unless every key is a document entity and no self-parents."""
        ids = doc.by_id
        for eid, parent in self.parents.items():
            if eid not in ids:
                raise ConsistencyError(f"assignment key {eid!r} not in document {doc.doc_id!r}")
            if parent is not ROOT and parent not in ids:
                raise ConsistencyError(f"assigned parent {parent!r} of {eid!r} not in document")
            if parent == eid:
                raise ConsistencyError(f"entity {eid!r} is its own parent")


def reading_order(doc: Document) -> list[str]:
    """Entity ids sorted by (page, y0, x0, id)."""
    ents = sorted(doc.entities, key=lambda e: (e.page, e.bbox.y0, e.bbox.x0, e.id))
    return [e.id for e in ents]


def validate_document(doc: Document) -> list[str]:
    """Return invariant violations as ``"<entity id>: <rule>"`` strings; empty when valid."""
    violations: list[str] = []
    if not doc.entities:
        violations.append(f"{doc.doc_id}: document has no entities")
    seen: set[str] = set()
    for e in doc.entities:
        if e.id in seen:
            violations.append(f"{e.id}: duplicate entity id")
        seen.add(e.id)
    for e in doc.entities:
        b = e.bbox
        coords = (b.x0, b.y0, b.x1, b.y1)
        if not all(isinstance(c, (int, float)) and math.isfinite(c) for c in coords):
            violations.append(f"{e.id}: bbox coordinates must be finite")
        else:
            if b.x0 > b.x1:
                violations.append(f"{e.id}: bbox x0 > x1")
            if b.y0 > b.y1:
                violations.append(f"{e.id}: bbox y0 > y1")
        if isinstance(e.page, bool) or not isinstance(e.page, int) or e.page < 0:
            violations.append(f"{e.id}: page must be an integer >= 0")
        gp = e.gold_parent
        if gp is None or gp is ROOT:
            continue
        if gp == e.id:
            violations.append(f"{e.id}: gold parent is the entity itself")
        elif gp not in seen:
            violations.append(f"{e.id}: gold parent {gp!r} not in document")
    return violations


def _field(obj: Mapping, name: str, types: type | tuple[type, ...], where: str):
    if name not in obj:
        raise ParseError(f"{where}: missing field {name!r}")
    value = obj[name]
    if isinstance(value, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
        raise ParseError(f"{where}: field {name!r} has wrong type bool")
    if not isinstance(value, types):
        raise ParseError(f"{where}: field {name!r} has wrong type {type(value).__name__}")
    return value


def _parse_entity(raw: object, where: str) -> Entity:
    if not isinstance(raw, dict):
        raise ParseError(f"{where}: entity must be an object")
    eid = _field(raw, "id", str, where)
    where = f"{where} (entity {eid!r})"
    category = _field(raw, "category", str, where)
    page = _field(raw, "page", int, where)
    bbox = _field(raw, "bbox", list, where)
    if len(bbox) != 4 or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in bbox
    ):
        raise ParseError(f"{where}: field 'bbox' must be four numbers")
    text = raw.get("text")
    if text is not None and not isinstance(text, str):
        raise ParseError(f"{where}: field 'text' must be a string or null")
    gold: ParentRef | None
    if "parent_id" not in raw:
        gold = None
    elif raw["parent_id"] is None:
        gold = ROOT
    elif isinstance(raw["parent_id"], str):
        gold = raw["parent_id"]
    else:
        raise ParseError(f"{where}: field 'parent_id' must be a string or null")
    return Entity(
        id=eid,
        category=category,
        page=page,
        bbox=BBox(*(float(v) for v in bbox)),
        text=text,
        gold_parent=gold,
    )


def parse_document(record: str | Mapping) -> Document:
    """Parse one corpus JSONL line (or its decoded object) into a validated Document."""
    if isinstance(record, (str, bytes)):
        try:
            record = json.loads(record)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(record, dict):
        raise ParseError("record must be a JSON object")
    doc_id = _field(record, "doc_id", str, "record")
    raw_entities = _field(record, "entities", list, f"document {doc_id!r}")
    entities = tuple(
        _parse_entity(raw, f"document {doc_id!r} entities[{i}]")
        for i, raw in enumerate(raw_entities)
    )
    doc = Document(doc_id, entities)
    violations = validate_document(doc)
    if violations:
        raise ValidationError(f"document {doc_id!r}: " + "; ".join(violations))
    return doc


def serialize_document(doc: Document) -> dict:
    """Inverse of :func:`parse_document` on valid documents."""
    out = []
    for e in doc.entities:
        rec: dict = {
            "id": e.id,
            "category": e.category,
            "page": e.page,
            "bbox": e.bbox.as_list(),
            "text": e.text,
        }
        if e.gold_parent is ROOT:
            rec["parent_id"] = None
        elif e.gold_parent is not None:
            rec["parent_id"] = e.gold_parent
        out.append(rec)
    return {"doc_id": doc.doc_id, "entities": out}


def read_documents(path) -> list[Document]:
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                docs.append(parse_document(line))
            except (ParseError, ValidationError) as exc:
                raise type(exc)(f"{path}:{lineno}: {exc}") from exc
    return docs


def write_documents(path, docs: Iterable[Document]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in docs:
            fh.write(json.dumps(serialize_document(doc), ensure_ascii=False) + "\n")


def prediction_records(doc: Document, assignment: Assignment) -> list[dict]:
    """Prediction JSONL rows for one document, in the document's entity order."""
    rows = []
    for e in doc.entities:
        parent = assignment.parents[e.id]
        rows.append(
            {
                "doc_id": doc.doc_id,
                "entity_id": e.id,
                "parent_id": None if parent is ROOT else parent,
                "provenance": assignment.provenance[e.id],
            }
        )
    return rows


def write_predictions(path, items: Iterable[tuple[Document, Assignment]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc, assignment in items:
            for row in prediction_records(doc, assignment):
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def read_predictions(path) -> dict[str, Assignment]:
    """Load prediction JSONL into one Assignment per doc_id."""
    out: dict[str, Assignment] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                doc_id = _field(row, "doc_id", str, f"line {lineno}")
                eid = _field(row, "entity_id", str, f"line {lineno}")
                parent = row.get("parent_id")
                prov = row.get("provenance", "matcher")
            except (json.JSONDecodeError, AttributeError, TypeError) as exc:
                raise ParseError(f"{path}:{lineno}: malformed prediction row") from exc
            if parent is not None and not isinstance(parent, str):
                raise ParseError(f"{path}:{lineno}: parent_id must be a string or null")
            try:
                out.setdefault(doc_id, Assignment()).assign(
                    eid, ROOT if parent is None else parent, prov
                )
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    return out
