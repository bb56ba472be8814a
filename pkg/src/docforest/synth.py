"""Labeled synthetic report-like documents.

Each document is a single-column flow of blocks laid out top to bottom over
a few pages. Rule-covered entities get gold parents that follow the layout
semantics (heading chain, captions under their table/figure, lists and forms
under the governing heading). A ``matcher_fraction`` of entities are
``note`` blocks, a category outside the known vocabulary, stacked directly
under a section-family heading; that heading is their gold parent. Only
geometry and category separate it from the other candidates, so notes are
what the learned matcher has to solve.

Layout guarantees that keep the rules exact:

* every table/figure is followed by its caption and then by a paragraph,
  so the caption's own table/figure is always the nearest one on the page;
* block groups (heading + notes, table + caption, ...) never straddle pages;
* jitter stays well below the inter-block gap.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .corpus import CorpusSplit
from .doc_model import ROOT, BBox, Document, Entity, reading_order
from .errors import ConfigurationError

NOTE_CATEGORY = "note"
SECTION_FAMILY = ("section", "subsection", "subsubsection", "subsubsubsection")

PAGE_W, PAGE_H = 1000.0, 1400.0
MARGIN_X, MARGIN_TOP, MARGIN_BOTTOM = 60.0, 60.0, 60.0
COLUMN_W = PAGE_W - 2 * MARGIN_X
USABLE_H = PAGE_H - MARGIN_TOP - MARGIN_BOTTOM
GAP = (14.0, 24.0)
MIN_SCALE = 0.5

# nominal block heights in px (lo, hi)
HEIGHTS = {
    "report_title": (70, 90),
    "title": (40, 60),
    "section": (34, 40),
    "subsection": (30, 36),
    "subsubsection": (28, 32),
    "subsubsubsection": (26, 30),
    "paragraph": (70, 160),
    "list": (50, 120),
    NOTE_CATEGORY: (26, 44),
    "table": (150, 250),
    "figure": (150, 250),
    "table_caption": (20, 28),
    "figure_caption": (20, 28),
    "form_title": (28, 34),
    "form_body": (60, 140),
    "form": (80, 160),
    "abstract": (100, 200),
    "summary": (100, 200),
    "table_of_contents": (200, 400),
    "list_of_figures": (100, 200),
    "list_of_tables": (100, 200),
    "references": (150, 300),
    "appendix_list": (80, 150),
    "other": (20, 40),
    "cross": (20, 40),
}

# relative frequency of body items after the first section heading
BODY_WEIGHTS = {
    "paragraph": 0.38,
    "heading": 0.16,
    "new_section": 0.05,
    "list": 0.09,
    "table": 0.07,
    "figure": 0.07,
    "form": 0.04,
    "form_group": 0.04,
    "form_body": 0.02,
    "other": 0.05,
    "cross": 0.03,
}

FRONT_MATTER = (
    ("report_title", 0.7),
    ("title", 0.3),
    ("table_of_contents", 0.3),
    ("list_of_figures", 0.15),
    ("list_of_tables", 0.15),
)
BACK_MATTER = (("references", 0.3), ("appendix_list", 0.2))

_WORDS = (
    "ore grade drilling assay tonnage deposit exploration tenement sample core "
    "geology mineral resource estimate survey magnetic anomaly hole depth metres "
    "gold copper nickel iron quartz vein shear zone lithology program results "
    "interval intercept reserve mine pit tailings water rehabilitation licence "
    "report quarter annual compliance expenditure target prospect trench soil"
).split()

_HEADING_WORDS = (
    "Introduction", "Geology", "Exploration", "Drilling", "Results", "Resources",
    "Tenure", "Environment", "Mineralisation", "Sampling", "Conclusions", "Methods",
)


@dataclass(frozen=True)
class GenConfig:
    num_docs: int = 250
    entities_per_doc: tuple[int, int] = (20, 60)
    pages_per_doc: tuple[int, int] = (2, 5)
    seed: int = 42
    matcher_fraction: float = 0.3
    layout_noise: float = 0.002

    def __post_init__(self) -> None:
        object.__setattr__(self, "entities_per_doc", tuple(int(v) for v in self.entities_per_doc))
        object.__setattr__(self, "pages_per_doc", tuple(int(v) for v in self.pages_per_doc))
        if self.num_docs < 1:
            raise ConfigurationError("num_docs must be >= 1")
        for name in ("entities_per_doc", "pages_per_doc"):
            lo, hi = getattr(self, name)
            if not 1 <= lo <= hi:
                raise ConfigurationError(f"{name} must be a nonempty range of positive integers")
        if not 0.0 <= self.matcher_fraction <= 1.0:
            raise ConfigurationError("matcher_fraction must lie in [0, 1]")
        if not (self.layout_noise >= 0 and math.isfinite(self.layout_noise)):
            raise ConfigurationError("layout_noise must be >= 0")

    def to_json(self) -> dict:
        d = asdict(self)
        d["entities_per_doc"] = list(self.entities_per_doc)
        d["pages_per_doc"] = list(self.pages_per_doc)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "GenConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown generator config keys {sorted(unknown)}")
        return cls(**d)


@dataclass
class _Block:
    category: str
    height: float
    text: str
    intended_parent: int | None = None  # block index, for captions and notes


def _sentence(rng: np.random.Generator, lo: int, hi: int) -> str:
    n = int(rng.integers(lo, hi + 1))
    return " ".join(_WORDS[i] for i in rng.integers(0, len(_WORDS), size=n)).capitalize() + "."


class _Planner:
    """Builds the block sequence (reading-order intent) for one document."""

    def __init__(self, rng: np.random.Generator, budget: int):
        self.rng = rng
        self.budget = budget
        self.blocks: list[_Block] = []
        self.groups: list[list[int]] = []
        self.numbering = [0, 0, 0, 0]
        self.depth = 0
        self.heading_groups: list[int] = []

    @property
    def remaining(self) -> int:
        return self.budget - len(self.blocks)

    def _height(self, cat: str) -> float:
        lo, hi = HEIGHTS[cat]
        return float(self.rng.uniform(lo, hi))

    def add(self, cat: str, text: str, parent: int | None = None, new_group: bool = True) -> int:
        self.blocks.append(_Block(cat, self._height(cat), text, parent))
        idx = len(self.blocks) - 1
        if new_group:
            self.groups.append([idx])
        else:
            self.groups[-1].append(idx)
        return idx

    def heading(self, level: int) -> None:
        self.numbering[level - 1] += 1
        for k in range(level, 4):
            self.numbering[k] = 0
        self.depth = level
        number = ".".join(str(v) for v in self.numbering[:level])
        word = _HEADING_WORDS[int(self.rng.integers(len(_HEADING_WORDS)))]
        self.add(SECTION_FAMILY[level - 1], f"{number} {word}")
        self.heading_groups.append(len(self.groups) - 1)

    def text_block(self, cat: str) -> None:
        lo, hi = {"paragraph": (12, 30), "list": (6, 14)}.get(cat, (3, 8))
        self.add(cat, _sentence(self.rng, lo, hi))

    def captioned(self, cat: str) -> None:
        idx = self.add(cat, "" if self.rng.random() < 0.5 else _sentence(self.rng, 2, 5))
        label = "Table" if cat == "table" else "Figure"
        self.add(
            f"{cat}_caption",
            f"{label} {int(self.rng.integers(1, 40))}: {_sentence(self.rng, 3, 7)}",
            parent=idx,
            new_group=False,
        )
        self.text_block("paragraph")

    def plan(self) -> None:
        rng = self.rng
        for cat, p in FRONT_MATTER:
            if self.remaining > 4 and rng.random() < p:
                self.add(cat, _sentence(rng, 2, 6))
        if self.remaining > 6 and rng.random() < 0.4:
            self.add("abstract" if rng.random() < 0.5 else "summary", _sentence(rng, 20, 40))
            if rng.random() < 0.4:
                self.add("form", _sentence(rng, 4, 10))
        self.heading(1)

        names = list(BODY_WEIGHTS)
        weights = np.array([BODY_WEIGHTS[k] for k in names])
        weights /= weights.sum()
        back = [cat for cat, p in BACK_MATTER if rng.random() < p]
        while self.remaining > len(back):
            room = self.remaining - len(back)
            choice = names[int(rng.choice(len(names), p=weights))]
            if choice in ("table", "figure") and room >= 3:
                self.captioned(choice)
            elif choice == "heading" and self.depth < 4:
                self.heading(int(rng.integers(2, self.depth + 2)))
            elif choice == "new_section":
                self.heading(1)
            elif choice == "form_group" and room >= 2:
                self.add("form_title", _sentence(rng, 2, 4))
                self.add("form_body", _sentence(rng, 8, 20), new_group=False)
            elif choice in ("list", "form", "form_body", "other", "cross"):
                self.text_block(choice)
            else:
                self.text_block("paragraph")
        for cat in back:
            self.add(cat, _sentence(rng, 10, 20))

    def add_notes(self, count: int) -> None:
        """Stack ``count`` notes under randomly chosen section-family headings."""
        picks = self.rng.integers(0, len(self.heading_groups), size=count)
        for g in sorted(picks.tolist()):
            group = self.groups[self.heading_groups[g]]
            head = group[0]
            self.blocks.append(
                _Block(NOTE_CATEGORY, self._height(NOTE_CATEGORY), "Note: " + _sentence(self.rng, 3, 9), head)
            )
            group.append(len(self.blocks) - 1)


def _paginate(rng, blocks: list[_Block], groups: list[list[int]], pages_range) -> list[list[list[int]]]:
    gaps_total = sum(len(g) for g in groups) * GAP[1]
    total = sum(b.height for b in blocks) + gaps_total
    needed = math.ceil(total / (USABLE_H / 0.8))
    n_pages = int(rng.integers(pages_range[0], pages_range[1] + 1))
    n_pages = min(max(n_pages, needed), len(groups))
    target = total / n_pages
    pages: list[list[list[int]]] = [[]]
    filled = 0.0
    for i, g in enumerate(groups):
        h = sum(blocks[k].height + GAP[1] for k in g)
        groups_left = len(groups) - i
        pages_left = n_pages - len(pages)
        if pages[-1] and pages_left > 0 and (filled + h > target or groups_left <= pages_left):
            pages.append([])
            filled = 0.0
        pages[-1].append(g)
        filled += h
    return pages


def _layout(rng, blocks: list[_Block], pages, noise: float) -> list[tuple[int, BBox]]:
    placed: list[tuple[int, BBox] | None] = [None] * len(blocks)
    for page_no, page_groups in enumerate(pages):
        order = [k for g in page_groups for k in g]
        gaps = rng.uniform(*GAP, size=len(order))
        total = sum(blocks[k].height for k in order) + gaps.sum()
        scale = min(1.0, USABLE_H / total)
        scale = max(scale, MIN_SCALE)
        y = MARGIN_TOP
        for k, gap in zip(order, gaps):
            b = blocks[k]
            h = b.height * scale
            if b.category in SECTION_FAMILY or b.category in ("form_title", "title"):
                width = min(COLUMN_W, 40.0 + 11.0 * len(b.text))
                x0 = MARGIN_X
            elif b.category == NOTE_CATEGORY:
                width = COLUMN_W * 0.7
                x0 = MARGIN_X + 60.0
            elif b.category in ("table_caption", "figure_caption", "figure", "report_title"):
                width = COLUMN_W * 0.8
                x0 = MARGIN_X + COLUMN_W * 0.1
            else:
                width = COLUMN_W
                x0 = MARGIN_X
            jitter = rng.uniform(-noise, noise, size=4) * np.array([PAGE_W, PAGE_H, PAGE_W, PAGE_H])
            x0j, y0j = x0 + jitter[0], y + jitter[1]
            x1j, y1j = x0 + width + jitter[2], y + h + jitter[3]
            box = BBox(
                round(max(0.0, min(x0j, x1j)), 1),
                round(max(0.0, min(y0j, y1j)), 1),
                round(max(x0j, x1j), 1),
                round(max(y0j, y1j), 1),
            )
            placed[k] = (page_no, box)
            y += h + gap * scale
    return placed  # type: ignore[return-value]


def _gold_labels(entities: list[Entity], blocks: list[_Block]) -> list:
    """Gold parent per entity from the final geometry and the planner's intent."""
    doc = Document("tmp", tuple(entities))
    index = {e.id: i for i, e in enumerate(entities)}
    gold: list = [None] * len(entities)
    level = {cat: i + 1 for i, cat in enumerate(SECTION_FAMILY + ("paragraph",))}
    no_parent = {
        "abstract", "appendix_list", "cross", "figure", "form_title", "list_of_figures",
        "list_of_tables", "other", "references", "report_title", "section", "summary",
        "table", "table_of_contents", "title",
    }
    flow_parents = {
        "form": {"summary", "abstract", *SECTION_FAMILY},
        "list": {"paragraph", *SECTION_FAMILY},
        "form_body": {"form_title", "summary", "abstract", *SECTION_FAMILY},
    }
    stack: list[tuple[int, str]] = []  # open chain entities (level, id)
    last_seen: dict[str, str] = {}
    for eid in reading_order(doc):
        i = index[eid]
        cat = entities[i].category
        if cat in level:
            lv = level[cat]
            while stack and stack[-1][0] >= lv:
                stack.pop()
            if cat != "section":
                gold[i] = stack[-1][1] if stack else ROOT
            stack.append((lv, eid))
        if cat in no_parent:
            gold[i] = ROOT
        elif cat in flow_parents:
            candidates = [last_seen[c] for c in flow_parents[cat] if c in last_seen]
            if not candidates:
                raise AssertionError(f"generator placed {cat} before any allowed parent")
            gold[i] = max(candidates, key=lambda c: doc.rank[c])
        elif blocks[i].intended_parent is not None:
            gold[i] = entities[blocks[i].intended_parent].id
        last_seen[cat] = eid
    return gold


def generate_document(doc_id: str, rng: np.random.Generator, cfg: GenConfig) -> Document:
    n = int(rng.integers(cfg.entities_per_doc[0], cfg.entities_per_doc[1] + 1))
    n_notes = min(int(round(cfg.matcher_fraction * n)), n - 1)
    planner = _Planner(rng, n - n_notes)
    planner.plan()
    if n_notes:
        planner.add_notes(n_notes)
    blocks = planner.blocks
    pages = _paginate(rng, blocks, planner.groups, cfg.pages_per_doc)
    placed = _layout(rng, blocks, pages, cfg.layout_noise)
    entities = [
        Entity(f"e{k:03d}", b.category, page, box, b.text or None)
        for k, (b, (page, box)) in enumerate(zip(blocks, placed))
    ]
    gold = _gold_labels(entities, blocks)
    labeled = tuple(
        Entity(e.id, e.category, e.page, e.bbox, e.text, g) for e, g in zip(entities, gold)
    )
    return Document(doc_id, labeled)


def generate_corpus(cfg: GenConfig) -> CorpusSplit:
    """Deterministic corpus for ``cfg.seed``, split 70/15/15 by document."""
    root = np.random.SeedSequence(cfg.seed)
    children = root.spawn(cfg.num_docs + 1)
    docs = [
        generate_document(f"synth-{cfg.seed}-{k:05d}", np.random.default_rng(children[k]), cfg)
        for k in range(cfg.num_docs)
    ]
    perm = np.random.default_rng(children[-1]).permutation(cfg.num_docs)
    n_train = int(round(0.70 * cfg.num_docs))
    n_val = int(round(0.15 * cfg.num_docs))
    pick = lambda idx: [docs[i] for i in sorted(idx.tolist())]  # noqa: E731
    return CorpusSplit(
        train=pick(perm[:n_train]),
        val=pick(perm[n_train : n_train + n_val]),
        test=pick(perm[n_train + n_val :]),
        seed=cfg.seed,
        config=cfg.to_json(),
    )
