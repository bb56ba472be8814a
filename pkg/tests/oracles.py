"""Independent reference implementations used only by the tests.

Nothing here imports the package's rule tables or loss functions; category lists
are restated from the rule text so the oracle cannot inherit a typo.
"""

from __future__ import annotations

import math

import numpy as np

from docforest.doc_model import ROOT, BBox, Document, Entity

NO_PARENT = {
    "abstract", "appendix_list", "cross", "figure", "form_title", "list_of_figures",
    "list_of_tables", "other", "references", "report_title", "section", "summary",
    "table", "table_of_contents", "title",
}
LEVEL = {"section": 1, "subsection": 2, "subsubsection": 3, "subsubsubsection": 4, "paragraph": 5}
CAPTION_OF = {"table_caption": "table", "figure_caption": "figure"}
HEADS = {"section", "subsection", "subsubsection", "subsubsubsection"}
FLOW_DEPS = {
    "form": HEADS | {"summary", "abstract"},
    "list": HEADS | {"paragraph"},
    "form_body": HEADS | {"form_title", "summary", "abstract"},
}
ALL_CATEGORIES = sorted(NO_PARENT | set(LEVEL) | set(CAPTION_OF) | set(FLOW_DEPS))


def _key(e: Entity):
    return (e.page, e.bbox.y0, e.bbox.x0, e.id)


def brute_force_rules(doc: Document) -> tuple[dict, dict, set]:
    """(parents, provenance, residual) by scanning every (child, candidate) pair."""
    parents, prov = {}, {}
    residual = set()
    ents = list(doc.entities)
    for c in ents:
        cat = c.category
        if cat in NO_PARENT:
            parents[c.id], prov[c.id] = ROOT, "rule1"
            continue
        if cat in LEVEL:
            best = None
            for p in ents:
                if p.id != c.id and LEVEL.get(p.category, 99) < LEVEL[cat] and _key(p) < _key(c):
                    if best is None or _key(p) > _key(best):
                        best = p
            parents[c.id], prov[c.id] = (best.id if best else ROOT), "rule2"
            continue
        if cat in CAPTION_OF:
            want = CAPTION_OF[cat]
            best, best_score = None, None
            for p in ents:
                if p.category != want or p.page != c.page:
                    continue
                cx, cy = (c.bbox.x0 + c.bbox.x1) / 2, (c.bbox.y0 + c.bbox.y1) / 2
                px, py = (p.bbox.x0 + p.bbox.x1) / 2, (p.bbox.y0 + p.bbox.y1) / 2
                score = (math.sqrt((cx - px) ** 2 + (cy - py) ** 2), _key(p))
                if best_score is None or score < best_score:
                    best, best_score = p, score
            if best is None:
                best = _flow_pick(ents, c, {want})
            parents[c.id], prov[c.id] = (best.id if best else ROOT), "rule3"
            continue
        if cat in FLOW_DEPS:
            best = _flow_pick(ents, c, FLOW_DEPS[cat])
            if best is None:
                residual.add(c.id)
            else:
                parents[c.id], prov[c.id] = best.id, "rule3"
            continue
        residual.add(c.id)
    return parents, prov, residual


def _flow_pick(ents, c, allowed):
    before = [p for p in ents if p.category in allowed and p.id != c.id and _key(p) < _key(c)]
    if before:
        return max(before, key=_key)
    after = [p for p in ents if p.category in allowed and p.id != c.id and _key(p) > _key(c)]
    if after:
        return min(after, key=_key)
    return None


def random_document(rng: np.random.Generator, max_entities: int = 10, doc_id: str = "r") -> Document:
    """Unstructured document: arbitrary categories on a coarse grid (lots of ties)."""
    n = int(rng.integers(1, max_entities + 1))
    cats = ALL_CATEGORIES + ["note", "sidebar"]
    ids = rng.permutation(100)[:n]
    ents = []
    for k in range(n):
        x0, y0 = rng.integers(0, 5, size=2) * 100.0
        w, h = rng.integers(0, 4, size=2) * 50.0
        ents.append(
            Entity(
                id=f"n{ids[k]:02d}",
                category=cats[int(rng.integers(len(cats)))],
                page=int(rng.integers(0, 3)),
                bbox=BBox(x0, y0, x0 + w, y0 + h),
                text=None,
            )
        )
    return Document(doc_id, tuple(ents))


def central_difference(f, X: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Entrywise central finite-difference gradient of scalar f at X."""
    G = np.zeros_like(X)
    for idx in np.ndindex(X.shape):
        orig = X[idx]
        X[idx] = orig + h
        fp = f(X)
        X[idx] = orig - h
        fm = f(X)
        X[idx] = orig
        G[idx] = (fp - fm) / (2 * h)
    return G


def richardson_difference(f, X: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central differences at h and h/2 combined to cancel the h^2 term."""
    coarse = central_difference(f, X, h)
    fine = central_difference(f, X, h / 2)
    return (4 * fine - coarse) / 3


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / max(||a||, ||n||); absolute error when both are ~0."""
    diff = float(np.linalg.norm(analytic - numeric))
    scale = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(numeric)))
    return diff if scale < 1e-12 else diff / scale


def unit_rows(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    M = rng.normal(size=(n, d))
    return M / np.linalg.norm(M, axis=1, keepdims=True)


def random_batch(rng, nc=None, np_=None, e=None, fd_safe=False):
    """Random MatchBatch with N_c <= 5, N_p <= 7, 2 <= E <= 8.

    ``fd_safe`` resamples until every true-pair |cosine| <= 0.995. Central
    differences on cos(arccos c + m) carry a truncation error of roughly
    h^2 / (1 - c^2)^2, which reaches 1e-5 by |c| = 0.999; near the
    singularity use ``richardson_difference`` instead.
    """
    from docforest.losses import MatchBatch

    nc = nc or int(rng.integers(1, 6))
    np_ = np_ or int(rng.integers(1, 8))
    e = e or int(rng.integers(2, 9))
    while True:
        b = MatchBatch(unit_rows(rng, nc, e), unit_rows(rng, np_, e), rng.integers(0, np_, size=nc))
        true_cos = b.cosines[np.arange(nc), b.labels]
        if not fd_safe or np.all(np.abs(true_cos) <= 0.995):
            return b


def scalar_clip_loss(child, parents, true_index, s) -> float:
    """Single-child softmax loss, evaluated with plain math (no numpy reductions)."""
    dots = [sum(a * b for a, b in zip(child, p)) for p in parents]
    num = math.exp(s * dots[true_index])
    den = sum(math.exp(s * d) for d in dots)
    return -math.log(num / den)


def scalar_margin_loss(child, parents, true_index, s, m) -> float:
    dots = [sum(a * b for a, b in zip(child, p)) for p in parents]
    target = math.exp(s * math.cos(math.acos(dots[true_index]) + m))
    others = sum(math.exp(s * d) for j, d in enumerate(dots) if j != true_index)
    return -math.log(target / (target + others))
