"""Deterministic entity features: layout geometry, category one-hot, hashed text.

Layout of a feature vector (dimension ``D = 10 + 25 + text_hash_dim``)::

    [0]      page / max(1, last page)
    [1:5]    x0, y0, x1, y1 divided by the page extent (max x1 / max y1 on that page)
    [5:7]    width, height (normalized)
    [7:9]    center x, center y (normalized)
    [9]      text length / longest text in the document
    [10:35]  one-hot over the 24 known categories plus an "unknown" bucket
    [35:]    character n-gram counts hashed into text_hash_dim buckets, L2-normalized

Disabled blocks are zero-filled so that ``D`` never depends on the flags.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import asdict, dataclass

import numpy as np

from .doc_model import KNOWN_CATEGORIES, Document, Entity
from .errors import ConfigurationError, ParseError

GEOMETRY_DIM = 10
CATEGORY_DIM = len(KNOWN_CATEGORIES) + 1
_CATEGORY_INDEX = {c: i for i, c in enumerate(KNOWN_CATEGORIES)}


@dataclass(frozen=True)
class FeatureConfig:
    text_hash_dim: int = 64
    ngram_sizes: tuple[int, ...] = (2, 3)
    include_geometry: bool = True
    category_onehot: bool = True

    def __post_init__(self) -> None:
        if self.text_hash_dim < 1:
            raise ConfigurationError("text_hash_dim must be >= 1")
        sizes = tuple(sorted(set(int(n) for n in self.ngram_sizes)))
        if not sizes or sizes[0] < 1:
            raise ConfigurationError("ngram_sizes must be a nonempty set of positive integers")
        object.__setattr__(self, "ngram_sizes", sizes)

    @property
    def dim(self) -> int:
        return GEOMETRY_DIM + CATEGORY_DIM + self.text_hash_dim

    def to_json(self) -> dict:
        d = asdict(self)
        d["ngram_sizes"] = list(self.ngram_sizes)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "FeatureConfig":
        return cls(
            text_hash_dim=int(d["text_hash_dim"]),
            ngram_sizes=tuple(d["ngram_sizes"]),
            include_geometry=bool(d["include_geometry"]),
            category_onehot=bool(d["category_onehot"]),
        )


# (doc_id, entity_id) -> vector of length text_hash_dim
ExternalEmbeddings = dict[tuple[str, str], np.ndarray]


def hash_ngrams(text: str | None, dim: int, ngram_sizes=(2, 3)) -> np.ndarray:
    """L2-normalized bag of hashed character n-grams (crc32 buckets)."""
    out = np.zeros(dim)
    if not text:
        return out
    for n in ngram_sizes:
        for i in range(len(text) - n + 1):
            out[zlib.crc32(text[i : i + n].encode("utf-8")) % dim] += 1.0
    norm = np.linalg.norm(out)
    if norm > 0:
        out /= norm
    return out


def _page_extents(doc: Document) -> dict[int, tuple[float, float]]:
    ext: dict[int, tuple[float, float]] = {}
    for e in doc.entities:
        w, h = ext.get(e.page, (0.0, 0.0))
        ext[e.page] = (max(w, e.bbox.x1), max(h, e.bbox.y1))
    return ext


def _safe_div(a: float, b: float) -> float:
    return a / b if b > 0 else 0.0


def build_feature_matrix(
    doc: Document,
    cfg: FeatureConfig,
    external: ExternalEmbeddings | None = None,
) -> np.ndarray:
    """Feature rows for every entity of ``doc``, in ``doc.entities`` order."""
    n = len(doc.entities)
    X = np.zeros((n, cfg.dim))
    extents = _page_extents(doc)
    last_page = max(e.page for e in doc.entities)
    longest = max(len(e.text or "") for e in doc.entities)
    hash_start = GEOMETRY_DIM + CATEGORY_DIM
    for i, e in enumerate(doc.entities):
        if cfg.include_geometry:
            pw, ph = extents[e.page]
            b = e.bbox
            x0, x1 = _safe_div(b.x0, pw), _safe_div(b.x1, pw)
            y0, y1 = _safe_div(b.y0, ph), _safe_div(b.y1, ph)
            X[i, :GEOMETRY_DIM] = (
                e.page / max(1, last_page),
                x0,
                y0,
                x1,
                y1,
                x1 - x0,
                y1 - y0,
                (x0 + x1) / 2.0,
                (y0 + y1) / 2.0,
                _safe_div(len(e.text or ""), longest),
            )
        if cfg.category_onehot:
            X[i, GEOMETRY_DIM + _CATEGORY_INDEX.get(e.category, CATEGORY_DIM - 1)] = 1.0
        key = (doc.doc_id, e.id)
        if external is not None and key in external:
            vec = np.asarray(external[key], dtype=float)
            if vec.shape != (cfg.text_hash_dim,):
                raise ConfigurationError(
                    f"external embedding for {key} has shape {vec.shape}, "
                    f"expected ({cfg.text_hash_dim},)"
                )
            X[i, hash_start:] = vec
        else:
            X[i, hash_start:] = hash_ngrams(e.text, cfg.text_hash_dim, cfg.ngram_sizes)
    return X


def build_feature_vector(
    entity: Entity,
    doc: Document,
    cfg: FeatureConfig,
    external: ExternalEmbeddings | None = None,
) -> np.ndarray:
    idx = next(i for i, e in enumerate(doc.entities) if e.id == entity.id)
    return build_feature_matrix(doc, cfg, external)[idx]


def load_external_embeddings(path, dim: int | None = None) -> ExternalEmbeddings:
    """Read ``{"doc_id", "entity_id", "embedding"}`` JSONL rows."""
    out: ExternalEmbeddings = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                key = (str(row["doc_id"]), str(row["entity_id"]))
                vec = np.asarray(row["embedding"], dtype=float)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: malformed embedding row ({exc})") from exc
            if vec.ndim != 1 or not np.all(np.isfinite(vec)):
                raise ParseError(f"{path}:{lineno}: embedding must be a flat finite list")
            if dim is not None and vec.shape[0] != dim:
                raise ConfigurationError(
                    f"{path}:{lineno}: embedding dimension {vec.shape[0]} != {dim}"
                )
            out[key] = vec
    return out
