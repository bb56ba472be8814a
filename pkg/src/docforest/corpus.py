"""Train/val/test document splits and their on-disk layout.

A corpus directory holds ``corpus.jsonl`` (all documents, standard schema)
and ``manifest.json`` with ``{"seed", "config", "split": {name: [doc_id, ...]}}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .doc_model import Document, read_documents, write_documents
from .errors import ValidationError

SPLITS = ("train", "val", "test")
CORPUS_FILE = "corpus.jsonl"
MANIFEST_FILE = "manifest.json"


@dataclass
class CorpusSplit:
    train: list[Document] = field(default_factory=list)
    val: list[Document] = field(default_factory=list)
    test: list[Document] = field(default_factory=list)
    seed: int | None = None
    config: dict = field(default_factory=dict)

    def split(self, name: str) -> list[Document]:
        if name not in SPLITS:
            raise KeyError(name)
        return getattr(self, name)

    @property
    def documents(self) -> list[Document]:
        return [*self.train, *self.val, *self.test]

    def manifest(self) -> dict:
        return {
            "seed": self.seed,
            "config": self.config,
            "split": {name: [d.doc_id for d in self.split(name)] for name in SPLITS},
        }


def write_corpus(directory, corpus: CorpusSplit) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    write_documents(out / CORPUS_FILE, corpus.documents)
    with open(out / MANIFEST_FILE, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(corpus.manifest(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out


def read_corpus(directory) -> CorpusSplit:
    """Load a corpus directory; without a manifest every document goes to ``train``."""
    root = Path(directory)
    docs = read_documents(root / CORPUS_FILE)
    manifest_path = root / MANIFEST_FILE
    if not manifest_path.exists():
        return CorpusSplit(train=docs)
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    by_id = {d.doc_id: d for d in docs}
    if len(by_id) != len(docs):
        raise ValidationError(f"{root / CORPUS_FILE}: duplicate doc_id")
    splits: dict[str, list[Document]] = {}
    for name in SPLITS:
        ids = manifest.get("split", {}).get(name, [])
        missing = [i for i in ids if i not in by_id]
        if missing:
            raise ValidationError(f"manifest split {name!r} names unknown documents {missing[:5]}")
        splits[name] = [by_id[i] for i in ids]
    return CorpusSplit(seed=manifest.get("seed"), config=manifest.get("config", {}), **splits)
