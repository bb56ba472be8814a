"""Parent prediction for visually rich documents: margin-trained matcher plus greedy rules."""

from .doc_model import ROOT, Assignment, BBox, Document, Entity, parse_document, reading_order
from .matcher import MatchModel, init_model, load_model, save_model, train
from .pipeline import check_forest, parse_hierarchy
from .rules import apply_all_rules

__all__ = [
    "ROOT",
    "Assignment",
    "BBox",
    "Document",
    "Entity",
    "MatchModel",
    "apply_all_rules",
    "check_forest",
    "init_model",
    "load_model",
    "parse_document",
    "parse_hierarchy",
    "reading_order",
    "save_model",
    "train",
]
