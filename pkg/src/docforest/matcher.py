"""Two-tower parent matcher: role encoders, training loop and candidate scoring.

Each entity is encoded twice, once by the child encoder (when it looks for a
parent) and once by the parent encoder (when it is a candidate). Both
encoders are ``x -> W2 tanh(W1 x + b1) + b2`` followed by unit normalization,
so a child/candidate score is the cosine of their role embeddings.
"""

from __future__ import annotations

import copy
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import CorpusSplit
from .doc_model import Document, Entity, ROOT
from .errors import ConfigurationError, ParseError
from .features import ExternalEmbeddings, FeatureConfig, build_feature_matrix
from .losses import MatchBatch, check_hyperparameters, margin_loss_and_grad
from .rules import DEFAULT_RULES, RuleConfig, allowed_parents, apply_all_rules

logger = logging.getLogger(__name__)

MODEL_VERSION = 1
NORM_GUARD = 1e-12
_PARAM_NAMES = ("W1", "b1", "W2", "b2")


@dataclass
class EncoderParams:
    W1: np.ndarray  # (H, D)
    b1: np.ndarray  # (H,)
    W2: np.ndarray  # (E, H)
    b2: np.ndarray  # (E,)

    @property
    def dims(self) -> tuple[int, int, int]:
        H, D = self.W1.shape
        return D, H, self.W2.shape[0]

    def arrays(self) -> list[np.ndarray]:
        return [self.W1, self.b1, self.W2, self.b2]

    def to_json(self) -> dict:
        return {name: getattr(self, name).tolist() for name in _PARAM_NAMES}

    @classmethod
    def from_json(cls, d: dict) -> "EncoderParams":
        return cls(*(np.asarray(d[name], dtype=float) for name in _PARAM_NAMES))

    @classmethod
    def zeros(cls, D: int, H: int, E: int) -> "EncoderParams":
        return cls(np.zeros((H, D)), np.zeros(H), np.zeros((E, H)), np.zeros(E))


def _encode_full(params: EncoderParams, X: np.ndarray):
    hidden = np.tanh(X @ params.W1.T + params.b1)
    V = hidden @ params.W2.T + params.b2
    norms = np.linalg.norm(V, axis=1)
    degenerate = norms < NORM_GUARD
    U = V / np.where(degenerate, 1.0, norms)[:, None]
    if np.any(degenerate):
        U[degenerate] = 0.0
        U[degenerate, 0] = 1.0
    return U, (X, hidden, norms, degenerate)


def encode(params: EncoderParams, x: np.ndarray) -> np.ndarray:
    """Unit embedding(s) for a feature vector or a matrix of feature rows.

    A pre-normalization output shorter than 1e-12 maps to the basis vector e_1.
    """
    x = np.asarray(x, dtype=float)
    U, _ = _encode_full(params, np.atleast_2d(x))
    return U[0] if x.ndim == 1 else U


def encode_backward(params: EncoderParams, U: np.ndarray, cache, dU: np.ndarray) -> EncoderParams:
    """Parameter gradients given dLoss/dU for the rows encoded with ``cache``."""
    X, hidden, norms, degenerate = cache
    radial = np.sum(dU * U, axis=1, keepdims=True)
    dV = (dU - U * radial) / np.where(degenerate, 1.0, norms)[:, None]
    dV[degenerate] = 0.0
    d_hidden = dV @ params.W2
    dA = d_hidden * (1.0 - hidden**2)
    return EncoderParams(dA.T @ X, dA.sum(axis=0), dV.T @ hidden, dV.sum(axis=0))


@dataclass
class MatchModel:
    child_encoder: EncoderParams
    parent_encoder: EncoderParams
    s: float = 16.0
    m: float = 0.2
    feature_config: FeatureConfig = field(default_factory=FeatureConfig)
    version: int = MODEL_VERSION

    def __post_init__(self) -> None:
        check_hyperparameters(self.s, self.m)
        D = self.feature_config.dim
        if self.child_encoder.dims != self.parent_encoder.dims:
            raise ConfigurationError("child and parent encoders must share dimensions")
        if self.child_encoder.dims[0] != D:
            raise ConfigurationError(
                f"encoder input dimension {self.child_encoder.dims[0]} does not match "
                f"feature dimension {D}"
            )

    @property
    def dims(self) -> dict[str, int]:
        D, H, E = self.child_encoder.dims
        return {"D": D, "H": H, "E": E}

    def to_json(self) -> dict:
        return {
            "version": self.version,
            "dims": self.dims,
            "s": self.s,
            "m": self.m,
            "feature_config": self.feature_config.to_json(),
            "child_encoder": self.child_encoder.to_json(),
            "parent_encoder": self.parent_encoder.to_json(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "MatchModel":
        try:
            if d["version"] != MODEL_VERSION:
                raise ConfigurationError(f"unsupported model version {d['version']!r}")
            model = cls(
                child_encoder=EncoderParams.from_json(d["child_encoder"]),
                parent_encoder=EncoderParams.from_json(d["parent_encoder"]),
                s=float(d["s"]),
                m=float(d["m"]),
                feature_config=FeatureConfig.from_json(d["feature_config"]),
                version=int(d["version"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed model file: {exc!r}") from exc
        if model.dims != d.get("dims", model.dims):
            raise ConfigurationError(f"declared dims {d['dims']} disagree with weights {model.dims}")
        return model


def save_model(model: MatchModel, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(model.to_json(), fh)
        fh.write("\n")


def load_model(path) -> MatchModel:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    return MatchModel.from_json(data)


def _init_encoder(rng: np.random.Generator, D: int, H: int, E: int) -> EncoderParams:
    a1, a2 = 1.0 / math.sqrt(D), 1.0 / math.sqrt(H)
    return EncoderParams(
        rng.uniform(-a1, a1, size=(H, D)),
        np.zeros(H),
        rng.uniform(-a2, a2, size=(E, H)),
        np.zeros(E),
    )


def init_model(
    feature_config: FeatureConfig | None = None,
    hidden_dim: int = 128,
    emb_dim: int = 64,
    s: float = 16.0,
    m: float = 0.2,
    seed: int = 42,
) -> MatchModel:
    """Fresh model with fan-in scaled uniform weights and zero biases."""
    cfg = feature_config or FeatureConfig()
    if hidden_dim < 1 or emb_dim < 1:
        raise ConfigurationError("hidden and embedding dimensions must be positive")
    rng = np.random.default_rng(seed)
    child = _init_encoder(rng, cfg.dim, hidden_dim, emb_dim)
    parent = _init_encoder(rng, cfg.dim, hidden_dim, emb_dim)
    return MatchModel(child, parent, s=s, m=m, feature_config=cfg)


def candidate_mask(doc: Document, rules: RuleConfig = DEFAULT_RULES) -> np.ndarray:
    """``mask[i, j]``: entity j may be proposed as parent of entity i.

    Everything but the entity itself, narrowed to the allowed parent
    categories for rule-3 dependent categories.
    """
    n = len(doc.entities)
    mask = ~np.eye(n, dtype=bool)
    cats = [e.category for e in doc.entities]
    for i, cat in enumerate(cats):
        allowed = allowed_parents(cat, rules)
        if allowed is not None:
            mask[i] &= np.array([c in allowed for c in cats])
    return mask


def embed_document(
    model: MatchModel, doc: Document, external: ExternalEmbeddings | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """(child-role, parent-role) unit embeddings for every entity, in entity order."""
    X = build_feature_matrix(doc, model.feature_config, external)
    if X.shape[1] != model.dims["D"]:
        raise ConfigurationError(f"feature dimension {X.shape[1]} != model D {model.dims['D']}")
    return encode(model.child_encoder, X), encode(model.parent_encoder, X)


@dataclass
class _TrainDoc:
    doc_id: str
    X: np.ndarray
    child_rows: np.ndarray
    labels: np.ndarray
    mask: np.ndarray


def _training_pairs(
    doc: Document, cfg: FeatureConfig, external, rules: RuleConfig
) -> _TrainDoc | None:
    _, residual = apply_all_rules(doc, rules)
    index = {e.id: i for i, e in enumerate(doc.entities)}
    full_mask = candidate_mask(doc, rules)
    rows, labels = [], []
    for eid in doc.order:
        gold = doc.by_id[eid].gold_parent
        if eid not in residual or gold is None or gold is ROOT:
            continue
        i, j = index[eid], index[gold]
        if full_mask[i, j]:
            rows.append(i)
            labels.append(j)
    if not rows:
        return None
    rows_arr = np.array(rows)
    return _TrainDoc(
        doc.doc_id,
        build_feature_matrix(doc, cfg, external),
        rows_arr,
        np.array(labels),
        full_mask[rows_arr],
    )


def _doc_loss_and_grads(model: MatchModel, td: _TrainDoc, with_grad: bool = True):
    Uc, cache_c = _encode_full(model.child_encoder, td.X[td.child_rows])
    Up, cache_p = _encode_full(model.parent_encoder, td.X)
    batch = MatchBatch(Uc, Up, td.labels, td.mask, validate=False)
    loss, dUc, dUp = margin_loss_and_grad(batch, model.s, model.m)
    if not with_grad:
        return loss, None
    g_child = encode_backward(model.child_encoder, Uc, cache_c, dUc)
    g_parent = encode_backward(model.parent_encoder, Up, cache_p, dUp)
    return loss, g_child.arrays() + g_parent.arrays()


class Adam:
    """Per-parameter first/second moment step with bias correction."""

    def __init__(self, params: list[np.ndarray], lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def train(
    corpus: CorpusSplit | Sequence[Document],
    model_init: MatchModel,
    epochs: int = 30,
    lr: float = 1e-3,
    seed: int = 42,
    external: ExternalEmbeddings | None = None,
    rules: RuleConfig = DEFAULT_RULES,
) -> tuple[MatchModel, dict]:
    """Fit both encoders with the margin loss, one document per step.

    Children are the rule-residual entities with a gold entity parent that is
    an admissible candidate; candidates are all other entities of the same
    document. Returns the trained copy and a log with per-epoch mean losses.
    """
    if epochs < 0:
        raise ConfigurationError("epochs must be >= 0")
    docs = corpus.train if isinstance(corpus, CorpusSplit) else list(corpus)
    model = copy.deepcopy(model_init)
    log: dict = {"epochs": epochs, "lr": lr, "seed": seed, "epoch_loss": []}
    if epochs == 0:
        return model, log

    cfg = model.feature_config
    batches = [td for d in docs if (td := _training_pairs(d, cfg, external, rules)) is not None]
    if not batches:
        raise ConfigurationError(
            "no trainable pairs: no rule-residual entity in the training documents "
            "has a gold parent entity"
        )
    log["documents"] = len(batches)
    log["pairs"] = int(sum(len(td.labels) for td in batches))
    log["initial_loss"] = float(np.mean([_doc_loss_and_grads(model, td, False)[0] for td in batches]))

    params = model.child_encoder.arrays() + model.parent_encoder.arrays()
    opt = Adam(params, lr=lr)
    rng = np.random.default_rng(seed)
    for epoch in range(epochs):
        losses = []
        for k in rng.permutation(len(batches)):
            loss, grads = _doc_loss_and_grads(model, batches[k])
            opt.step(grads)
            losses.append(loss)
        log["epoch_loss"].append(float(np.mean(losses)))
        logger.info("epoch %d/%d mean loss %.5f", epoch + 1, epochs, log["epoch_loss"][-1])
    return model, log


def score_matrix(child_emb: np.ndarray, parent_emb: np.ndarray) -> np.ndarray:
    """``[i, j]`` = cosine of entity i as child against entity j as parent."""
    return child_emb @ parent_emb.T


def pick_candidate(scores: np.ndarray, candidate_ids: Sequence[str], doc: Document) -> str:
    best = np.max(scores)
    tied = [cid for cid, sc in zip(candidate_ids, scores) if sc == best]
    return min(tied, key=lambda cid: doc.rank[cid])


def score_candidates(
    model: MatchModel,
    child: Entity,
    candidates: Sequence[Entity],
    doc: Document,
    external: ExternalEmbeddings | None = None,
) -> np.ndarray:
    """Cosine between the child's child-role and each candidate's parent-role embedding.

    The training margin is not applied here.
    """
    if not candidates:
        raise ValueError(f"no candidates for entity {child.id!r}")
    if any(c.id == child.id for c in candidates):
        raise ValueError("an entity cannot be its own candidate")
    index = {e.id: i for i, e in enumerate(doc.entities)}
    # full matrix in entity order, so a score never depends on candidate order
    scores = score_matrix(*embed_document(model, doc, external))
    return scores[index[child.id], [index[c.id] for c in candidates]]


def predict_parent(
    model: MatchModel,
    child: Entity,
    candidates: Sequence[Entity],
    doc: Document,
    external: ExternalEmbeddings | None = None,
) -> str:
    """Highest-scoring candidate id; exact ties go to the earlier entity in reading order."""
    scores = score_candidates(model, child, candidates, doc, external)
    return pick_candidate(scores, [c.id for c in candidates], doc)
