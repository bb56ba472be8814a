"""Contrastive matching losses over child/parent role embeddings.

``clip_loss`` is the plain softmax cross-entropy over scaled cosines.
``margin_loss_forward`` adds an angular margin ``m`` to the true pair only::

    L = -1/Nc * sum_i log( e^{s cos(t_i + m)} / (e^{s cos(t_i + m)} + sum_{j != y_i} e^{s cos t_ij}) )

where ``t_ij`` is the angle between child row i and parent row j and
``t_i = t_{i, y_i}``. With ``m = 0`` the two losses coincide.
"""

from __future__ import annotations

import math
from dataclasses import InitVar, dataclass

import numpy as np

from .errors import ConfigurationError

SIN_FLOOR = 1e-7


@dataclass
class MatchBatch:
    """Unit-row child/parent embeddings plus the true parent index per child.

    ``mask[i, j]`` (optional) marks parent j as an admissible candidate for
    child i; excluded candidates drop out of the softmax denominator.
    """

    child_embeddings: np.ndarray
    parent_embeddings: np.ndarray
    labels: np.ndarray
    mask: np.ndarray | None = None
    validate: InitVar[bool] = True

    def __post_init__(self, validate: bool) -> None:
        self.child_embeddings = np.asarray(self.child_embeddings, dtype=float)
        self.parent_embeddings = np.asarray(self.parent_embeddings, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        C, P, y = self.child_embeddings, self.parent_embeddings, self.labels
        if C.ndim != 2 or P.ndim != 2 or C.shape[1] != P.shape[1]:
            raise ValueError("embeddings must be 2-D with a shared column count")
        if y.shape != (C.shape[0],):
            raise ValueError("need one label per child row")
        if np.any(y < 0) or np.any(y >= P.shape[0]):
            raise ValueError("labels must index parent rows")
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.shape != (C.shape[0], P.shape[0]):
                raise ValueError("mask shape must be (N_c, N_p)")
            if not np.all(self.mask[np.arange(len(y)), y]):
                raise ValueError("true parent must be an admissible candidate")
        if validate:
            for name, M in (("child", C), ("parent", P)):
                if np.any(np.abs(np.linalg.norm(M, axis=1) - 1.0) > 1e-9):
                    raise ValueError(f"{name} embeddings must have unit rows")

    @property
    def cosines(self) -> np.ndarray:
        return self.child_embeddings @ self.parent_embeddings.T


def check_hyperparameters(s: float, m: float = 0.0) -> None:
    if not (s > 0 and math.isfinite(s)):
        raise ConfigurationError(f"scale s must be positive, got {s}")
    if not (0.0 <= m < math.pi / 2):
        raise ConfigurationError(f"margin m must lie in [0, pi/2), got {m}")


def _masked(batch: MatchBatch, logits: np.ndarray) -> np.ndarray:
    if batch.mask is None:
        return logits
    return np.where(batch.mask, logits, -np.inf)


def _row_nll(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-row -log softmax at ``labels``.

    Works on offsets from the true logit so a confident row yields
    log1p(tiny) instead of the difference of two large numbers; finite
    differences on near-zero losses depend on that.
    """
    rows = np.arange(len(labels))
    d = logits - logits[rows, labels][:, None]
    d[rows, labels] = -np.inf
    top = np.maximum(np.max(d, axis=1), 0.0)
    rest = np.sum(np.exp(d - top[:, None]), axis=1)
    return np.where(top > 0.0, top + np.log(np.exp(-top) + rest), np.log1p(rest))


def clip_loss(batch: MatchBatch, s: float) -> float:
    check_hyperparameters(s)
    logits = _masked(batch, s * batch.cosines)
    return float(np.mean(_row_nll(logits, batch.labels)))


def _margin_terms(batch: MatchBatch, s: float, m: float):
    check_hyperparameters(s, m)
    rows = np.arange(len(batch.labels))
    cos = batch.cosines
    true_cos = cos[rows, batch.labels]
    # domain guard only: clamping tighter than [-1, 1] would move exact
    # theta = 0 pairs off zero and bias the loss
    theta = np.arccos(np.clip(true_cos, -1.0, 1.0))
    logits = s * cos
    logits[rows, batch.labels] = s * np.cos(theta + m)
    logits = _masked(batch, logits)
    nll = _row_nll(logits, batch.labels)
    return float(np.mean(nll)), logits, nll, true_cos, theta


def margin_loss_forward(batch: MatchBatch, s: float, m: float) -> float:
    return _margin_terms(batch, s, m)[0]


def margin_loss_and_grad(
    batch: MatchBatch, s: float, m: float
) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss plus gradients w.r.t. child and parent embedding matrices."""
    loss, logits, nll, true_cos, theta = _margin_terms(batch, s, m)
    n_c = len(batch.labels)
    rows = np.arange(n_c)
    true_logit = logits[rows, batch.labels][:, None]
    d_logits = np.exp(logits - true_logit - nll[:, None])
    # p_true - 1 = expm1(-nll), exact for confident rows
    d_logits[rows, batch.labels] = np.expm1(-nll)
    d_logits /= n_c
    d_cos = s * d_logits
    # true pair: d/dc [s cos(arccos c + m)] = s sin(theta + m) / sin(theta); zero outside [-1, 1]
    inside = np.abs(true_cos) <= 1.0
    chain = np.sin(theta + m) / np.maximum(np.sin(theta), SIN_FLOOR)
    d_cos[rows, batch.labels] = np.where(inside, s * d_logits[rows, batch.labels] * chain, 0.0)
    d_child = d_cos @ batch.parent_embeddings
    d_parent = d_cos.T @ batch.child_embeddings
    return loss, d_child, d_parent


def margin_loss_backward(batch: MatchBatch, s: float, m: float) -> tuple[np.ndarray, np.ndarray]:
    _, d_child, d_parent = margin_loss_and_grad(batch, s, m)
    return d_child, d_parent
