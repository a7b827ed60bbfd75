"""Clause-level core head and the training losses."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor
from .layers import init_mlp, mlp

BCE_EPS = 1e-12


@dataclass
class ClausePrediction:
    logits: Tensor  # (n,)
    y: Tensor  # softmax over clauses, sums to 1
    s: Tensor  # per-clause logistic score in (0, 1)


@dataclass(frozen=True)
class LossWeights:
    p_clause: float = 1.0
    p_sat: float = 1.0

    def __post_init__(self):
        if self.p_clause < 0 or self.p_sat < 0:
            raise ValueError("loss weights must be non-negative")
        if self.p_clause + self.p_sat <= 0:
            raise ValueError("at least one loss weight must be positive")


def init_clause_head(store: ParamStore, dim: int, rng: np.random.Generator) -> None:
    init_mlp(store, "clause_head", [dim, dim, dim, 1], rng)


def clause_logits(h0: Tensor, store: ParamStore) -> Tensor:
    return ad.reshape(mlp(store, "clause_head", h0), (h0.shape[0],))


def clause_head(h0: Tensor, store: ParamStore) -> ClausePrediction:
    """Shared MLP per clause row; softmax distribution and logistic scores."""
    if h0.shape[0] < 1:
        raise ValueError("clause head needs at least one clause")
    logits = clause_logits(h0, store)
    return ClausePrediction(logits=logits, y=ad.softmax_rows(logits), s=ad.sigmoid(logits))


def _target(y_star: Sequence[float], normalize: bool) -> np.ndarray:
    t = np.asarray(y_star, dtype=np.float64)
    if normalize and t.sum() > 0:
        t = t / t.sum()
    return t


def kl_clause_loss(y_star: Sequence[float], y, normalize: bool = False) -> Tensor:
    """sum_i y*_i log(y*_i / y_i) with 0 log 0 = 0.

    ``y`` is a probability vector (Tensor, array, or ClausePrediction).
    With ``normalize`` the binary target is rescaled to a distribution over
    the core clauses first.
    """
    if isinstance(y, ClausePrediction):
        y = y.y
    y = ad.as_tensor(y)
    t = _target(y_star, normalize)
    if t.shape != y.shape:
        raise ad.ShapeError(f"target length {t.shape} vs prediction {y.shape}")
    nz = np.flatnonzero(t > 0)
    if len(nz) == 0:
        return ad.Tensor(0.0)
    const = float(np.sum(t[nz] * np.log(t[nz])))
    picked = ad.log(ad.index(y, nz))
    return ad.add(ad.scale(ad.sum(ad.mul(picked, t[nz])), -1.0), const)


def bce_sat_loss(y_star: float, y_sat) -> Tensor:
    """Binary cross-entropy with the prediction clamped to [1e-12, 1 - 1e-12]."""
    y = ad.clip(ad.as_tensor(y_sat), BCE_EPS, 1.0 - BCE_EPS)
    pos = ad.scale(ad.log(y), float(y_star))
    neg = ad.scale(ad.log(ad.sub(1.0, y)), 1.0 - float(y_star))
    return ad.scale(ad.add(pos, neg), -1.0)


def total_loss(l_clause, l_sat, weights: LossWeights):
    """(p_clause * L_clause + p_sat * L_sat) / (p_clause + p_sat)."""
    denom = weights.p_clause + weights.p_sat
    if isinstance(l_clause, Tensor) or isinstance(l_sat, Tensor):
        return ad.scale(
            ad.add(ad.scale(ad.as_tensor(l_clause), weights.p_clause),
                   ad.scale(ad.as_tensor(l_sat), weights.p_sat)),
            1.0 / denom,
        )
    return (weights.p_clause * l_clause + weights.p_sat * l_sat) / denom


def batch_losses(
    logits: Tensor,
    counts: Sequence[int],
    y_sat: Tensor,
    targets: Sequence[Sequence[int]],
    labels: Sequence[bool],
    normalize: bool = False,
) -> tuple[Tensor, Tensor]:
    """Per-instance clause KL and sat BCE for a stacked batch -> two (B,) tensors.

    Mathematically identical to calling ``kl_clause_loss``/``bce_sat_loss``
    per instance, but uses a segment log-softmax instead of log(softmax).
    """
    B = len(counts)
    seg = np.repeat(np.arange(B), counts)
    logp = ad.segment_log_softmax(logits, seg, B)
    t = np.concatenate([_target(tg, normalize) for tg in targets])
    nz = t > 0
    const = np.zeros(B)
    np.add.at(const, seg[nz], t[nz] * np.log(t[nz]))
    weighted = ad.reshape(ad.mul(logp, -t), (len(t), 1))
    l_clause = ad.add(ad.reshape(ad.scatter_add_rows(weighted, seg, B), (B,)), const)
    y = ad.clip(y_sat, BCE_EPS, 1.0 - BCE_EPS)
    lab = np.asarray(labels, dtype=np.float64)
    l_sat = ad.scale(ad.add(ad.mul(ad.log(y), lab), ad.mul(ad.log(ad.sub(1.0, y)), 1.0 - lab)), -1.0)
    return l_clause, l_sat
