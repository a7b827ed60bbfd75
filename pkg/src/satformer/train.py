"""Training loop, evaluation by SR/CV bucket, and the attention breakdown."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from . import checkpoint as ckpt
from .cnf import build_lcg
from .generate import LabeledInstance, compute_cv
from .heads import LossWeights, batch_losses, total_loss
from .model import ModelConfig, SATformer

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 80
    batch_size: int = 16
    lr: float = 1e-4
    weight_decay: float = 1e-10
    clause_shuffle_period: int = 10
    seed: int = 0
    p_clause: float = 1.0
    p_sat: float = 1.0
    normalize_core_target: bool = False
    max_iterations: int | None = None
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        for name in ("epochs", "batch_size", "clause_shuffle_period"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.lr <= 0 or self.weight_decay < 0:
            raise ValueError("lr must be > 0 and weight_decay >= 0")
        LossWeights(self.p_clause, self.p_sat)

    @property
    def loss_weights(self) -> LossWeights:
        return LossWeights(self.p_clause, self.p_sat)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"] = self.model.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "model" in d:
            d["model"] = ModelConfig.from_dict(d["model"])
        return cls(**d)


@dataclass
class ModelCheckpoint:
    model: SATformer
    train_config: TrainConfig | None = None
    metadata: dict = field(default_factory=dict)

    def save(self, path) -> None:
        meta = {
            "model_config": self.model.config.to_dict(),
            "train_config": self.train_config.to_dict() if self.train_config else None,
            **self.metadata,
        }
        ckpt.save(path, self.model.params.state_dict(), meta)

    @classmethod
    def load(cls, path) -> "ModelCheckpoint":
        state, meta = ckpt.load(path)
        meta = dict(meta)
        config = ModelConfig.from_dict(meta.pop("model_config"))
        tc = meta.pop("train_config", None)
        model = SATformer(config)
        model.params.load_state_dict(state)
        return cls(model, TrainConfig.from_dict(tc) if tc else None, meta)


@dataclass
class TrainResult:
    checkpoint: ModelCheckpoint
    loss_curve: list[float]  # one mean loss per iteration
    epoch_losses: list[float]


def _shuffled(rec: LabeledInstance, seed: int, version: int, index: int):
    """Clause order for ``rec`` during shuffle period ``version`` (version 0 keeps file order)."""
    n = rec.instance.num_clauses
    if version == 0:
        perm = np.arange(n)
    else:
        perm = np.random.default_rng([seed, 7919, version, index]).permutation(n)
    inst = rec.instance.permuted(perm)
    mask = np.asarray(rec.core_mask)[perm]
    return build_lcg(inst), mask


def train(
    records: Sequence[LabeledInstance],
    config: TrainConfig,
    progress: Callable[[int, int, float], None] | None = None,
) -> TrainResult:
    """Multi-task training.

    One iteration = one mini-batch: encode, both heads, weighted loss,
    backward, Adam.  Every ``clause_shuffle_period`` iterations the clause
    order of every instance (and its core mask) is re-drawn.
    """
    if not records:
        raise TrainingError("empty training set")
    model = SATformer(config.model, seed=config.seed)
    opt = ad.Adam(model.params, lr=config.lr, weight_decay=config.weight_decay)
    rng = np.random.default_rng(config.seed)
    weights = config.loss_weights
    cache: dict[int, tuple[int, object, np.ndarray]] = {}
    curve: list[float] = []
    epoch_losses: list[float] = []
    it = 0
    done = False
    for epoch in range(config.epochs):
        order = rng.permutation(len(records))
        ep = []
        for start in range(0, len(order), config.batch_size):
            if config.max_iterations is not None and it >= config.max_iterations:
                done = True
                break
            version = it // config.clause_shuffle_period
            batch = order[start:start + config.batch_size]
            graphs, masks = [], []
            for idx in batch:
                hit = cache.get(int(idx))
                if hit is None or hit[0] != version:
                    g, mk = _shuffled(records[idx], config.seed, version, int(idx))
                    cache[int(idx)] = (version, g, mk)
                else:
                    _, g, mk = hit
                graphs.append(g)
                masks.append(mk)
            labels = [records[i].is_sat for i in batch]
            model.params.zero_grad()
            with ad.Tape() as tape:
                out = model.forward(graphs)
                l_clause, l_sat = batch_losses(
                    out.clause_logits, out.counts, out.y_sat, masks, labels,
                    normalize=config.normalize_core_target,
                )
                loss = ad.mean(total_loss(l_clause, l_sat, weights))
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch} iteration {it}: "
                    f"clause={l_clause.data.tolist()} sat={l_sat.data.tolist()}"
                )
            tape.backward(loss)
            opt.step()
            curve.append(value)
            ep.append(value)
            it += 1
            if progress is not None:
                progress(epoch, it, value)
        if ep:
            epoch_losses.append(float(np.mean(ep)))
            log.info("epoch %d: mean loss %.4f", epoch, epoch_losses[-1])
        if done:
            break
    meta = {"epochs_run": len(epoch_losses), "iterations": it, "seed": config.seed,
            "epoch_losses": epoch_losses}
    return TrainResult(ModelCheckpoint(model, config, meta), curve, epoch_losses)


# ---------------------------------------------------------------- evaluation


def sr_label(records: Sequence[LabeledInstance]) -> str:
    ms = [r.m for r in records]
    lo, hi = min(ms), max(ms)
    return f"SR({lo})" if lo == hi else f"SR({lo}-{hi})"


def cv_label(rec: LabeledInstance) -> str:
    if rec.cv_target is not None:
        return f"CV={rec.cv_target}"
    return "CV>5" if compute_cv(rec.instance) > 5 else "CV<=5"


@dataclass
class EvalReport:
    threshold: float
    total: int
    correct: int
    buckets: dict  # key -> {"count", "correct", "accuracy"}
    predictions: list  # per-instance dicts
    attention_row_max_error: float | None = None

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0

    def to_json(self) -> dict:
        return {
            "threshold": self.threshold,
            "total": self.total,
            "correct": self.correct,
            "accuracy": self.accuracy,
            "buckets": self.buckets,
            "attention_row_max_error": self.attention_row_max_error,
            "predictions": self.predictions,
        }


def predict_batches(model: SATformer, records: Sequence[LabeledInstance], batch_size: int = 64,
                    keep_attention: bool = False):
    """Yield ``(batch_records, BatchOutput)`` without recording a tape."""
    with ad.no_tape():
        for start in range(0, len(records), batch_size):
            chunk = records[start:start + batch_size]
            yield chunk, model.forward([r.instance for r in chunk], keep_attention=keep_attention)


def evaluate(model, records: Sequence[LabeledInstance], threshold: float = 0.5,
             batch_size: int = 64, check_attention: bool = False) -> EvalReport:
    """Binary accuracy overall and per ``SR(a-b)/CV`` bucket.

    ``model`` is anything with a ``forward`` like SATformer, or a callable
    mapping a LabeledInstance to a SAT probability (used for stubs).
    """
    if not records:
        raise ValueError("empty evaluation set")
    sr = sr_label(records)
    probs: list[float] = []
    row_err = 0.0
    if isinstance(model, SATformer):
        for _, out in predict_batches(model, records, batch_size, keep_attention=check_attention):
            probs.extend(out.y_sat.data.tolist())
            if check_attention:
                for tr in out.hier.levels:
                    row_err = max(row_err, float(np.abs(tr.attention.sum(axis=-1) - 1.0).max()))
    else:
        probs = [float(model(r)) for r in records]
    buckets: dict[str, dict] = {}
    predictions = []
    correct = 0
    for rec, p in zip(records, probs):
        pred = p >= threshold
        ok = pred == rec.is_sat
        correct += ok
        key = f"{sr}/{cv_label(rec)}"
        b = buckets.setdefault(key, {"count": 0, "correct": 0})
        b["count"] += 1
        b["correct"] += int(ok)
        predictions.append({"id": rec.id, "y_sat": p, "pred_sat": bool(pred), "is_sat": rec.is_sat})
    for b in buckets.values():
        b["accuracy"] = b["correct"] / b["count"]
    return EvalReport(threshold, len(records), int(correct), dict(sorted(buckets.items())), predictions,
                      row_err if check_attention else None)


# ---------------------------------------------------------------- attention breakdown


@dataclass
class AttentionBreakdown:
    cc: float
    cu: float
    uc: float
    uu: float
    instances: int

    def to_json(self) -> dict:
        return {"cc": self.cc, "cu": self.cu, "uc": self.uc, "uu": self.uu, "instances": self.instances}


def split_clauses(scores: np.ndarray) -> np.ndarray:
    """True for C-clauses: the top floor(n/2) by score (the odd middle one goes to U)."""
    n = len(scores)
    order = np.argsort(-np.asarray(scores), kind="stable")
    is_c = np.zeros(n, dtype=bool)
    is_c[order[: n // 2]] = True
    return is_c


def attention_mass(weights: np.ndarray, window_size: int, n: int, is_c: np.ndarray) -> np.ndarray:
    """Sum level-1 attention of one instance into [CC, CU, UC, UU] (query, key) buckets.

    ``weights`` is ``(windows, heads, w, w)``; padding rows/cols are skipped.
    """
    totals = np.zeros(4)
    for win in range(weights.shape[0]):
        clauses = np.arange(win * window_size, min((win + 1) * window_size, n))
        t = len(clauses)
        block = weights[win][:, :t, :t].sum(axis=0)  # sum over heads
        qc = is_c[clauses][:, None]
        kc = is_c[clauses][None, :]
        totals[0] += block[qc & kc].sum()
        totals[1] += block[qc & ~kc].sum()
        totals[2] += block[~qc & kc].sum()
        totals[3] += block[~qc & ~kc].sum()
    return totals


def attention_breakdown(model: SATformer, records: Sequence[LabeledInstance],
                        batch_size: int = 64) -> AttentionBreakdown:
    """Share of level-1 attention between likely-core (C) and unlikely (U) clauses."""
    totals = np.zeros(4)
    w = model.config.hier.window
    count = 0
    for chunk, out in predict_batches(model, records, batch_size, keep_attention=True):
        level1 = out.hier.levels[0]
        starts = np.concatenate([[0], np.cumsum(level1.windows)])
        for b, rec in enumerate(chunk):
            is_c = split_clauses(out.clause_scores(b))
            weights = level1.attention[starts[b]:starts[b + 1]]
            totals += attention_mass(weights, w, rec.n, is_c)
            count += 1
    if totals.sum() <= 0:
        raise ValueError("no attention mass recorded")
    pct = 100.0 * totals / totals.sum()
    return AttentionBreakdown(*map(float, pct), instances=count)
