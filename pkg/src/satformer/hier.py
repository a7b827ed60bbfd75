"""Hierarchical windowed Transformer over clause embeddings.

Level 1 splits the (zero-padded) clause embeddings into windows of ``w``
tokens, runs one Transformer block inside every window and folds each
window into a group embedding with a learned ``(w*d) -> d`` map.  Level
``l >= 2`` does the same over the group embeddings of level ``l-1``.
Padding tokens are masked out as attention keys and excluded from every
max-pool.

All functions work on a batch of instances at once: windows of different
instances are stacked along the leading axis, which is exact because no
computation crosses a window boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor
from .layers import init_mlp, mlp, normal_init

MASK_VALUE = -1e30


@dataclass(frozen=True)
class HierConfig:
    window: int = 4
    levels: int = 4
    heads: int = 8
    dim: int = 128

    def __post_init__(self):
        if self.window < 2:
            raise ValueError("window size must be >= 2")
        if self.levels < 1:
            raise ValueError("need at least one level")
        if self.heads < 1 or self.dim % self.heads:
            raise ValueError(f"dim {self.dim} must be divisible by heads {self.heads}")


@dataclass(frozen=True)
class AttentionRecord:
    level: int
    window: int
    head: int
    matrix: np.ndarray  # (w, w), rows sum to 1

    def to_json(self) -> dict:
        return {
            "level": self.level,
            "window": self.window,
            "head": self.head,
            "matrix": self.matrix.tolist(),
        }


@dataclass
class LevelTrace:
    level: int
    windows: list[int]  # D^l per instance
    real_tokens: list[int]  # unpadded input tokens per instance
    attention: np.ndarray | None = None  # (sum D^l, heads, w, w)


@dataclass
class HierOutput:
    y_sat: Tensor  # (B,)
    logit: Tensor  # (B,)
    levels: list[LevelTrace] = field(default_factory=list)
    level_embeddings: list[Tensor] = field(default_factory=list)  # each (B, d)
    final_group: Tensor | None = None  # (B, d)

    def attention_records(self, instance: int = 0) -> list[AttentionRecord]:
        out = []
        for tr in self.levels:
            if tr.attention is None:
                continue
            start = int(np.sum(tr.windows[:instance]))
            for win in range(tr.windows[instance]):
                mats = tr.attention[start + win]
                for head in range(mats.shape[0]):
                    out.append(AttentionRecord(tr.level, win, head, mats[head]))
        return out


def window_count(n: int, w: int, level: int) -> int:
    """Number of windows at ``level``: ceil(n / w**level)."""
    if n < 1 or w < 2 or level < 1:
        raise ValueError(f"need n >= 1, w >= 2, level >= 1; got {n}, {w}, {level}")
    return -(-n // w**level)


def group_members(n: int, w: int, level: int) -> list[list[int]]:
    """Clause indices (0-based) summarised by each group at ``level``."""
    span = w**level
    return [list(range(d * span, min((d + 1) * span, n))) for d in range(window_count(n, w, level))]


def init_hier(store: ParamStore, config: HierConfig, rng: np.random.Generator) -> None:
    d, w = config.dim, config.window
    for l in range(1, config.levels + 1):
        p = f"hier.l{l}"
        for name in ("Wq", "Wk", "Wv", "Wo"):
            store.add(f"{p}.{name}", normal_init(rng, d, (d, d)))
        store.add(f"{p}.bo", np.zeros(d))
        store.add(f"{p}.ff1.W", normal_init(rng, d, (d, 4 * d)))
        store.add(f"{p}.ff1.b", np.zeros(4 * d))
        store.add(f"{p}.ff2.W", normal_init(rng, 4 * d, (4 * d, d)))
        store.add(f"{p}.ff2.b", np.zeros(d))
        store.add(f"{p}.comb.W", normal_init(rng, w * d, (w * d, d)))
        store.add(f"{p}.comb.b", np.zeros(d))
    init_mlp(store, "readout", [(config.levels + 2) * d, d, d, 1], rng)


def self_attention(
    x: Tensor, store: ParamStore, prefix: str, heads: int, key_mask: np.ndarray | None = None
) -> tuple[Tensor, np.ndarray]:
    """Multi-head self-attention inside each window.

    ``x`` is ``(windows, t, d)``; ``key_mask`` (``(windows, t)``, True = real
    token) hides padding keys.  Returns the output-projected update (no
    residual) and the attention weights ``(windows, heads, t, t)``.
    """
    if x.data.ndim == 2:
        x = ad.reshape(x, (1,) + x.shape)
    nw, t, d = x.shape
    if d % heads:
        raise ad.ShapeError(f"width {d} not divisible by {heads} heads")
    dk = d // heads

    def split(z):
        return ad.transpose(ad.reshape(z, (nw, t, heads, dk)), (0, 2, 1, 3))

    q = split(ad.matmul(x, store[f"{prefix}.Wq"]))
    k = split(ad.matmul(x, store[f"{prefix}.Wk"]))
    v = split(ad.matmul(x, store[f"{prefix}.Wv"]))
    scores = ad.scale(ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(dk))
    if key_mask is not None:
        bias = np.where(key_mask, 0.0, MASK_VALUE)[:, None, None, :]
        scores = ad.add(scores, bias)
    attn = ad.softmax_rows(scores)
    out = ad.matmul(attn, v)
    out = ad.reshape(ad.transpose(out, (0, 2, 1, 3)), (nw, t, d))
    out = ad.linear(out, store[f"{prefix}.Wo"], store[f"{prefix}.bo"])
    return out, attn.data


def transformer_block(
    x: Tensor, store: ParamStore, prefix: str, heads: int, key_mask: np.ndarray | None = None
) -> tuple[Tensor, np.ndarray]:
    att, weights = self_attention(x, store, prefix, heads, key_mask)
    h = ad.add(x, att)
    ff = ad.linear(ad.relu(ad.linear(h, store[f"{prefix}.ff1.W"], store[f"{prefix}.ff1.b"])),
                   store[f"{prefix}.ff2.W"], store[f"{prefix}.ff2.b"])
    return ad.add(h, ff), weights


def combine_windows(updated: Tensor, store: ParamStore, prefix: str) -> Tensor:
    """Fold each ``(w, d)`` window into one group embedding ``(d,)``."""
    nw, w, d = updated.shape
    return ad.linear(ad.reshape(updated, (nw, w * d)), store[f"{prefix}.comb.W"], store[f"{prefix}.comb.b"])


def attention_unit(tokens: Tensor, level: int, store: ParamStore, config: HierConfig,
                   real: int | None = None) -> Tensor:
    """One window of exactly ``w`` tokens -> its group embedding ``(d,)``.

    ``real`` is the number of non-padding tokens at the front (default all).
    """
    w = config.window
    if tokens.shape[0] != w:
        raise ad.ShapeError(f"attention unit needs {w} tokens, got {tokens.shape[0]}")
    mask = None
    if real is not None:
        mask = (np.arange(w) < real)[None, :]
    x = ad.reshape(tokens, (1, w, config.dim))
    updated, _ = transformer_block(x, store, f"hier.l{level}", config.heads, mask)
    return ad.reshape(combine_windows(updated, store, f"hier.l{level}"), (config.dim,))


def _layout(counts: Sequence[int], w: int):
    """Token positions of the real rows and per-window bookkeeping for one level."""
    counts = np.asarray(counts, dtype=np.int64)
    windows = -(-counts // w)
    win_start = np.concatenate([[0], np.cumsum(windows)[:-1]])
    positions = np.concatenate([win_start[b] * w + np.arange(c) for b, c in enumerate(counts)])
    owner = np.repeat(np.arange(len(counts)), counts)
    window_owner = np.repeat(np.arange(len(counts)), windows)
    return windows, positions, owner, window_owner


def forward(
    h0: Tensor,
    counts: Sequence[int],
    store: ParamStore,
    config: HierConfig,
    keep_attention: bool = False,
) -> HierOutput:
    """Run all levels over a batch.

    ``h0`` stacks the clause embeddings of every instance (``counts[b]``
    rows for instance ``b``, in order).
    """
    counts = [int(c) for c in counts]
    if any(c < 1 for c in counts):
        raise ValueError("every instance needs at least one clause")
    if h0.shape[0] != sum(counts):
        raise ad.ShapeError(f"h0 has {h0.shape[0]} rows, counts sum to {sum(counts)}")
    B, w, d = len(counts), config.window, config.dim
    f0 = ad.segment_max_rows(h0, np.repeat(np.arange(B), counts), B)
    level_emb = [f0]
    traces = []
    rows, real = h0, counts
    groups = None
    window_owner = None
    for l in range(1, config.levels + 1):
        windows, positions, owner, window_owner = _layout(real, w)
        total = int(windows.sum())
        tokens = ad.scatter_add_rows(rows, positions, total * w)
        key_mask = np.zeros(total * w, dtype=bool)
        key_mask[positions] = True
        x = ad.reshape(tokens, (total, w, d))
        prefix = f"hier.l{l}"
        updated, weights = transformer_block(x, store, prefix, config.heads, key_mask.reshape(total, w))
        flat = ad.reshape(updated, (total * w, d))
        level_emb.append(ad.segment_max_rows(ad.gather_rows(flat, positions), owner, B))
        groups = combine_windows(updated, store, prefix)
        traces.append(LevelTrace(l, windows.tolist(), list(real), weights if keep_attention else None))
        rows, real = groups, windows.tolist()
    final_group = ad.segment_max_rows(groups, window_owner, B)
    features = ad.concat_cols(level_emb + [final_group])
    logit = ad.reshape(mlp(store, "readout", features), (B,))
    return HierOutput(
        y_sat=ad.sigmoid(logit),
        logit=logit,
        levels=traces,
        level_embeddings=level_emb,
        final_group=final_group,
    )
