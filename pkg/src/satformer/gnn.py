"""Message passing over the literal-clause graph.

Each round updates clauses from the summed messages of their literals, then
literals from the summed messages of their clauses together with the state
of their negation partner.  Both node types carry a layer-normalised
LSTM-style cell.  Aggregation is a plain sum, so clause states are exactly
equivariant under clause permutation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor
from .cnf import LiteralClauseGraph
from .layers import init_mlp, mlp, normal_init

FORGET_BIAS = 1.0


@dataclass(frozen=True)
class EncoderConfig:
    dim: int = 128
    iterations: int = 10

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("encoder dim must be >= 1")
        if self.iterations < 1:
            raise ValueError("message-passing iterations must be >= 1")


@dataclass
class EncodeOutput:
    literal_states: Tensor  # (2m, d)
    clause_states: Tensor  # (n, d), H0


def _init_cell(store: ParamStore, prefix: str, in_dim: int, d: int, rng) -> None:
    store.add(f"{prefix}.W", normal_init(rng, in_dim + d, (in_dim + d, 4 * d)))
    store.add(f"{prefix}.ln_gain", np.ones((4, d)))
    store.add(f"{prefix}.ln_bias", np.zeros((4, d)))
    store.add(f"{prefix}.c_gain", np.ones(d))
    store.add(f"{prefix}.c_bias", np.zeros(d))


def init_encoder(store: ParamStore, config: EncoderConfig, rng: np.random.Generator) -> None:
    d = config.dim
    store.add("enc.L_init", normal_init(rng, d, d))
    store.add("enc.C_init", normal_init(rng, d, d))
    init_mlp(store, "enc.lit_msg", [d, d, d, d], rng)
    init_mlp(store, "enc.cls_msg", [d, d, d, d], rng)
    _init_cell(store, "enc.lit_cell", 2 * d, d, rng)
    _init_cell(store, "enc.cls_cell", d, d, rng)


def lstm_cell(store: ParamStore, prefix: str, x: Tensor, h: Tensor, c: Tensor) -> tuple[Tensor, Tensor]:
    rows, d = h.shape
    z = ad.matmul(ad.concat_cols([x, h]), store[f"{prefix}.W"])
    z = ad.layer_norm(ad.reshape(z, (rows, 4, d)), store[f"{prefix}.ln_gain"], store[f"{prefix}.ln_bias"])
    i, f, o, g = (ad.index(z, (slice(None), k, slice(None))) for k in range(4))
    c_new = ad.add(
        ad.mul(c, ad.sigmoid(ad.add(f, FORGET_BIAS))),
        ad.mul(ad.sigmoid(i), ad.tanh(g)),
    )
    c_norm = ad.layer_norm(c_new, store[f"{prefix}.c_gain"], store[f"{prefix}.c_bias"])
    h_new = ad.mul(ad.sigmoid(o), ad.tanh(c_norm))
    return h_new, c_new


def _tile(v: Tensor, rows: int) -> Tensor:
    return ad.gather_rows(ad.reshape(v, (1, -1)), np.zeros(rows, dtype=np.int64))


def encode(graph: LiteralClauseGraph, store: ParamStore, config: EncoderConfig) -> EncodeOutput:
    """Run ``config.iterations`` alternating rounds; states start from the learned init vectors."""
    n_lit, n_cls = graph.num_literals, graph.num_clauses
    d = config.dim
    lit_h = _tile(store["enc.L_init"], n_lit)
    cls_h = _tile(store["enc.C_init"], n_cls)
    lit_c = ad.Tensor(np.zeros((n_lit, d)))
    cls_c = ad.Tensor(np.zeros((n_cls, d)))
    partner = graph.negation_partner()
    for _ in range(config.iterations):
        lit_msg = mlp(store, "enc.lit_msg", lit_h)
        to_cls = ad.scatter_add_rows(ad.gather_rows(lit_msg, graph.edge_lit), graph.edge_clause, n_cls)
        cls_h, cls_c = lstm_cell(store, "enc.cls_cell", to_cls, cls_h, cls_c)
        cls_msg = mlp(store, "enc.cls_msg", cls_h)
        to_lit = ad.scatter_add_rows(ad.gather_rows(cls_msg, graph.edge_clause), graph.edge_lit, n_lit)
        flipped = ad.gather_rows(lit_h, partner)
        lit_h, lit_c = lstm_cell(store, "enc.lit_cell", ad.concat_cols([to_lit, flipped]), lit_h, lit_c)
    return EncodeOutput(literal_states=lit_h, clause_states=cls_h)
