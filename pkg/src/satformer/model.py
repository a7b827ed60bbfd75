"""The full network: GNN encoder, clause head and hierarchical readout."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor
from .cnf import CnfInstance, LiteralClauseGraph, build_lcg
from .gnn import EncoderConfig, encode, init_encoder
from .heads import clause_logits, init_clause_head
from .hier import HierConfig, HierOutput, forward as hier_forward, init_hier


@dataclass(frozen=True)
class ModelConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    hier: HierConfig = field(default_factory=HierConfig)

    def __post_init__(self):
        if self.encoder.dim != self.hier.dim:
            raise ValueError(f"encoder dim {self.encoder.dim} != hierarchy dim {self.hier.dim}")

    @classmethod
    def make(cls, dim: int = 128, iterations: int = 10, window: int = 4, levels: int = 4,
             heads: int = 8) -> "ModelConfig":
        return cls(EncoderConfig(dim, iterations), HierConfig(window, levels, heads, dim))

    def to_dict(self) -> dict:
        return {"encoder": asdict(self.encoder), "hier": asdict(self.hier)}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(EncoderConfig(**d["encoder"]), HierConfig(**d["hier"]))


@dataclass
class BatchOutput:
    counts: list[int]
    h0: Tensor  # stacked clause embeddings
    clause_logits: Tensor  # stacked (sum n,)
    hier: HierOutput

    @property
    def y_sat(self) -> Tensor:
        return self.hier.y_sat

    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.counts)])

    def clause_probs(self, b: int) -> np.ndarray:
        """Softmax distribution over the clauses of instance ``b``."""
        o = self.offsets()
        z = self.clause_logits.data[o[b]:o[b + 1]]
        e = np.exp(z - z.max())
        return e / e.sum()

    def clause_scores(self, b: int) -> np.ndarray:
        """Per-clause logistic scores of instance ``b``."""
        o = self.offsets()
        return ad._sigmoid(self.clause_logits.data[o[b]:o[b + 1]])


class SATformer:
    def __init__(self, config: ModelConfig | None = None, seed: int = 0, params: ParamStore | None = None):
        self.config = config or ModelConfig()
        if params is None:
            rng = np.random.default_rng(seed)
            params = ParamStore()
            init_encoder(params, self.config.encoder, rng)
            init_clause_head(params, self.config.encoder.dim, rng)
            init_hier(params, self.config.hier, rng)
        self.params = params

    def num_params(self) -> int:
        return self.params.num_scalars()

    def forward(self, instances: Sequence[CnfInstance] | Sequence[LiteralClauseGraph],
                keep_attention: bool = False) -> BatchOutput:
        graphs = [g if isinstance(g, LiteralClauseGraph) else build_lcg(g) for g in instances]
        counts = [g.num_clauses for g in graphs]
        union = LiteralClauseGraph.disjoint_union(graphs)
        h0 = encode(union, self.params, self.config.encoder).clause_states
        logits = clause_logits(h0, self.params)
        hier = hier_forward(h0, counts, self.params, self.config.hier, keep_attention=keep_attention)
        return BatchOutput(counts=counts, h0=h0, clause_logits=logits, hier=hier)

    def predict(self, instance: CnfInstance) -> dict:
        """Scores for one instance in the shape of the solver's scores file."""
        with ad.no_tape():
            out = self.forward([instance])
        return {
            "y_sat": float(out.y_sat.data[0]),
            "y_clause": out.clause_probs(0).tolist(),
            "s_clause": out.clause_scores(0).tolist(),
        }
