"""SAT prediction with a graph encoder and hierarchical transformer, plus a CDCL solver.

The core objects are re-exported here; submodules hold the rest.
"""

from .cnf import CnfInstance, DimacsError, LiteralClauseGraph, build_lcg, parse_dimacs, read_dimacs, serialize_dimacs
from .generate import GenParams, LabeledInstance, generate_dataset, generate_records, load_dataset
from .model import ModelConfig, SATformer
from .oracle import minimal_unsat_core, solve_exhaustive
from .solver import SolverConfig, compare_runs, init_scores, solve
from .train import ModelCheckpoint, TrainConfig, attention_breakdown, evaluate, train

__all__ = [
    "CnfInstance", "DimacsError", "LiteralClauseGraph", "build_lcg", "parse_dimacs", "read_dimacs",
    "serialize_dimacs", "GenParams", "LabeledInstance", "generate_dataset", "generate_records",
    "load_dataset", "ModelConfig", "SATformer", "minimal_unsat_core", "solve_exhaustive",
    "SolverConfig", "compare_runs", "init_scores", "solve", "ModelCheckpoint", "TrainConfig",
    "attention_breakdown", "evaluate", "train",
]
