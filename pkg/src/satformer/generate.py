"""Paired SR(m) instance generation and labeled JSONL datasets.

Each pair is grown clause by clause until the formula first becomes
unsatisfiable.  The UNSAT member keeps that last clause; the SAT member
flips the polarity of one of its literals, which is guaranteed to restore
satisfiability (every model of the prefix falsifies the last clause).
"""

from __future__ import annotations

import json
import math
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .cnf import CnfInstance, parse_dimacs, serialize_dimacs
from .oracle import (
    TRUTH_TABLE_MAX_VARS,
    TruthTable,
    _dpll,
    core_mask,
    minimal_unsat_core,
    solve_exhaustive,
)


@dataclass(frozen=True)
class GenParams:
    m_min: int = 3
    m_max: int = 10
    p_bernoulli: float = 0.3
    p_geometric: float = 0.4
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.m_min <= self.m_max:
            raise ValueError(f"need 1 <= m_min <= m_max, got {self.m_min}, {self.m_max}")
        for name in ("p_bernoulli", "p_geometric"):
            p = getattr(self, name)
            if not 0.0 < p < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {p}")


@dataclass(frozen=True)
class LabeledInstance:
    instance: CnfInstance
    is_sat: bool
    core_mask: tuple[int, ...]
    id: str = ""
    minimal_only: bool = False
    cv_target: int | None = None

    def __post_init__(self):
        if len(self.core_mask) != self.instance.num_clauses:
            raise ValueError("core_mask length must equal the number of clauses")
        if self.is_sat and any(self.core_mask):
            raise ValueError("satisfiable instance must have an all-zero core mask")
        if not self.is_sat and not any(self.core_mask):
            raise ValueError("unsatisfiable instance needs a non-empty core mask")

    @property
    def m(self) -> int:
        return self.instance.num_vars

    @property
    def n(self) -> int:
        return self.instance.num_clauses

    def to_record(self) -> dict:
        rec = {
            "id": self.id,
            "dimacs": serialize_dimacs(self.instance),
            "is_sat": self.is_sat,
            "core_mask": list(self.core_mask),
            "m": self.m,
            "n": self.n,
        }
        if self.minimal_only:
            rec["minimal_only"] = True
        if self.cv_target is not None:
            rec["cv_target"] = self.cv_target
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "LabeledInstance":
        inst = parse_dimacs(rec["dimacs"])
        if inst.num_vars != rec["m"] or inst.num_clauses != rec["n"]:
            raise ValueError(f"record {rec.get('id')!r}: m/n fields disagree with dimacs")
        return cls(
            instance=inst,
            is_sat=bool(rec["is_sat"]),
            core_mask=tuple(int(b) for b in rec["core_mask"]),
            id=rec.get("id", ""),
            minimal_only=bool(rec.get("minimal_only", False)),
            cv_target=rec.get("cv_target"),
        )


def compute_cv(instance: CnfInstance) -> float:
    """Clause-to-variable ratio n/m."""
    if instance.num_vars == 0:
        raise ValueError("CV is undefined for an instance with no variables")
    return instance.num_clauses / instance.num_vars


def sample_clause(m: int, params: GenParams, rng: np.random.Generator) -> tuple[int, ...]:
    # geometric counts failures before the first success (support 0, 1, ...)
    k = 2 + int(rng.random() < params.p_bernoulli) + int(rng.geometric(params.p_geometric)) - 1
    k = min(k, m)
    variables = rng.choice(m, size=k, replace=False) + 1
    signs = rng.random(k) < 0.5
    return tuple(int(-v if s else v) for v, s in zip(variables, signs))


def generate_sr_pair(
    m: int, params: GenParams, rng: np.random.Generator
) -> tuple[CnfInstance, CnfInstance]:
    """Return ``(sat, unsat)`` differing only in one literal of the last clause."""
    if m < 1:
        raise ValueError("m must be >= 1")
    clauses: list[tuple[int, ...]] = []
    if m <= TRUTH_TABLE_MAX_VARS:
        table = TruthTable(CnfInstance(m, []))
        models = table.full
        while True:
            clause = sample_clause(m, params, rng)
            clause_set = TruthTable(CnfInstance(m, [clause])).clause_sets[0]
            clauses.append(clause)
            models &= clause_set
            if models == 0:
                break
    else:
        while True:
            clause = sample_clause(m, params, rng)
            clauses.append(clause)
            if _dpll(m, clauses) is None:
                break
    last = clauses[-1]
    flip = int(rng.integers(len(last)))
    flipped = tuple(-l if i == flip else l for i, l in enumerate(last))
    sat = CnfInstance(m, clauses[:-1] + [flipped])
    unsat = CnfInstance(m, clauses)
    return sat, unsat


def label_instance(instance: CnfInstance, id: str = "", cv_target: int | None = None) -> LabeledInstance:
    """Label with the oracle: SAT gets all zeros, UNSAT gets its minimal core."""
    verdict = solve_exhaustive(instance)
    if verdict.is_sat:
        return LabeledInstance(instance, True, (0,) * instance.num_clauses, id=id, cv_target=cv_target)
    core = minimal_unsat_core(instance)
    return LabeledInstance(
        instance,
        False,
        tuple(int(b) for b in core_mask(instance, core)),
        id=id,
        minimal_only=core.minimal_only,
        cv_target=cv_target,
    )


def truncate_to_cv(instance: CnfInstance, cv: float) -> CnfInstance:
    """Keep the first ceil(cv * m) clauses."""
    keep = math.ceil(cv * instance.num_vars)
    return instance.subset(range(min(keep, instance.num_clauses)))


def _pair_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def _make_pair(args) -> list[dict]:
    params, index = args
    rng = _pair_rng(params.seed, index)
    m = int(rng.integers(params.m_min, params.m_max + 1))
    sat, unsat = generate_sr_pair(m, params, rng)
    return [
        label_instance(sat, id=f"sr{m}-{index:06d}-sat").to_record(),
        label_instance(unsat, id=f"sr{m}-{index:06d}-unsat").to_record(),
    ]


def _make_cv_candidate(args) -> dict | None:
    """One truncated instance, or None when the source is shorter than the target size."""
    params, index, cv = args
    rng = _pair_rng(params.seed, index)
    m = int(rng.integers(params.m_min, params.m_max + 1))
    sat, unsat = generate_sr_pair(m, params, rng)
    # alternate members so both labels get a fair chance after truncation
    source = unsat if index % 2 == 0 else sat
    if source.num_clauses < math.ceil(cv * m):
        return None
    inst = truncate_to_cv(source, cv)
    return label_instance(inst, id=f"sr{m}-cv{cv}-{index:06d}", cv_target=cv).to_record()


def _map(fn, items: Iterable, jobs: int) -> Iterator:
    if jobs <= 1:
        yield from map(fn, items)
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield from pool.map(fn, items, chunksize=8)


def _summary(records: list[dict]) -> dict:
    buckets = Counter(f"SR({r['m']})" for r in records)
    cvs = [r["n"] / r["m"] for r in records]
    return {
        "records": len(records),
        "sat": sum(1 for r in records if r["is_sat"]),
        "unsat": sum(1 for r in records if not r["is_sat"]),
        "per_sr": dict(sorted(buckets.items(), key=lambda kv: int(kv[0][3:-1]))),
        "mean_cv": float(np.mean(cvs)) if cvs else 0.0,
        "minimal_only": sum(1 for r in records if r.get("minimal_only")),
    }


def generate_records(
    params: GenParams, count: int, cv: int | None = None, jobs: int = 1, max_attempts_factor: int = 200
) -> list[dict]:
    """``count`` SAT plus ``count`` UNSAT records.

    Without ``cv`` each pair contributes both members.  With ``cv`` the
    instances are truncated to ``ceil(cv*m)`` clauses, re-labeled, and drawn
    until ``count`` of each label have been collected.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    if cv is None:
        out: list[dict] = []
        for pair in _map(_make_pair, ((params, i) for i in range(count)), jobs):
            out.extend(pair)
        return out
    sat: list[dict] = []
    unsat: list[dict] = []
    limit = max(count, 1) * max_attempts_factor
    index = 0
    batch = max(16, jobs * 8)
    while (len(sat) < count or len(unsat) < count) and index < limit:
        todo = [(params, i, cv) for i in range(index, index + batch)]
        index += batch
        for rec in _map(_make_cv_candidate, todo, jobs):
            if rec is None:
                continue
            pool = sat if rec["is_sat"] else unsat
            if len(pool) < count:
                pool.append(rec)
    if len(sat) < count or len(unsat) < count:
        raise RuntimeError(
            f"CV={cv}: only {len(sat)} SAT / {len(unsat)} UNSAT after {index} attempts"
        )
    return [r for pair in zip(sat, unsat) for r in pair]


def write_jsonl(records: Iterable[dict], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_jsonl(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def load_dataset(path) -> list[LabeledInstance]:
    return [LabeledInstance.from_record(r) for r in read_jsonl(path)]


def generate_dataset(
    params: GenParams, count: int, out_path, cv: int | None = None, jobs: int | None = None
) -> dict:
    """Write a labeled dataset and return its summary."""
    jobs = jobs or os.cpu_count() or 1
    records = generate_records(params, count, cv=cv, jobs=jobs)
    write_jsonl(records, out_path)
    return _summary(records)
