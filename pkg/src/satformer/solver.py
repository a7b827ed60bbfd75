"""CDCL SAT solver with VSIDS branching and injectable initial activities.

Internal literal encoding matches the literal-clause graph slots:
``2*v`` is the positive literal of 0-based variable ``v`` and ``2*v + 1``
the negative one, so negation is ``lit ^ 1``.
"""

from __future__ import annotations

import heapq
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .cnf import CnfInstance

SAT, UNSAT, UNKNOWN = "SAT", "UNSAT", "UNKNOWN"

_TRUE, _FALSE, _FREE = 1, -1, 0


@dataclass(frozen=True)
class SolverConfig:
    vsids_decay: float = 0.95
    activity_bump: float = 1.0
    restart_unit: int = 64  # Luby unit, in conflicts
    phase_saving: bool = True
    conflict_limit: int | None = None
    keep_glue: int = 2  # learnt clauses with LBD <= keep_glue are never deleted
    first_reduce: int = 2000
    reduce_growth: float = 1.1
    debug: bool = False  # assert watch invariants after every propagation fixpoint
    record_learnts: bool = False

    def __post_init__(self):
        if not 0.0 < self.vsids_decay < 1.0:
            raise ValueError("vsids_decay must lie in (0, 1)")
        if self.restart_unit < 1:
            raise ValueError("restart_unit must be >= 1")


@dataclass
class SolveStats:
    decisions: int = 0
    conflicts: int = 0
    propagations: int = 0
    learnt_clauses: int = 0
    restarts: int = 0
    deleted_clauses: int = 0

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class SolveResult:
    verdict: str
    witness: tuple[bool, ...] | None = None
    stats: SolveStats = field(default_factory=SolveStats)
    learnts: list[tuple[int, ...]] | None = None  # DIMACS literals, when recorded

    def to_json(self) -> dict:
        out = {"verdict": self.verdict, "stats": self.stats.to_json()}
        if self.witness is not None:
            out["witness"] = [int(v) for v in self.witness]
        return out


def luby(i: int) -> int:
    """i-th element (1-based) of the Luby sequence 1,1,2,1,1,2,4,..."""
    k = 1
    while (1 << k) - 1 < i:
        k += 1
    while True:
        if i == (1 << k) - 1:
            return 1 << (k - 1)
        i -= (1 << (k - 1)) - 1
        k = 1
        while (1 << k) - 1 < i:
            k += 1


def init_scores(adjacency: np.ndarray, y_clause: Sequence[float], y_sat: float,
                threshold: float = 0.5) -> np.ndarray:
    """Initial activities: v_j = sum_i A[j, i] * y_i when UNSAT is predicted, else zeros."""
    adjacency = np.asarray(adjacency, dtype=bool)
    y = np.asarray(y_clause, dtype=np.float64)
    if adjacency.ndim != 2 or adjacency.shape[1] != len(y):
        raise ValueError(f"adjacency {adjacency.shape} does not match {len(y)} clause scores")
    v = np.zeros(adjacency.shape[0])
    if y_sat >= threshold:
        return v
    for j in range(adjacency.shape[0]):
        for i in range(adjacency.shape[1]):
            if adjacency[j, i]:
                v[j] += y[i]
    return v


def _to_internal(lit: int) -> int:
    return 2 * (abs(lit) - 1) + (1 if lit < 0 else 0)


def _to_dimacs(lit: int) -> int:
    v = (lit >> 1) + 1
    return -v if lit & 1 else v


class _Solver:
    def __init__(self, instance: CnfInstance, config: SolverConfig, initial: Sequence[float] | None):
        self.cfg = config
        self.nv = nv = instance.num_vars
        self.val = [_FREE] * (2 * nv)
        self.level = [0] * nv
        self.reason = [-1] * nv
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.clauses: list[list[int] | None] = []
        self.learnt_flag: list[bool] = []
        self.glue: list[int] = []
        self.watches: list[list[int]] = [[] for _ in range(2 * nv)]
        self.phase = [False] * nv
        self.seen = [False] * nv
        self.stats = SolveStats()
        self.learnt_log: list[tuple[int, ...]] | None = [] if config.record_learnts else None
        if initial is None:
            self.activity = [0.0] * nv
        else:
            init = np.asarray(initial, dtype=np.float64)
            if init.shape != (nv,) or not np.all(np.isfinite(init)) or np.any(init < 0):
                raise ValueError(f"initial scores must be {nv} finite non-negative values")
            self.activity = init.tolist()
        self.var_inc = config.activity_bump
        self.heap = [(-a, v) for v, a in enumerate(self.activity)]
        heapq.heapify(self.heap)
        self.num_learnts = 0
        self.max_learnts = float(config.first_reduce)
        self.ok = True
        self.units: list[int] = []
        for clause in instance.clauses:
            lits = [_to_internal(l) for l in clause]
            if len(lits) == 1:
                self.units.append(lits[0])
            else:
                self._attach(lits, learnt=False)

    # ------------------------------------------------------------ bookkeeping

    def _attach(self, lits: list[int], learnt: bool, glue: int = 0) -> int:
        ci = len(self.clauses)
        self.clauses.append(lits)
        self.learnt_flag.append(learnt)
        self.glue.append(glue)
        self.watches[lits[0]].append(ci)
        self.watches[lits[1]].append(ci)
        return ci

    def _decision_level(self) -> int:
        return len(self.trail_lim)

    def _assign(self, lit: int, reason: int) -> None:
        v = lit >> 1
        self.val[lit] = _TRUE
        self.val[lit ^ 1] = _FALSE
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(lit)

    def _backtrack(self, target: int) -> None:
        if len(self.trail_lim) <= target:
            return
        stop = self.trail_lim[target]
        for k in range(len(self.trail) - 1, stop - 1, -1):
            lit = self.trail[k]
            v = lit >> 1
            self.val[lit] = _FREE
            self.val[lit ^ 1] = _FREE
            self.reason[v] = -1
            if self.cfg.phase_saving:
                self.phase[v] = not (lit & 1)
            heapq.heappush(self.heap, (-self.activity[v], v))
        del self.trail[stop:]
        del self.trail_lim[target:]
        self.qhead = len(self.trail)

    # ------------------------------------------------------------ propagation

    def _propagate(self) -> int:
        """Unit propagation; returns a conflicting clause index or -1."""
        val = self.val
        clauses = self.clauses
        watches = self.watches
        while self.qhead < len(self.trail):
            p = self.trail[self.qhead]
            self.qhead += 1
            self.stats.propagations += 1
            false_lit = p ^ 1
            ws = watches[false_lit]
            i = j = 0
            n_ws = len(ws)
            while i < n_ws:
                ci = ws[i]
                i += 1
                c = clauses[ci]
                if c is None:
                    continue
                if c[0] == false_lit:
                    c[0], c[1] = c[1], false_lit
                first = c[0]
                if val[first] == _TRUE:
                    ws[j] = ci
                    j += 1
                    continue
                for k in range(2, len(c)):
                    if val[c[k]] != _FALSE:
                        c[1], c[k] = c[k], false_lit
                        watches[c[1]].append(ci)
                        break
                else:
                    ws[j] = ci
                    j += 1
                    if val[first] == _FALSE:
                        while i < n_ws:
                            ws[j] = ws[i]
                            j += 1
                            i += 1
                        del ws[j:]
                        return ci
                    self._assign(first, ci)
            del ws[j:]
        return -1

    def _check_watches(self) -> None:
        for ci, c in enumerate(self.clauses):
            if c is None:
                continue
            vals = [self.val[l] for l in c]
            # at a fixpoint every clause is satisfied or still has two free literals
            assert _TRUE in vals or vals.count(_FREE) >= 2, (
                f"clause {ci} is unit or falsified after propagation: {c} {vals}"
            )

    # ------------------------------------------------------------ VSIDS

    def _bump(self, v: int) -> None:
        self.activity[v] += self.var_inc
        if self.activity[v] > 1e100:
            self.activity = [a * 1e-100 for a in self.activity]
            self.var_inc *= 1e-100
            self.heap = [(-self.activity[u], u) for u in range(self.nv) if self.val[2 * u] == _FREE]
            heapq.heapify(self.heap)
        elif self.val[2 * v] == _FREE:
            heapq.heappush(self.heap, (-self.activity[v], v))

    def _decay(self) -> None:
        self.var_inc /= self.cfg.vsids_decay

    def _pick_branch(self) -> int:
        heap = self.heap
        while heap:
            neg_act, v = heapq.heappop(heap)
            if self.val[2 * v] != _FREE or -neg_act != self.activity[v]:
                continue
            return 2 * v + (0 if self.phase[v] else 1)
        return -1

    # ------------------------------------------------------------ conflict analysis

    def _analyze(self, confl: int) -> tuple[list[int], int]:
        seen = self.seen
        level = self.level
        current = self._decision_level()
        learnt = [-1]
        path = 0
        p = -1
        idx = len(self.trail) - 1
        clause = self.clauses[confl]
        start = 0
        while True:
            for q in clause[start:]:
                v = q >> 1
                if not seen[v] and level[v] > 0:
                    self._bump(v)
                    seen[v] = True
                    if level[v] >= current:
                        path += 1
                    else:
                        learnt.append(q)
            while not seen[self.trail[idx] >> 1]:
                idx -= 1
            p = self.trail[idx]
            idx -= 1
            v = p >> 1
            seen[v] = False
            path -= 1
            if path == 0:
                break
            clause = self.clauses[self.reason[v]]
            start = 1
        learnt[0] = p ^ 1
        for q in learnt[1:]:
            seen[q >> 1] = False
        if len(learnt) == 1:
            return learnt, 0
        best = max(range(1, len(learnt)), key=lambda k: level[learnt[k] >> 1])
        learnt[1], learnt[best] = learnt[best], learnt[1]
        return learnt, level[learnt[1] >> 1]

    def _lbd(self, lits: Sequence[int]) -> int:
        return len({self.level[l >> 1] for l in lits})

    def _reduce_db(self) -> None:
        candidates = []
        for ci, c in enumerate(self.clauses):
            if c is None or not self.learnt_flag[ci] or self.glue[ci] <= self.cfg.keep_glue:
                continue
            v = c[0] >> 1
            if self.reason[v] == ci and self.val[c[0]] == _TRUE:
                continue  # locked
            candidates.append(ci)
        candidates.sort(key=lambda ci: (-self.glue[ci], -len(self.clauses[ci]), ci))
        doomed = set(candidates[: len(candidates) // 2])
        for ci in doomed:
            self.clauses[ci] = None
        for lit in range(2 * self.nv):
            self.watches[lit] = [ci for ci in self.watches[lit] if ci not in doomed]
        self.num_learnts -= len(doomed)
        self.stats.deleted_clauses += len(doomed)

    # ------------------------------------------------------------ main loop

    def solve(self) -> SolveResult:
        for lit in self.units:
            if self.val[lit] == _FALSE:
                return self._result(UNSAT)
            if self.val[lit] == _FREE:
                self._assign(lit, -1)
        if self._propagate() >= 0:
            return self._result(UNSAT)
        restart_index = 1
        budget = luby(restart_index) * self.cfg.restart_unit
        since_restart = 0
        limit = self.cfg.conflict_limit
        while True:
            confl = self._propagate()
            if confl >= 0:
                self.stats.conflicts += 1
                since_restart += 1
                if self._decision_level() == 0:
                    return self._result(UNSAT)
                learnt, back = self._analyze(confl)
                self._backtrack(back)
                self.stats.learnt_clauses += 1
                if self.learnt_log is not None:
                    self.learnt_log.append(tuple(_to_dimacs(l) for l in learnt))
                if len(learnt) == 1:
                    self._assign(learnt[0], -1)
                else:
                    ci = self._attach(learnt, learnt=True, glue=self._lbd(learnt))
                    self.num_learnts += 1
                    self._assign(learnt[0], ci)
                self._decay()
                if limit is not None and self.stats.conflicts >= limit:
                    return self._result(UNKNOWN)
                continue
            if self.cfg.debug:
                self._check_watches()
            if since_restart >= budget:
                self.stats.restarts += 1
                restart_index += 1
                budget = luby(restart_index) * self.cfg.restart_unit
                since_restart = 0
                self._backtrack(0)
                continue
            if self.num_learnts >= self.max_learnts:
                self._reduce_db()
                self.max_learnts *= self.cfg.reduce_growth
            lit = self._pick_branch()
            if lit < 0:
                return self._result(SAT)
            self.stats.decisions += 1
            self.trail_lim.append(len(self.trail))
            self._assign(lit, -1)

    def _result(self, verdict: str) -> SolveResult:
        witness = None
        if verdict == SAT:
            witness = tuple(self.val[2 * v] == _TRUE for v in range(self.nv))
        return SolveResult(verdict, witness, self.stats, self.learnt_log)


def solve(instance: CnfInstance, config: SolverConfig | None = None,
          initial: Sequence[float] | None = None) -> SolveResult:
    """Complete CDCL search.  ``initial`` seeds the VSIDS activities verbatim."""
    result = _Solver(instance, config or SolverConfig(), initial).solve()
    if result.verdict == SAT and not instance.is_satisfied_by(result.witness):
        raise AssertionError("solver produced a witness that violates a clause")
    return result


def _reduction(before: float, after: float) -> float:
    return 0.0 if before == 0 else (before - after) / before * 100.0


def compare_runs(instance: CnfInstance, config: SolverConfig | None = None,
                 initial: Sequence[float] | None = None) -> dict:
    """Solve without and with initial activities; report both stats and the reductions."""
    base = solve(instance, config, None)
    guided = solve(instance, config, initial)
    return {
        "without": base.to_json(),
        "with": guided.to_json(),
        "lemma_reduction_pct": _reduction(base.stats.learnt_clauses, guided.stats.learnt_clauses),
        "decision_reduction_pct": _reduction(base.stats.decisions, guided.stats.decisions),
        "same_verdict": base.verdict == guided.verdict,
    }
