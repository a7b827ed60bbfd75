"""Ground-truth satisfiability and minimal unsatisfiable cores.

Up to ``TRUTH_TABLE_MAX_VARS`` variables every clause is compiled into a
Python-int bitset over all ``2**m`` assignments, which makes both solving
and subset checks a handful of big-int ANDs.  Above that a complete DPLL
with unit propagation is used.

Assignment ``a`` (an integer in ``[0, 2**m)``) sets ``x_j`` False iff bit
``m - j`` of ``a`` is set, so ``a = 0`` is all-True and ascending ``a`` is
lexicographic order with True before False and ``x_1`` most significant.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .cnf import CnfInstance

TRUTH_TABLE_MAX_VARS = 16
DEFAULT_MAX_VARS = 26
ENUMERATION_MAX_CLAUSES = 20


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class OracleVerdict:
    is_sat: bool
    witness: tuple[bool, ...] | None = None


@dataclass(frozen=True)
class CoreResult:
    core_indices: tuple[int, ...]  # 0-based, sorted
    minimal_only: bool = False  # True when deletion-based (irreducible, maybe not smallest)

    @property
    def size(self) -> int:
        return len(self.core_indices)

    def one_based(self) -> list[int]:
        return [i + 1 for i in self.core_indices]


def _var_masks(m: int) -> list[int]:
    """``masks[j]`` = set of assignments where ``x_{j+1}`` is True."""
    masks = []
    for j in range(m):
        # x_j is True where bit (m-1-j) of the assignment index is clear:
        # runs of `block` ones then `block` zeros, repeated
        block = 1 << (m - 1 - j)
        mask, width = (1 << block) - 1, 2 * block
        while width < (1 << m):
            mask |= mask << width
            width *= 2
        masks.append(mask)
    return masks


class TruthTable:
    """Clause satisfaction sets for an instance with few variables."""

    def __init__(self, instance: CnfInstance):
        m = instance.num_vars
        if m > TRUTH_TABLE_MAX_VARS:
            raise OracleError(f"truth table limited to {TRUTH_TABLE_MAX_VARS} variables, got {m}")
        self.num_vars = m
        self.full = (1 << (1 << m)) - 1
        masks = _var_masks(m)
        self.clause_sets = []
        for clause in instance.clauses:
            s = 0
            for lit in clause:
                vm = masks[abs(lit) - 1]
                s |= vm if lit > 0 else (self.full ^ vm)
            self.clause_sets.append(s)

    def models(self, indices: Sequence[int] | None = None) -> int:
        sets = self.clause_sets if indices is None else [self.clause_sets[i] for i in indices]
        return reduce(lambda a, b: a & b, sets, self.full)

    def is_sat(self, indices: Sequence[int] | None = None) -> bool:
        return self.models(indices) != 0

    def first_model(self, indices: Sequence[int] | None = None) -> tuple[bool, ...] | None:
        sol = self.models(indices)
        if sol == 0:
            return None
        a = (sol & -sol).bit_length() - 1
        m = self.num_vars
        return tuple(not (a >> (m - 1 - j)) & 1 for j in range(m))


def _dpll(num_vars: int, clauses: Sequence[Sequence[int]]) -> list[bool] | None:
    """Complete DPLL with unit propagation; returns a model or None."""
    assign: dict[int, bool] = {}

    def value(lit):
        v = assign.get(abs(lit))
        if v is None:
            return None
        return v if lit > 0 else not v

    def propagate(trail):
        changed = True
        while changed:
            changed = False
            for clause in clauses:
                unassigned = None
                n_free = 0
                sat = False
                for lit in clause:
                    val = value(lit)
                    if val is True:
                        sat = True
                        break
                    if val is None:
                        n_free += 1
                        unassigned = lit
                if sat:
                    continue
                if n_free == 0:
                    return False
                if n_free == 1:
                    assign[abs(unassigned)] = unassigned > 0
                    trail.append(abs(unassigned))
                    changed = True
        return True

    def search():
        trail: list[int] = []
        if not propagate(trail):
            for v in trail:
                del assign[v]
            return False
        # branch on the most frequent unassigned variable in unsatisfied clauses
        counts: dict[int, int] = {}
        for clause in clauses:
            if any(value(l) is True for l in clause):
                continue
            for lit in clause:
                if abs(lit) not in assign:
                    counts[abs(lit)] = counts.get(abs(lit), 0) + 1
        if not counts:
            return True
        var = max(counts, key=lambda v: (counts[v], -v))
        for val in (True, False):
            assign[var] = val
            if search():
                return True
            del assign[var]
        for v in trail:
            del assign[v]
        return False

    if not search():
        return None
    return [assign.get(j, True) for j in range(1, num_vars + 1)]


def solve_exhaustive(instance: CnfInstance, max_vars: int = DEFAULT_MAX_VARS) -> OracleVerdict:
    m = instance.num_vars
    if m > max_vars:
        raise OracleError(f"instance has {m} variables, oracle cap is {max_vars}")
    if m <= TRUTH_TABLE_MAX_VARS:
        witness = TruthTable(instance).first_model()
    else:
        model = _dpll(m, instance.clauses)
        witness = None if model is None else tuple(model)
    if witness is None:
        return OracleVerdict(False, None)
    return OracleVerdict(True, witness)


class _SubsetChecker:
    def __init__(self, instance: CnfInstance, max_vars: int):
        if instance.num_vars > max_vars:
            raise OracleError(f"instance has {instance.num_vars} variables, oracle cap is {max_vars}")
        self.instance = instance
        self.table = TruthTable(instance) if instance.num_vars <= TRUTH_TABLE_MAX_VARS else None

    def is_sat(self, indices: Sequence[int]) -> bool:
        if self.table is not None:
            return self.table.is_sat(indices)
        return _dpll(self.instance.num_vars, [self.instance.clauses[i] for i in indices]) is not None


def _smallest_core_enumeration(table: TruthTable, n: int) -> tuple[int, ...]:
    sets = table.clause_sets
    full = table.full

    for size in range(1, n + 1):
        # lexicographic DFS with prefix intersections
        stack = [(0, full, ())]
        while stack:
            start, acc, chosen = stack.pop()
            if len(chosen) == size:
                if acc == 0:
                    return chosen
                continue
            remaining = size - len(chosen)
            # push in reverse so the smallest index is explored first
            for i in range(n - remaining, start - 1, -1):
                stack.append((i + 1, acc & sets[i], chosen + (i,)))
    raise OracleError("instance is satisfiable")  # unreachable when UNSAT


def _smallest_core_generic(checker: _SubsetChecker, n: int) -> tuple[int, ...]:
    for size in range(1, n + 1):
        for combo in itertools.combinations(range(n), size):
            if not checker.is_sat(combo):
                return combo
    raise OracleError("instance is satisfiable")


def deletion_minimize(checker: _SubsetChecker, indices: Sequence[int]) -> tuple[int, ...]:
    """Drop clauses (ascending) whose removal keeps the set UNSAT."""
    core = list(indices)
    i = 0
    while i < len(core):
        trial = core[:i] + core[i + 1:]
        if not checker.is_sat(trial):
            core = trial
        else:
            i += 1
    return tuple(core)


def minimal_unsat_core(
    instance: CnfInstance,
    max_vars: int = DEFAULT_MAX_VARS,
    enumeration_max_clauses: int = ENUMERATION_MAX_CLAUSES,
) -> CoreResult:
    """Smallest unsatisfiable clause subset.

    For ``n <= enumeration_max_clauses`` subsets are tried by increasing size
    and then lexicographically, so the result is a minimum-cardinality core
    with the lexicographically smallest index tuple.  Larger instances fall
    back to deletion-based minimization and set ``minimal_only``.
    """
    checker = _SubsetChecker(instance, max_vars)
    n = instance.num_clauses
    if checker.is_sat(range(n)):
        raise OracleError("instance is satisfiable; it has no UNSAT core")
    if n <= enumeration_max_clauses:
        if checker.table is not None:
            core = _smallest_core_enumeration(checker.table, n)
        else:
            core = _smallest_core_generic(checker, n)
        return CoreResult(tuple(sorted(core)), minimal_only=False)
    core = deletion_minimize(checker, range(n))
    return CoreResult(tuple(sorted(core)), minimal_only=True)


def core_mask(instance: CnfInstance, core: CoreResult | None) -> np.ndarray:
    """0/1 vector over clauses; ``core=None`` means SAT (all zeros)."""
    mask = np.zeros(instance.num_clauses, dtype=np.int64)
    if core is None:
        return mask
    for i in core.core_indices:
        if not 0 <= i < instance.num_clauses:
            raise IndexError(f"core index {i} out of range for {instance.num_clauses} clauses")
        mask[i] = 1
    return mask
