"""CNF data model, DIMACS I/O and the literal-clause graph.

Clauses are stored as tuples of signed DIMACS integers (``-3`` is the
negation of variable 3).  Literal slots in the graph follow the layout
``2*(var-1)`` for the positive literal and ``2*(var-1)+1`` for the negative
one, so the negation partner of slot ``s`` is ``s ^ 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class DimacsError(ValueError):
    """Malformed DIMACS input.  ``kind`` names the failure, ``line`` is 1-based."""

    def __init__(self, kind: str, message: str, line: int | None = None):
        self.kind = kind
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


@dataclass(frozen=True)
class Literal:
    var: int
    negated: bool = False

    def __post_init__(self):
        if self.var < 1:
            raise ValueError(f"variable index must be >= 1, got {self.var}")

    @classmethod
    def from_int(cls, lit: int) -> "Literal":
        return cls(abs(lit), lit < 0)

    def to_int(self) -> int:
        return -self.var if self.negated else self.var

    def negation(self) -> "Literal":
        return Literal(self.var, not self.negated)

    def is_negation_of(self, other: "Literal") -> bool:
        return self.var == other.var and self.negated != other.negated


def literal_slot(lit: int) -> int:
    """Graph slot of a signed literal."""
    return 2 * (abs(lit) - 1) + (1 if lit < 0 else 0)


def _check_clause(clause: Sequence[int], num_vars: int, index: int) -> tuple[int, ...]:
    if len(clause) == 0:
        raise ValueError(f"clause {index + 1} is empty")
    seen = set()
    for lit in clause:
        if lit == 0:
            raise ValueError(f"clause {index + 1} contains literal 0")
        if abs(lit) > num_vars:
            raise ValueError(f"clause {index + 1}: variable {abs(lit)} exceeds num_vars={num_vars}")
        if lit in seen:
            raise ValueError(f"clause {index + 1}: duplicate literal {lit}")
        seen.add(lit)
    return tuple(int(x) for x in clause)


@dataclass(frozen=True)
class CnfInstance:
    num_vars: int
    clauses: tuple[tuple[int, ...], ...]

    def __init__(self, num_vars: int, clauses: Iterable[Sequence[int]] = ()):
        if num_vars < 0:
            raise ValueError("num_vars must be >= 0")
        checked = tuple(_check_clause(c, num_vars, i) for i, c in enumerate(clauses))
        object.__setattr__(self, "num_vars", int(num_vars))
        object.__setattr__(self, "clauses", checked)

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)

    def literals(self, i: int) -> list[Literal]:
        return [Literal.from_int(x) for x in self.clauses[i]]

    def subset(self, indices: Iterable[int]) -> "CnfInstance":
        """Sub-instance keeping the clauses at ``indices`` (0-based), same variables."""
        return CnfInstance(self.num_vars, [self.clauses[i] for i in indices])

    def permuted(self, order: Sequence[int]) -> "CnfInstance":
        """Instance whose clause ``k`` is ``self.clauses[order[k]]``."""
        return self.subset(order)

    def is_satisfied_by(self, assignment: Sequence[bool]) -> bool:
        """``assignment[j]`` is the value of variable ``j+1``."""
        for clause in self.clauses:
            if not any(assignment[abs(l) - 1] == (l > 0) for l in clause):
                return False
        return True


def parse_dimacs(text: str) -> CnfInstance:
    """Parse DIMACS CNF text.

    Raises DimacsError with ``kind`` one of ``missing_header``,
    ``duplicate_header``, ``bad_header``, ``bad_token``, ``var_out_of_range``,
    ``empty_clause``, ``duplicate_literal``, ``clause_count`` or
    ``unterminated_clause``.
    """
    num_vars = None
    declared = None
    header_line = None
    last_line = 0
    clauses: list[tuple[int, ...]] = []
    current: list[int] = []
    current_start = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        last_line = lineno
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            if num_vars is not None:
                raise DimacsError("duplicate_header", "second 'p cnf' header", lineno)
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise DimacsError("bad_header", f"expected 'p cnf <vars> <clauses>', got {line!r}", lineno)
            try:
                num_vars, declared = int(parts[2]), int(parts[3])
            except ValueError:
                raise DimacsError("bad_header", f"non-integer header field in {line!r}", lineno) from None
            if num_vars < 0 or declared < 0:
                raise DimacsError("bad_header", "negative header field", lineno)
            header_line = lineno
            continue
        if num_vars is None:
            raise DimacsError("missing_header", "clause data before 'p cnf' header", lineno)
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise DimacsError("bad_token", f"non-integer token {tok!r}", lineno) from None
            if current_start is None:
                current_start = lineno
            if lit == 0:
                if not current:
                    raise DimacsError("empty_clause", "empty clause", lineno)
                clauses.append(tuple(current))
                current = []
                current_start = None
                continue
            if abs(lit) > num_vars:
                raise DimacsError(
                    "var_out_of_range",
                    f"variable {abs(lit)} exceeds declared {num_vars}",
                    lineno,
                )
            if lit in current:
                raise DimacsError("duplicate_literal", f"duplicate literal {lit} in clause", lineno)
            current.append(lit)
    if num_vars is None:
        raise DimacsError("missing_header", "no 'p cnf' header found", max(last_line, 1))
    if current:
        raise DimacsError("unterminated_clause", "last clause is not 0-terminated", current_start)
    if len(clauses) != declared:
        raise DimacsError(
            "clause_count", f"header declares {declared} clauses, found {len(clauses)}", header_line
        )
    return CnfInstance(num_vars, clauses)


def read_dimacs(path) -> CnfInstance:
    with open(path, encoding="ascii") as fh:
        return parse_dimacs(fh.read())


def serialize_dimacs(instance: CnfInstance) -> str:
    lines = [f"p cnf {instance.num_vars} {instance.num_clauses}"]
    lines.extend(" ".join(map(str, c)) + " 0" for c in instance.clauses)
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class LiteralClauseGraph:
    """Bipartite literal/clause graph.

    ``edge_lit[e]`` and ``edge_clause[e]`` give the literal slot and clause
    index of edge ``e``; edges are listed clause by clause in literal order.
    Negation pairs are implicit: slot ``s`` pairs with ``s ^ 1``.
    """

    num_vars: int
    num_clauses: int
    edge_lit: np.ndarray
    edge_clause: np.ndarray

    @property
    def num_literals(self) -> int:
        return 2 * self.num_vars

    @property
    def num_edges(self) -> int:
        return len(self.edge_lit)

    def negation_partner(self) -> np.ndarray:
        return np.arange(self.num_literals) ^ 1

    def negation_pairs(self) -> list[tuple[int, int]]:
        return [(2 * j, 2 * j + 1) for j in range(self.num_vars)]

    def edges(self) -> set[tuple[int, int]]:
        return set(zip(self.edge_lit.tolist(), self.edge_clause.tolist()))

    @staticmethod
    def disjoint_union(graphs: Sequence["LiteralClauseGraph"]) -> "LiteralClauseGraph":
        """Stack graphs side by side; literal/clause blocks keep input order."""
        lits, cls = [], []
        lit_off = cl_off = 0
        for g in graphs:
            lits.append(g.edge_lit + lit_off)
            cls.append(g.edge_clause + cl_off)
            lit_off += g.num_literals
            cl_off += g.num_clauses
        empty = np.zeros(0, dtype=np.int64)
        return LiteralClauseGraph(
            num_vars=lit_off // 2,
            num_clauses=cl_off,
            edge_lit=np.concatenate(lits) if lits else empty,
            edge_clause=np.concatenate(cls) if cls else empty,
        )


def build_lcg(instance: CnfInstance) -> LiteralClauseGraph:
    edge_lit = [literal_slot(l) for c in instance.clauses for l in c]
    edge_clause = [i for i, c in enumerate(instance.clauses) for _ in c]
    return LiteralClauseGraph(
        num_vars=instance.num_vars,
        num_clauses=instance.num_clauses,
        edge_lit=np.asarray(edge_lit, dtype=np.int64),
        edge_clause=np.asarray(edge_clause, dtype=np.int64),
    )


def var_clause_adjacency(instance: CnfInstance) -> np.ndarray:
    """Boolean ``num_vars x num_clauses`` occurrence matrix (polarity ignored)."""
    adj = np.zeros((instance.num_vars, instance.num_clauses), dtype=bool)
    for i, clause in enumerate(instance.clauses):
        for lit in clause:
            adj[abs(lit) - 1, i] = True
    return adj
