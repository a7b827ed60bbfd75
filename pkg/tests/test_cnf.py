import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from satformer.cnf import (
    CnfInstance,
    DimacsError,
    Literal,
    LiteralClauseGraph,
    build_lcg,
    literal_slot,
    parse_dimacs,
    serialize_dimacs,
    var_clause_adjacency,
)

from conftest import THREE_CLAUSES, three_clause, nine_clause


@st.composite
def instances(draw, max_vars=6, max_clauses=8):
    m = draw(st.integers(1, max_vars))
    n = draw(st.integers(0, max_clauses))
    clauses = []
    for _ in range(n):
        vars_ = draw(st.lists(st.integers(1, m), min_size=1, max_size=m, unique=True))
        signs = draw(st.lists(st.booleans(), min_size=len(vars_), max_size=len(vars_)))
        clauses.append(tuple(-v if s else v for v, s in zip(vars_, signs)))
    return CnfInstance(m, clauses)


def test_literal_pairs():
    a, b = Literal(2, False), Literal(2, True)
    assert a.is_negation_of(b) and b.is_negation_of(a)
    assert not a.is_negation_of(Literal(3, True))
    assert Literal.from_int(-4) == Literal(4, True)
    assert Literal(4, True).to_int() == -4
    with pytest.raises(ValueError):
        Literal(0, False)


def test_literal_slots():
    assert literal_slot(1) == 0 and literal_slot(-1) == 1
    assert literal_slot(3) == 4 and literal_slot(-3) == 5


def test_parse_empty_problem():
    inst = parse_dimacs("p cnf 0 0")
    assert inst.num_vars == 0 and inst.num_clauses == 0


def test_parse_three_clause():
    inst = parse_dimacs("p cnf 3 3\n-1 2 0\n-2 -3 0\n1 3 0")
    assert inst.num_vars == 3
    assert inst.clauses == tuple(THREE_CLAUSES)


def test_parse_comments_and_multiline_clause():
    inst = parse_dimacs("c hello\np cnf 2 2\nc mid\n1\n-2 0 2 0\nc tail\n")
    assert inst.clauses == ((1, -2), (2,))


@pytest.mark.parametrize(
    "text, kind",
    [
        ("1 2 0\n", "missing_header"),
        ("p cnf 2 1\np cnf 2 1\n1 0\n", "duplicate_header"),
        ("p cnf 2 1\n1 -3 0\n", "var_out_of_range"),
        ("p cnf 2 2\n1 0\n0\n", "empty_clause"),
        ("p cnf 2 2\n1 2 0\n", "clause_count"),
        ("p cnf 2 1\n1 x 0\n", "bad_token"),
        ("p cnf 2 1\n1 1 0\n", "duplicate_literal"),
        ("p cnf 2 1\n1 2\n", "unterminated_clause"),
        ("p dnf 2 1\n1 0\n", "bad_header"),
    ],
)
def test_parse_errors(text, kind):
    with pytest.raises(DimacsError) as exc:
        parse_dimacs(text)
    assert exc.value.kind == kind
    assert exc.value.line is not None


def test_var_out_of_range_reports_line():
    with pytest.raises(DimacsError) as exc:
        parse_dimacs("p cnf 2 1\n1 -3 0")
    assert exc.value.line == 2
    assert "3" in str(exc.value)


def test_serialize_empty():
    assert serialize_dimacs(CnfInstance(0, [])) == "p cnf 0 0\n"


def test_serialize_nine_clause_has_nine_clause_lines():
    lines = serialize_dimacs(nine_clause()).splitlines()
    assert lines[0] == "p cnf 3 9"
    assert len(lines) == 10 and all(l.endswith(" 0") for l in lines[1:])


@given(instances())
def test_round_trip(inst):
    again = parse_dimacs(serialize_dimacs(inst))
    assert again.num_vars == inst.num_vars and again.clauses == inst.clauses


def test_tautology_accepted():
    inst = CnfInstance(1, [(1, -1)])
    assert inst.num_clauses == 1
    A = var_clause_adjacency(inst)
    assert A.tolist() == [[True]]


def test_lcg_three_clause():
    g = build_lcg(three_clause())
    assert g.num_literals == 6 and g.num_clauses == 3
    assert g.num_edges == 6
    assert len(g.negation_pairs()) == 3
    # ¬x1 -> slot 1 in clause 0, x2 -> slot 2 in clause 0
    assert {(1, 0), (2, 0), (3, 1), (5, 1), (0, 2), (4, 2)} == g.edges()


def test_lcg_single_literal():
    g = build_lcg(CnfInstance(1, [(1,)]))
    assert (g.num_literals, g.num_clauses, g.num_edges) == (2, 1, 1)


def test_lcg_nine_clause_edges_equal_occurrences():
    inst = nine_clause()
    g = build_lcg(inst)
    assert g.num_literals == 6 and g.num_clauses == 9
    # literal occurrences: 3+1+3+3+2+1+3+3+2
    assert g.num_edges == 21 == sum(len(c) for c in inst.clauses)


@given(instances())
def test_lcg_properties(inst):
    g = build_lcg(inst)
    assert g.num_edges == sum(len(c) for c in inst.clauses)
    partner = g.negation_partner()
    assert np.array_equal(partner[partner], np.arange(g.num_literals))
    assert np.all(partner != np.arange(g.num_literals))
    expected = {(literal_slot(l), i) for i, c in enumerate(inst.clauses) for l in c}
    assert g.edges() == expected


def test_disjoint_union_offsets():
    a, b = build_lcg(three_clause()), build_lcg(nine_clause())
    u = LiteralClauseGraph.disjoint_union([a, b])
    assert u.num_literals == a.num_literals + b.num_literals
    assert u.num_clauses == 12 and u.num_edges == 27
    assert np.all(u.edge_lit[6:] >= 6) and np.all(u.edge_clause[6:] >= 3)


def test_adjacency_three_clause():
    A = var_clause_adjacency(three_clause())
    assert A.astype(int).tolist() == [[1, 0, 1], [1, 1, 0], [0, 1, 1]]


def test_adjacency_empty():
    assert var_clause_adjacency(CnfInstance(0, [])).shape == (0, 0)


@given(instances())
def test_adjacency_row_sums(inst):
    A = var_clause_adjacency(inst)
    for j in range(inst.num_vars):
        touching = sum(1 for c in inst.clauses if any(abs(l) == j + 1 for l in c))
        assert A[j].sum() == touching


def test_instance_validation():
    with pytest.raises(ValueError):
        CnfInstance(2, [()])
    with pytest.raises(ValueError):
        CnfInstance(2, [(1, 3)])
    with pytest.raises(ValueError):
        CnfInstance(2, [(2, 2)])


def test_subset_and_permuted():
    inst = nine_clause()
    sub = inst.subset([1, 4, 5])
    assert sub.clauses == ((2,), (1, -2), (-1,))
    perm = inst.permuted(list(reversed(range(9))))
    assert perm.clauses[0] == inst.clauses[8]


def test_is_satisfied_by():
    assert three_clause().is_satisfied_by([True, True, False])
    assert not three_clause().is_satisfied_by([True, False, False])
