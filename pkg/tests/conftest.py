import pytest

from satformer.cnf import CnfInstance

# (¬x1 ∨ x2) ∧ (¬x2 ∨ ¬x3) ∧ (x1 ∨ x3)
THREE_CLAUSES = [(-1, 2), (-2, -3), (1, 3)]

# nine-clause UNSAT instance; its smallest core is C2, C5, C6
NINE_CLAUSES = [
    (-1, 2, -3),
    (2,),
    (-1, -2, -3),
    (-1, 2, 3),
    (1, -2),
    (-1,),
    (1, -2, 3),
    (1, 2, 3),
    (1, -3),
]

# the same nine clauses reordered so that C6 lands in the last window of size 3
SHUFFLED_ORDER = [1, 2, 3, 4, 5, 9, 7, 8, 6]  # 1-based labels of the original clauses


def three_clause() -> CnfInstance:
    return CnfInstance(3, THREE_CLAUSES)


def nine_clause() -> CnfInstance:
    return CnfInstance(3, NINE_CLAUSES)


def shuffled_nine() -> CnfInstance:
    return CnfInstance(3, [NINE_CLAUSES[i - 1] for i in SHUFFLED_ORDER])


@pytest.fixture
def three_clause_instance():
    return three_clause()


@pytest.fixture
def nine_clause_instance():
    return nine_clause()


# acceptance criteria append (label, passed, detail) here; printed after the run
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: int(r[0].split()[1])):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
