"""Walk through the two small worked instances: parsing, core, windows, solver seeding."""

from satformer.cnf import build_lcg, parse_dimacs, var_clause_adjacency
from satformer.hier import group_members, window_count
from satformer.oracle import minimal_unsat_core, solve_exhaustive
from satformer.solver import compare_runs, init_scores

THREE_CLAUSES = "p cnf 3 3\n-1 2 0\n-2 -3 0\n1 3 0\n"
NINE_CLAUSES = """p cnf 3 9
-1 2 -3 0
2 0
-1 -2 -3 0
-1 2 3 0
1 -2 0
-1 0
1 -2 3 0
1 2 3 0
1 -3 0
"""


def main() -> None:
    small = parse_dimacs(THREE_CLAUSES)
    res = solve_exhaustive(small)
    print(f"3-clause instance: sat={res.is_sat} first model={res.witness}")
    A = var_clause_adjacency(small)
    print("adjacency (vars x clauses):\n", A.astype(int))
    print("seed scores, UNSAT branch:", init_scores(A, [0.5, 0.3, 0.2], 0.2).tolist())
    print("seed scores, SAT branch:  ", init_scores(A, [0.5, 0.3, 0.2], 0.8).tolist())

    big = parse_dimacs(NINE_CLAUSES)
    g = build_lcg(big)
    print(f"\n9-clause instance: {g.num_literals} literal nodes, {g.num_edges} edges")
    core = minimal_unsat_core(big)
    print("minimum core (1-based):", core.one_based())
    for n, w, l in [(11, 4, 1), (9, 3, 1), (9, 3, 2)]:
        print(f"windows(n={n}, w={w}, level={l}) = {window_count(n, w, l)}")
    groups = group_members(9, 3, 1)
    print("level-1 windows with w=3:", [[i + 1 for i in grp] for grp in groups])

    stats = compare_runs(big, initial=[0.0, 3.0, 0.0])
    print("\nsolver with/without seeded activity:", stats["without"]["verdict"], stats["with"]["verdict"],
          f"lemma reduction {stats['lemma_reduction_pct']:.1f}%")


if __name__ == "__main__":
    main()
