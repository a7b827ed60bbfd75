import hashlib
import json

import numpy as np
import pytest

from satformer.cnf import CnfInstance, parse_dimacs
from satformer.generate import (
    GenParams,
    LabeledInstance,
    compute_cv,
    generate_dataset,
    generate_records,
    generate_sr_pair,
    label_instance,
    load_dataset,
    read_jsonl,
    sample_clause,
    truncate_to_cv,
)
from satformer.oracle import minimal_unsat_core, solve_exhaustive

from conftest import three_clause, nine_clause


def test_params_validation():
    with pytest.raises(ValueError):
        GenParams(m_min=0)
    with pytest.raises(ValueError):
        GenParams(m_min=5, m_max=4)
    with pytest.raises(ValueError):
        GenParams(p_bernoulli=1.0)


def test_clause_sampling_properties():
    rng = np.random.default_rng(0)
    lengths = []
    for _ in range(4000):
        c = sample_clause(10, GenParams(), rng)
        assert len({abs(l) for l in c}) == len(c)
        assert all(1 <= abs(l) <= 10 for l in c)
        lengths.append(len(c))
    # 2 + Bernoulli(0.3) + failures-before-success of Geometric(0.4): mean 2 + 0.3 + 1.5
    assert abs(np.mean(lengths) - 3.8) < 0.1
    assert min(lengths) == 2


def test_clause_length_capped_at_m():
    rng = np.random.default_rng(1)
    assert all(len(sample_clause(3, GenParams(), rng)) <= 3 for _ in range(500))


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_pair_differs_in_one_polarity(seed):
    rng = np.random.default_rng(seed)
    sat, unsat = generate_sr_pair(3, GenParams(3, 3), rng)
    assert sat.num_vars == unsat.num_vars == 3
    assert sat.num_clauses == unsat.num_clauses
    assert sat.clauses[:-1] == unsat.clauses[:-1]
    diffs = [(a, b) for a, b in zip(sat.clauses[-1], unsat.clauses[-1]) if a != b]
    assert len(diffs) == 1 and diffs[0][0] == -diffs[0][1]
    assert solve_exhaustive(sat).is_sat
    assert not solve_exhaustive(unsat).is_sat


def test_compute_cv():
    assert compute_cv(three_clause()) == 1.0
    assert compute_cv(nine_clause()) == 3.0
    assert compute_cv(CnfInstance(5, [])) == 0.0
    with pytest.raises(ValueError):
        compute_cv(CnfInstance(0, []))


def test_label_instance():
    rec = label_instance(nine_clause(), id="nine_clause")
    assert not rec.is_sat and rec.core_mask == (0, 1, 0, 0, 1, 1, 0, 0, 0)
    rec = label_instance(three_clause())
    assert rec.is_sat and rec.core_mask == (0, 0, 0)


def test_labeled_instance_invariants():
    with pytest.raises(ValueError):
        LabeledInstance(three_clause(), True, (1, 0, 0))
    with pytest.raises(ValueError):
        LabeledInstance(nine_clause(), False, (0,) * 9)
    with pytest.raises(ValueError):
        LabeledInstance(three_clause(), True, (0, 0))


def test_record_round_trip():
    rec = label_instance(nine_clause(), id="x")
    back = LabeledInstance.from_record(json.loads(json.dumps(rec.to_record())))
    assert back == rec


def test_truncate_to_cv():
    inst = nine_clause()
    cut = truncate_to_cv(inst, 2)
    assert cut.num_clauses == 6 and cut.clauses == inst.clauses[:6]


def _sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_dataset_counts_and_determinism(tmp_path):
    params = GenParams(3, 5, seed=1)
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    summary = generate_dataset(params, 10, a, jobs=1)
    generate_dataset(params, 10, b, jobs=2)
    assert _sha(a) == _sha(b)
    assert summary["sat"] == summary["unsat"] == 10
    records = read_jsonl(a)
    assert len(records) == 20
    assert summary["mean_cv"] == pytest.approx(np.mean([r["n"] / r["m"] for r in records]))
    assert sum(summary["per_sr"].values()) == 20
    for r in records:
        if not r["is_sat"]:
            assert sum(r["core_mask"]) >= 1
        else:
            assert not any(r["core_mask"])


def test_labels_reverify():
    records = generate_records(GenParams(3, 8, seed=4), 50)
    assert len(records) == 100
    for r in records:
        inst = parse_dimacs(r["dimacs"])
        assert solve_exhaustive(inst).is_sat == r["is_sat"]
        if not r["is_sat"]:
            core = [i for i, b in enumerate(r["core_mask"]) if b]
            assert not solve_exhaustive(inst.subset(core)).is_sat
            if not r.get("minimal_only"):
                assert len(core) == minimal_unsat_core(inst).size


def test_cv_dataset_is_balanced(tmp_path):
    path = tmp_path / "cv.jsonl"
    summary = generate_dataset(GenParams(3, 6, seed=2), 8, path, cv=3, jobs=1)
    assert summary["sat"] == summary["unsat"] == 8
    for rec in load_dataset(path):
        assert rec.cv_target == 3
        assert rec.n == 3 * rec.m


def test_permuted_labels_stay_valid():
    rng = np.random.default_rng(9)
    records = [LabeledInstance.from_record(r) for r in generate_records(GenParams(3, 6, seed=9), 10)]
    for rec in records:
        perm = rng.permutation(rec.n)
        inst = rec.instance.permuted(perm)
        mask = np.asarray(rec.core_mask)[perm]
        assert solve_exhaustive(inst).is_sat == rec.is_sat
        if not rec.is_sat:
            assert not solve_exhaustive(inst.subset(np.flatnonzero(mask))).is_sat
