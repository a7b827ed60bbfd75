import numpy as np
import pytest

from satformer import autodiff as ad
from satformer.autodiff import ParamStore
from satformer.cnf import CnfInstance, build_lcg
from satformer.gnn import EncoderConfig, encode, init_encoder

from conftest import three_clause, nine_clause


def _store(d=8, seed=0):
    s = ParamStore()
    init_encoder(s, EncoderConfig(d, 3), np.random.default_rng(seed))
    return s


def run(inst, store, d=8, T=3):
    with ad.no_tape():
        out = encode(build_lcg(inst), store, EncoderConfig(d, T))
    return out.literal_states.data, out.clause_states.data


def test_shapes():
    lit, h0 = run(three_clause(), _store())
    assert lit.shape == (6, 8) and h0.shape == (3, 8)


def test_zero_iterations_rejected():
    with pytest.raises(ValueError):
        EncoderConfig(8, 0)
    with pytest.raises(ValueError):
        EncoderConfig(0, 2)


def test_one_iteration_changes_states():
    s = _store()
    lit, h0 = run(three_clause(), s, T=1)
    assert not np.allclose(h0, s["enc.C_init"].data)


def test_param_names():
    names = list(_store())
    assert names[:2] == ["enc.L_init", "enc.C_init"]
    assert all(n.startswith("enc.") for n in names)


def test_clause_permutation_equivariance():
    s = _store()
    inst = nine_clause()
    perm = np.random.default_rng(1).permutation(inst.num_clauses)
    lit_a, h_a = run(inst, s)
    lit_b, h_b = run(inst.permuted(perm), s)
    assert np.allclose(h_b, h_a[perm], rtol=0, atol=1e-12)
    assert np.allclose(lit_b, lit_a, rtol=0, atol=1e-12)


def test_variable_renaming_invariance():
    s = _store()
    inst = nine_clause()
    rename = {1: 3, 2: 1, 3: 2}
    renamed = CnfInstance(3, [tuple((1 if l > 0 else -1) * rename[abs(l)] for l in c) for c in inst.clauses])
    lit_a, h_a = run(inst, s)
    lit_b, h_b = run(renamed, s)
    assert np.allclose(h_a, h_b, rtol=0, atol=1e-12)
    for v, w in rename.items():
        for sign in (0, 1):
            assert np.allclose(lit_a[2 * (v - 1) + sign], lit_b[2 * (w - 1) + sign], atol=1e-12)


def test_outputs_finite_for_many_rounds():
    d = 16
    s = ParamStore()
    init_encoder(s, EncoderConfig(d, 32), np.random.default_rng(2))
    lit, h0 = run(nine_clause(), s, d=d, T=32)
    assert np.isfinite(lit).all() and np.isfinite(h0).all()


def test_deterministic():
    s = _store()
    a = run(nine_clause(), s)
    b = run(nine_clause(), s)
    assert np.array_equal(a[1], b[1])
