import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import binary
from twoweight import lp_norm, maximal, mixed_norm_of_Talpha, random_instance
from twoweight.operators import cell_averages
from twoweight.prooftools import (
    chain_certificate,
    chain_constant,
    doob_check,
    level_sets,
    reduction_compare,
    rubio_majorant,
)


def test_chain_constant_formula():
    assert chain_constant(2.0) == pytest.approx(16 * 4 / 3)
    p = 1.5
    assert chain_constant(p) == pytest.approx(2 ** 3 * 3 ** 1.5 / (2 ** 1.5 - 1))


def test_level_sets_of_constant():
    inst = binary(2)
    ls = level_sets(inst, np.ones(4))
    assert list(ls.thresholds) == [-1]
    assert ls.sets.all()
    assert ls.maximal_cells[-1] == [1]
    assert ls.leaves_of(0, inst.lattice) == []


def test_level_sets_of_indicator():
    inst = binary(2)
    ls = level_sets(inst, inst.indicator(2))
    # M f is 1 on the left half and 1/2 on the right half
    assert set(ls.leaves_of(-1, inst.lattice)) == {4, 5}
    assert ls.maximal_cells[-1] == [2]
    assert set(ls.leaves_of(-2, inst.lattice)) == {4, 5, 6, 7}


@pytest.mark.parametrize("seed", [17, 18, 19])
def test_level_sets_match_thresholded_maximal_function(seed):
    inst = random_instance(seed, depth=4, repeat_fraction=0.2)
    f = np.random.default_rng(seed).random(inst.lattice.n_leaves) * 10
    ls = level_sets(inst, f)
    M = oracles.maximal(inst, inst.function_dict(f))
    sets = oracles.leaf_sets(inst)
    mu = oracles.weight_dict(inst, "mu")
    for k in ls.thresholds:
        k = int(k)
        expected = {x for x in inst.lattice.leaves if M[x] > 2.0 ** k}
        assert set(ls.leaves_of(k, inst.lattice)) == expected
        # maximal cells: disjoint, inside E_k, covering it
        covered = [x for c in ls.maximal_cells[k] for x in sets[c]]
        assert len(covered) == len(set(covered))
        assert set(covered) == expected
        mass = sum(oracles.masses(inst, "mu")[c] for c in ls.maximal_cells[k])
        assert mass == pytest.approx(sum(mu[x] for x in expected), abs=1e-14)


def test_chain_on_zero_function():
    inst = random_instance(23, depth=3, p=1.5, q=2.0)
    cert = chain_certificate(inst, np.zeros(inst.lattice.n_leaves))
    assert cert.holds
    assert all(s.lhs == 0 for s in cert.steps)


def test_chain_seed_23():
    inst = random_instance(23, depth=4, p=1.5, q=2.0)
    f = np.random.default_rng(23).random(inst.lattice.n_leaves)
    cert = chain_certificate(inst, f)
    assert cert.holds
    assert [s.label for s in cert.steps] == ["split", "level-bound", "regroup", "testing",
                                             "maximal", "doob", "overall"]
    mixed = mixed_norm_of_Talpha(inst, f) ** 1.5
    assert cert.steps[0].lhs == pytest.approx(mixed, rel=1e-12)
    assert mixed <= chain_constant(1.5) * cert.c1 ** 1.5 * lp_norm(inst, f, 1.5) ** 1.5
    doc = json.loads(json.dumps(cert.to_list()))
    assert {"label", "lhs", "rhs", "slack"} <= set(doc[0])


def test_chain_testing_step_is_tight_at_the_c1_witness():
    inst = binary(2, p=2.0, q=2.0)
    cert = chain_certificate(inst, np.ones(4))
    step = dict((s.label, s) for s in cert.steps)["testing"]
    assert step.lhs == pytest.approx(step.rhs, rel=1e-12)


def test_chain_rejects_p_above_q():
    with pytest.raises(ValueError, match="chain valid only for p <= q"):
        chain_certificate(random_instance(1, p=3.0, q=1.0), np.ones(8))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([(1.5, 1.5), (1.5, 2.0), (2.0, 2.5), (2.0, 2.0)]))
def test_chain_steps_hold(seed, pq):
    inst = random_instance(seed, st_branch(seed), 3, pq[0], pq[1], repeat_fraction=0.2)
    f = np.random.default_rng(seed).random(inst.lattice.n_leaves) ** 3
    cert = chain_certificate(inst, f)
    for s in cert.steps:
        assert s.lhs <= s.rhs * (1 + 1e-12), s


def st_branch(seed):
    return 2 + seed % 2


def test_doob_examples():
    inst = binary(3, p=2.0)
    lhs, rhs, ok = doob_check(inst, np.full(8, -3.0))
    assert lhs == pytest.approx(3.0) and ok
    lhs, rhs, ok = doob_check(inst, inst.indicator(8))
    assert ok and rhs - lhs > 0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1.2, 1.5, 2.0, 3.0, 6.0]))
def test_doob_holds(seed, p):
    inst = random_instance(seed, st_branch(seed), 3, p, 1.0, repeat_fraction=0.2)
    f = np.random.default_rng(seed).normal(size=inst.lattice.n_leaves) ** 3
    lhs, rhs, ok = doob_check(inst, f)
    assert ok


def test_rubio_on_constant():
    inst = binary(3, p=3.0, q=1.0)
    c = 2.0
    res = rubio_majorant(inst, np.full(8, c))
    sc = 1.5
    assert res.F == pytest.approx(np.full(8, c / (1 - 1 / (2 * sc))), rel=1e-11)
    assert res.norm_ratio <= 2.0


def test_rubio_seed_29():
    inst = random_instance(29, depth=4, p=3.0, q=1.0)
    f = np.random.default_rng(29).random(inst.lattice.n_leaves)
    res = rubio_majorant(inst, f)
    assert np.all(res.F >= f)
    assert res.norm_ratio ** inst.q <= 2.0
    bound = 2 * inst.s_conj * (res.per_cell_min + res.per_cell_tail)
    assert np.all(res.per_cell_average <= bound * (1 + 1e-10))
    # recompute the per-cell averages independently
    Fq = res.F ** inst.q
    avg = oracles.averages(inst, inst.function_dict(Fq))
    assert res.per_cell_average == pytest.approx([avg[c] for c in inst.lattice.cells], rel=1e-9)


def test_rubio_rejects_q_at_least_p():
    with pytest.raises(ValueError):
        rubio_majorant(random_instance(1, p=2.0, q=2.0), np.ones(8))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([(1.5, 1.0), (3.0, 1.0), (3.0, 2.5), (4.0, 2.0)]))
def test_rubio_properties(seed, pq):
    p, q = pq
    inst = random_instance(seed, st_branch(seed), 3, p, q, repeat_fraction=0.2)
    f = np.random.default_rng(seed).random(inst.lattice.n_leaves) ** 2
    res = rubio_majorant(inst, f)
    assert np.all(res.F >= f)
    lhs = lp_norm(inst, res.F, p) ** q
    assert lhs <= 2 * lp_norm(inst, f, p) ** q * (1 + 1e-10) + res.certified_tail
    bound = 2 * inst.s_conj * (res.per_cell_min + res.per_cell_tail)
    assert np.all(res.per_cell_average <= bound * (1 + 1e-10))
    # maximal function of F^q is controlled by F^q itself
    Fq = res.F ** q
    assert np.all(maximal(inst, Fq) <= 2 * inst.s_conj * (Fq + res.tail.max()) * (1 + 1e-10))


def test_reduction_at_q_one_is_an_identity():
    inst = random_instance(31, depth=3, p=3.0, q=1.0)
    rng = np.random.default_rng(1)
    f, g = rng.random((2, inst.lattice.n_leaves))
    red = reduction_compare(inst, f, g)
    assert red.holder_lhs == pytest.approx(red.holder_rhs, rel=1e-14)


def test_reduction_on_constant_f():
    inst = random_instance(31, depth=3, p=4.0, q=2.0)
    g = np.random.default_rng(2).random(inst.lattice.n_leaves)
    red = reduction_compare(inst, np.full(inst.lattice.n_leaves, 0.7), g)
    assert red.holder_lhs == pytest.approx(red.holder_rhs, rel=1e-13)


def test_reduction_seed_31():
    inst = random_instance(31, depth=4, p=4.0, q=2.0)
    rng = np.random.default_rng(31)
    for _ in range(20):
        f, g = rng.random((2, inst.lattice.n_leaves))
        red = reduction_compare(inst, f, g)
        assert all(red.holds_pair)


def test_reduction_matches_oracle_sums():
    inst = random_instance(32, depth=3, p=3.0, q=2.0)
    rng = np.random.default_rng(3)
    f, g = rng.random((2, inst.lattice.n_leaves))
    red = reduction_compare(inst, f, g)
    avg = oracles.averages(inst, inst.function_dict(f))
    avg_q = oracles.averages(inst, inst.function_dict(f ** 2))
    a = oracles.alpha_dict(inst)
    nu = oracles.weight_dict(inst, "nu")
    gd = inst.function_dict(g)
    A = sum(sum(a[c] ** 2 * avg[c] ** 2 for c in oracles.ancestors(inst, x)) * gd[x] * nu[x]
            for x in inst.lattice.leaves)
    B = sum(sum(a[c] ** 2 * avg_q[c] for c in oracles.ancestors(inst, x)) * gd[x] * nu[x]
            for x in inst.lattice.leaves)
    assert red.holder_lhs == pytest.approx(A, rel=1e-12)
    assert red.holder_rhs == pytest.approx(B, rel=1e-12)


def test_cell_averages_used_by_chain_are_consistent():
    inst = random_instance(5, depth=3, p=2.0, q=2.0)
    f = np.random.default_rng(0).random(inst.lattice.n_leaves)
    avg = cell_averages(inst, f)
    ls = level_sets(inst, f)
    # a cell's class is the level of the smallest maximal value on it
    lo, hi = inst.lattice.leaf_range
    for i in range(inst.lattice.n_cells):
        m = ls.maximal_function[lo[i]:hi[i]].min()
        if m > 0:
            k = ls.cell_class[i]
            assert 2.0 ** k < m <= 2.0 ** (k + 1)
            assert abs(avg[i]) <= ls.maximal_function[lo[i]:hi[i]].min() * (1 + 1e-15)
