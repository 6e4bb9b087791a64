import random
from math import factorial

import pytest
from hypothesis import given, settings, strategies as st

from opforge.operads import (DualOperad, IdentityOperad, MutatedOperad, PresetId, build_preset,
                             check_cooperad_axioms, check_operad_axioms, dualize, en_map_from_generators,
                             en_operad, hopf_diagonal, koszul_data, koszul_dual_preset, operadic_cobar_resolution)
from opforge.poisson import mono_expression, normal_form_en
from opforge.suites import left_normed_count
from opforge.symseq import Truncation, isomorphic
from opforge.tensor import all_perms

T3, T4 = Truncation(3), Truncation(4)


def passes(results):
    return all(r.ok for r in results)


# --- presets ---------------------------------------------------------------

def test_e2_arity_two():
    e2 = en_operad(2, T3)
    assert len(e2.basis(2)) == 2
    assert e2.degree(2, e2.c2) == 0
    assert e2.degree(2, e2.l2) == -1


def test_e3_bracket_degree():
    e3 = en_operad(3, T3)
    assert e3.degree(2, e3.l2) == -2


@pytest.mark.parametrize("k", range(1, 6))
def test_e2_basis_count_matches_independent_counter(k):
    e2 = en_operad(2, Truncation(5))
    assert len(e2.basis(k)) == left_normed_count(k) == factorial(k)


def test_comm_is_one_dimensional():
    c = build_preset("comm", T4)
    assert [len(c.basis(k)) for k in range(1, 5)] == [1, 1, 1, 1]
    assert {c.degree(k, b) for k in range(1, 5) for b in c.basis(k)} == {0}
    assert c.basis(0) == ()


def test_unknown_preset():
    with pytest.raises(ValueError):
        build_preset("e1", T3)
    with pytest.raises(ValueError):
        PresetId.parse("poisson")


def test_preset_shift_suffix():
    pid = PresetId.parse("e2{2}")
    assert (pid.family, pid.n, pid.shift) == ("en", 2, 2)
    sh = build_preset(pid, T3)
    base = en_operad(2, T3)
    # {j} raises arity-k degrees by j(k-1)
    assert sorted(sh.degree(2, b) for b in sh.basis(2)) == sorted(base.degree(2, b) + 2 for b in base.basis(2))


# --- normal forms -----------------------------------------------------------

def test_commutative_composites_collapse():
    e2 = en_operad(2, T3)
    target = {((0,), (1,), (2,)): 1}
    for expr in [("c", ("c", 0, 1), 2), ("c", 0, ("c", 1, 2)), ("c", ("c", 2, 0), 1), ("c", 1, ("c", 2, 0))]:
        assert normal_form_en(expr, 2) == target
    assert len(e2.basis(3)) == 6


@pytest.mark.parametrize("n", [2, 3, 4])
def test_bracket_graded_symmetry(n):
    a, b = normal_form_en(("l", 0, 1), n), normal_form_en(("l", 1, 0), n)
    # swapping inputs acts on H_{n-1}(S^{n-1}) by the antipode, of degree (-1)^n
    sign = 1 if n % 2 == 0 else -1
    assert b == {k: sign * v for k, v in a.items()}


@pytest.mark.parametrize("n", [2, 3])
def test_leibniz_rule(n):
    lhs = normal_form_en(("l", ("c", 0, 1), 2), n)
    t1 = normal_form_en(("c", ("l", 0, 2), 1), n)
    t2 = normal_form_en(("c", 0, ("l", 1, 2)), n)
    assert any(lhs == _add(t1, t2, s) for s in (1, -1))


@pytest.mark.parametrize("n", [2, 3])
def test_jacobi_rule(n):
    terms = [normal_form_en(("l", ("l", a, b), c), n) for a, b, c in [(0, 1, 2), (1, 2, 0), (2, 0, 1)]]
    assert any(_add(_add(terms[0], terms[1], s1), terms[2], s2) == {} for s1 in (1, -1) for s2 in (1, -1))


def _add(x, y, s):
    out = dict(x)
    for k, v in y.items():
        out[k] = out.get(k, 0) + s * v
    return {k: v for k, v in out.items() if v}


def test_malformed_word():
    with pytest.raises(ValueError):
        normal_form_en(("x", 0, 1), 2)
    with pytest.raises(ValueError):
        normal_form_en(("c", 0, 0), 2)


def random_expr(rnd, labels):
    if len(labels) == 1:
        return labels[0]
    cut = rnd.randint(1, len(labels) - 1)
    return (rnd.choice("cl"), random_expr(rnd, labels[:cut]), random_expr(rnd, labels[cut:]))


@settings(max_examples=80)
@given(st.integers(2, 4), st.randoms(use_true_random=False))
def test_rewriting_agrees_with_operad_composition(k, rnd):
    """Two evaluation orders of the same composite give one normal form."""
    e2 = en_operad(2, T4)
    labels = list(range(k))
    rnd.shuffle(labels)
    expr = random_expr(rnd, labels)
    direct = normal_form_en(expr, 2)
    via_ops = en_map_from_generators(e2, e2, {e2.c2: 1}, {e2.l2: 1})
    from opforge.operads import evaluate_composite
    _, composed = evaluate_composite(e2, expr, {"c": {e2.c2: 1}, "l": {e2.l2: 1}})
    assert {a: v for a, v in composed.items() if v} == direct
    for key in direct:
        assert key in e2.basis(k)
    assert via_ops.failures(3) == []


def test_basis_monomials_are_their_own_normal_form():
    e2 = en_operad(2, T4)
    for k in range(1, 5):
        for key in e2.basis(k):
            nf = normal_form_en(mono_expression(key), 2)
            assert nf == {key: e2.calc.key_sign(key)}


# --- axioms -------------------------------------------------------------------

def test_identity_operad_passes():
    assert passes(check_operad_axioms(IdentityOperad(T3)))


@pytest.mark.parametrize("name", ["comm", "assoc", "lie", "e2", "e3", "e2{1}", "comm{-1}"])
def test_presets_pass_axioms(name):
    assert passes(check_operad_axioms(build_preset(name, T3)))


def test_sign_flipped_action_fails_equivariance():
    e2 = en_operad(2, T3)
    bad = MutatedOperad(e2, 2, e2.l2)
    failing = {r.name for r in check_operad_axioms(bad) if not r.ok}
    assert "equivariance" in failing or "action" in failing


# --- duals ---------------------------------------------------------------------

def test_comm_koszul_dual_dims():
    c = koszul_dual_preset("comm", T4)
    assert [len(c.basis(k)) for k in range(1, 5)] == [factorial(k - 1) for k in range(1, 5)]


def test_e2_koszul_dual_arity_two_degrees():
    kd = koszul_data("e2", T3)
    o, c = kd.operad, kd.cooperad
    assert len(c.basis(2)) == len(o.basis(2))
    # dual of e2{2}: degrees -(d + 2) for d in degrees of e2(2)
    assert sorted(c.degree(2, b) for b in c.basis(2)) == sorted(-(o.degree(2, a) + 2) for a in o.basis(2))


@pytest.mark.parametrize("name", ["e2", "lie", "assoc"])
def test_double_dual(name):
    o = build_preset(name, T3)
    back = DualOperad(dualize(o))
    assert back.dims() == o.dims()
    assert isomorphic(back.carrier(), o.carrier())
    assert passes(check_operad_axioms(back))


@pytest.mark.parametrize("name", ["e2", "comm", "lie"])
def test_cooperad_axioms(name):
    assert passes(check_cooperad_axioms(koszul_dual_preset(name, T3)))


def test_e2_dual_is_biaugmented():
    c = koszul_dual_preset("e2", T3)
    assert hasattr(c, "coaugmentation")
    assert c.coaugmentation() is not None


# --- Hopf diagonal -------------------------------------------------------------

def test_hopf_on_generators():
    delta = hopf_diagonal(2, T4)
    e2 = delta.source
    c, l = e2.c2, e2.l2
    assert delta.apply(2, c) == {(c, c): 1}
    assert delta.apply(2, l) == {(l, c): 1, (c, l): 1}


def test_hopf_is_operad_morphism():
    assert hopf_diagonal(2, T4).failures() == []
    assert hopf_diagonal(3, T3).failures() == []


def test_hopf_on_composite_expands_multiplicatively():
    delta = hopf_diagonal(2, T3)
    e2, h = delta.source, delta.target
    x = e2.comp(2, 0, 2, e2.l2, e2.c2)
    lhs = delta.apply_vec(3, x)
    rhs = h.comp_vec(2, 0, 2, delta.apply(2, e2.l2), delta.apply(2, e2.c2))
    assert lhs == rhs and lhs


# --- operadic cobar resolution ------------------------------------------------

def test_cobar_resolution_e2():
    kd = koszul_data("e2", T4)
    res = operadic_cobar_resolution(kd)
    assert [r.arity for r in res] == [1, 2, 3, 4]
    assert {d: b for d, b in res[0].report.betti.items() if b} == {0: 1}
    for r in res:
        assert r.quasi_iso
        assert r.report.total() == factorial(r.arity)


@pytest.mark.parametrize("name", ["comm", "lie", "assoc"])
def test_cobar_resolution_classical(name):
    kd = koszul_data(name, T3)
    assert all(r.quasi_iso for r in operadic_cobar_resolution(kd))
