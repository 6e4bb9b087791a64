import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from opforge.exact import rank
from opforge.modules import (GeneratorsTimesOperad, OperadBimodule, bimodule_to_operad_map, check_bimodule,
                             check_left_module, extend_from_generators, free_algebra, free_bimodule,
                             relative_composition, relative_inner_hom)
from opforge.operads import IdentityOperad, build_preset, en_operad
from opforge.symseq import GradedSpace, Truncation, inner_hom
from opforge.tensor import all_perms

T3 = Truncation(3)
V01 = GradedSpace(["x", "y"], [0, 1])


def all_ok(checks):
    return all(c.ok for c in checks), [c.name for c in checks if not c.ok]


def test_free_algebra_over_identity_is_the_space():
    x = free_algebra(IdentityOperad(T3), V01, 3)
    assert x.carrier.component(0).dim == V01.dim
    assert x.carrier.component(0).degrees == V01.degrees


def coinvariant_dim(o, k):
    """dim of the Sigma_k-coinvariants of o(k) = average trace of the action."""
    seq = o.carrier()
    total = Fraction(0)
    perms = all_perms(k)
    for p in perms:
        m = seq.perm_matrix(k, p)
        total += sum(m.get(i, i) for i in range(m.rows))
    return total / len(perms)


def test_free_e2_algebra_on_one_even_generator():
    e2 = en_operad(2, Truncation(4))
    x = free_algebra(e2, GradedSpace(["x"], [0]), 4)
    expected = sum(coinvariant_dim(e2, k) for k in range(1, 5))
    assert x.carrier.component(0).dim == expected


@pytest.mark.parametrize("name", ["e2", "comm", "lie"])
def test_free_algebra_is_a_module(name):
    x = free_algebra(build_preset(name, T3), V01, 3)
    ok, bad = all_ok(check_left_module(x, samples=30, seed=1))
    assert ok, bad


def test_generator_embedding():
    e2 = en_operad(2, T3)
    x = free_algebra(e2, V01, 3)
    for w in range(V01.dim):
        (idx, c), = x.generator(0, w).items()
        assert c == 1 and x.carrier.weight(0, idx) == 1


@settings(max_examples=15)
@given(st.randoms(use_true_random=False))
def test_free_algebra_adjunction_roundtrip(rnd):
    """Algebra maps out of O<V> correspond to linear maps out of V."""
    e2 = en_operad(2, T3)
    x = free_algebra(e2, V01, 3)
    y = free_algebra(e2, V01, 3)
    # a degree-0 linear map V -> Y: x |-> a x, y |-> b y + (degree-1 weight-2 terms)
    deg1 = [i for i in range(y.carrier.component(0).dim) if y.carrier.component(0).degrees[i] == 1]
    a = rnd.randint(-3, 3)
    phi = {0: {i: c for i, c in y.generator(0, 0).items()}}
    phi[0] = {i: a * c for i, c in phi[0].items()}
    phi[1] = {i: Fraction(rnd.randint(-2, 2)) for i in rnd.sample(deg1, min(3, len(deg1)))}
    f = extend_from_generators(x, y, lambda n, w: phi[w])
    # restriction to generators recovers phi
    for w in (0, 1):
        assert f.apply_vec(0, x.generator(0, w)) == {i: c for i, c in phi[w].items() if c}
    # f is an algebra map: f(mu(u, v)) = mu(f u, f v) on binary operations
    o = x.operad
    sp = x.carrier.component(0)
    for mu in o.basis(2):
        for u in range(sp.dim):
            for v in range(sp.dim):
                lhs = f.apply_vec(0, x.act(2, {mu: 1}, [((), u), ((), v)]))
                rhs = y.act_vecs(2, {mu: 1}, [(), ()], [f.apply(0, u), f.apply(0, v)])
                assert lhs == {k: c for k, c in rhs.items() if c}


def test_identity_extension_is_identity():
    e2 = en_operad(2, T3)
    x = free_algebra(e2, V01, 3)
    f = extend_from_generators(x, x, lambda n, w: x.generator(n, w))
    for idx in range(x.carrier.component(0).dim):
        assert f.apply(0, idx) == {idx: 1}


def test_free_bimodule_axioms():
    e2 = en_operad(2, T3)
    w = build_preset("comm", T3).carrier()
    b = free_bimodule(e2, w, e2)
    ok, bad = all_ok(check_bimodule(b, samples=20, seed=2))
    assert ok, bad


# --- relative inner hom -------------------------------------------------------

def test_relative_end_of_operad_is_the_operad():
    e2 = en_operad(2, T3)
    f, end = bimodule_to_operad_map(OperadBimodule(e2))
    assert end.dims() == e2.dims()
    assert f.failures() == []
    for k in range(1, 4):
        assert rank(f.matrix(k)) == len(e2.basis(k))


def test_relative_hom_from_operad_to_module():
    e2 = en_operad(2, T3)
    m = GeneratorsTimesOperad(build_preset("comm", T3).carrier(), e2)
    h = relative_inner_hom(OperadBimodule(e2), m)
    # a right-linear map out of P^{boxtimes n} is fixed by the image of id^{boxtimes n} in M(n)
    assert {n: d for n, d in h.dims().items() if n} == {n: d for n, d in m.carrier.dims().items() if n}


def test_relative_hom_over_identity_is_plain_inner_hom():
    idop = IdentityOperad(T3)
    w = build_preset("e2", T3).carrier()
    m = GeneratorsTimesOperad(w, idop)
    h = relative_inner_hom(m, m)
    assert h.dims() == inner_hom(m.carrier, m.carrier).dims()


def test_structure_map_of_an_algebra():
    e2 = en_operad(2, T3)
    x = free_algebra(e2, GradedSpace(["x"], [0]), 3)
    x.right_operad = IdentityOperad(T3)
    f, end = bimodule_to_operad_map(x)
    assert f.failures() == []
    # the image of c2 evaluates to the product of the algebra
    sp = x.carrier.component(0)
    mats = end.hom.basis[2]
    img = f.apply(2, e2.c2)
    total = None
    for j, c in img.items():
        m = mats[j][0].scale(c)
        total = m if total is None else total + m
    box = end.hom.box[2].component(0)
    for wi, w in enumerate(box.keys):
        expected = x.act(2, {e2.c2: 1}, list(w))
        assert total.transpose().row(wi) == expected


# --- relative composition ----------------------------------------------------

def test_relative_composition_unit_law():
    e2 = en_operad(2, T3)
    x = free_algebra(e2, V01, 3)
    rc = relative_composition(OperadBimodule(e2), x, max_weight=3)
    assert rc.dims()[0] == x.carrier.component(0).dim


def test_operad_over_itself():
    e2 = en_operad(2, T3)
    rc = relative_composition(OperadBimodule(e2), OperadBimodule(e2))
    assert {k: v for k, v in rc.dims().items() if k} == {k: v for k, v in e2.dims().items() if k}
