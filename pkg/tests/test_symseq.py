import random
from fractions import Fraction
from math import factorial

import pytest
from hypothesis import given, settings, strategies as st

from opforge.exact import SparseMatrix, rank
from opforge.operads import build_preset
from opforge.symseq import (GradedSpace, SeqMap, SymSeq, Truncation, arity_zero, canonical_iso, comm_sequence,
                            compose_invariant, compose_product, curry_compose, curry_lev, equivariant_homs,
                            hom_lev, hom_lev_compose, identity_map, inner_hom, interchange_eta, interchange_mu,
                            isomorphic, levelwise_product, norm_inverse, operadic_shift, set_partitions,
                            uncurry_compose, uncurry_lev, unit_sequence)
from opforge.tensor import transposition

T3 = Truncation(3)


def carrier(name, t=T3):
    return build_preset(name, t).carrier()


def random_equivariant(x, y, rnd, degree=0):
    mats = {}
    for k in range(x.max_arity + 1):
        acc = SparseMatrix(y.component(k).dim, x.component(k).dim)
        for h in equivariant_homs(x, y, k, degree=degree):
            acc = acc + h.scale(rnd.randint(-2, 2))
        mats[k] = acc
    return SeqMap(x, y, mats, degree)


def lev_map(f, g):
    """f (x)lev g on level-wise products (Kronecker blocks, degree-0 maps)."""
    src, tgt = levelwise_product(f.source, g.source), levelwise_product(f.target, g.target)
    mats = {}
    for k in range(src.max_arity + 1):
        a, b = f.matrices[k], g.matrices[k]
        ent = {}
        for (r1, c1), x in a.entries.items():
            for (r2, c2), y in b.entries.items():
                ent[(r1 * b.rows + r2, c1 * b.cols + c2)] = x * y
        mats[k] = SparseMatrix(a.rows * b.rows, a.cols * b.cols, ent)
    return SeqMap(src, tgt, mats, 0)


# --- basic objects --------------------------------------------------------

def test_truncation_bounds():
    with pytest.raises(ValueError):
        Truncation(0)


def test_graded_space_names_unique():
    with pytest.raises(ValueError):
        GradedSpace(["a", "b"], [0, 1], ["x", "x"])


def test_coxeter_violation_is_rejected():
    sp = GradedSpace(["a", "b"], [0, 0])
    bad = SparseMatrix.from_dense([[1, 1], [0, 1]])  # not an involution
    with pytest.raises(ValueError):
        SymSeq(Truncation(2), {2: sp}, {2: [bad]})


def test_action_must_preserve_degree():
    sp = GradedSpace(["a", "b"], [0, 1])
    swap = SparseMatrix.from_dense([[0, 1], [1, 0]])
    with pytest.raises(ValueError):
        SymSeq(Truncation(2), {2: sp}, {2: [swap]})


def test_json_roundtrip():
    e2 = carrier("e2")
    back = SymSeq.from_json(e2.to_json())
    assert back.same_as(e2)


# --- composition products ------------------------------------------------

def test_unit_composed_with_unit():
    i = unit_sequence(T3)
    assert compose_product(i, i).dims() == i.dims()


@pytest.mark.parametrize("name", ["comm", "lie", "e2"])
def test_unit_laws(name):
    q = carrier(name)
    i = unit_sequence(T3)
    assert isomorphic(compose_product(i, q), q)
    assert isomorphic(compose_product(q, i), q)
    assert isomorphic(compose_invariant(i, q), q)


def test_comm_comm_arity_two():
    c = comm_sequence(T3)
    assert compose_product(c, c).dims()[2] == 2
    assert compose_invariant(c, c).dims()[2] == 2


def test_comm_lie_arity_three_matches_partition_oracle():
    t = Truncation(4)
    cl = compose_product(comm_sequence(t), carrier("lie", t))
    for n in range(1, 5):
        oracle = sum(_prod(factorial(len(b) - 1) for b in part) for part in set_partitions(range(n)))
        assert cl.dims()[n] == oracle
    assert cl.dims()[3] == 6


def _prod(xs):
    out = 1
    for x in xs:
        out *= x
    return out


def test_composite_actions_satisfy_coxeter():
    cl = compose_product(carrier("comm"), carrier("e2"))
    cl.check_coxeter()
    cl.check_degree_preserving()


def test_associativity_up_to_isomorphism():
    t = Truncation(3)
    p, q, r = carrier("comm", t), carrier("lie", t), carrier("e2", t)
    left = compose_product(compose_product(p, q), r)
    right = compose_product(p, compose_product(q, r))
    assert left.dims() == right.dims()
    assert isomorphic(left, right)


# --- invariants vs coinvariants ------------------------------------------

def test_canonical_iso_is_identity_on_arity_one():
    p, q = carrier("e2"), carrier("comm")
    iso = canonical_iso(compose_invariant(p, q), compose_product(p, q))
    m = iso.matrices[1]
    assert m == SparseMatrix.identity(m.rows)


def test_canonical_iso_orbit_factor_two():
    # Comm o Comm in arity 2: the summand c2(x, y) has trivial stabiliser in Sigma_2,
    # so the orbit sum e + s.e maps to 2[e] and the norm sends [e] to (e + s.e)/2.
    c = comm_sequence(T3)
    inv, coinv = compose_invariant(c, c), compose_product(c, c)
    iso, back = canonical_iso(inv, coinv), norm_inverse(coinv, inv)
    factors = sorted(iso.matrices[2].get(i, i) for i in range(inv.component(2).dim))
    assert factors == [1, 2]
    assert sorted(back.matrices[2].get(i, i) for i in range(2)) == [Fraction(1, 2), 1]


@pytest.mark.parametrize("pair", [("e2", "e2"), ("comm", "lie"), ("assoc", "comm")])
def test_canonical_iso_roundtrip_and_rank(pair):
    p, q = carrier(pair[0]), carrier(pair[1])
    inv, coinv = compose_invariant(p, q), compose_product(p, q)
    iso, back = canonical_iso(inv, coinv), norm_inverse(coinv, inv)
    assert iso.then(back) == identity_map(inv)
    assert back.then(iso) == identity_map(coinv)
    for n in range(4):
        assert rank(iso.matrices[n]) == inv.component(n).dim


@settings(max_examples=25)
@given(st.randoms(use_true_random=False))
def test_canonical_iso_roundtrip_on_random_elements(rnd):
    p, q = carrier("e2"), carrier("e2")
    inv, coinv = compose_invariant(p, q), compose_product(p, q)
    iso, back = canonical_iso(inv, coinv), norm_inverse(coinv, inv)
    for n in range(1, 4):
        v = {i: Fraction(rnd.randint(-5, 5), rnd.randint(1, 4)) for i in range(inv.component(n).dim)}
        w = back.matrices[n].apply(iso.matrices[n].apply(v))
        assert w == {i: c for i, c in v.items() if c}


# --- level-wise product, homs, adjunctions ------------------------------

def test_levelwise_unit_is_comm():
    e2 = carrier("e2")
    assert isomorphic(levelwise_product(comm_sequence(T3), e2), e2)
    assert isomorphic(levelwise_product(e2, comm_sequence(T3)), e2)


def test_levelwise_dims_multiply():
    e2 = carrier("e2")
    assert levelwise_product(e2, e2).dims()[2] == 4


def test_hom_lev_contains_identity():
    e2 = carrier("e2")
    h = hom_lev(e2, e2)
    for k in range(1, 4):
        sp = e2.component(k)
        ident = {(key, key): 1 for key in sp.keys}
        for i in range(k - 1):
            assert h.act_vec(transposition(k, i), ident) == ident
        assert {h.component(k).degree(key) for key in ident} == {0}


def test_inner_hom_of_ground_field():
    k0 = arity_zero(Truncation(4), GradedSpace(["x"], [0]))
    assert inner_hom(k0, k0).dims() == {n: 1 for n in range(5)}


@settings(max_examples=25)
@given(st.randoms(use_true_random=False))
def test_levelwise_adjunction_roundtrip(rnd):
    x, y = carrier("e2"), carrier("comm")
    z = carrier("e2")
    f = random_equivariant(levelwise_product(x, y), z, rnd)
    g = curry_lev(f, x, y, z)
    assert g.is_equivariant() and g.is_homogeneous()
    assert uncurry_lev(g, y, z) == f


@settings(max_examples=10)
@given(st.randoms(use_true_random=False))
def test_composition_adjunction_roundtrip(rnd):
    p, q, r = carrier("comm"), carrier("lie"), carrier("e2")
    f = random_equivariant(compose_product(p, q), r, rnd)
    big = curry_compose(f, p, q, r)
    assert big.is_equivariant() and big.is_homogeneous()
    assert uncurry_compose(big, q, r) == f
    assert curry_compose(uncurry_compose(big, q, r), p, q, r) == big


# --- operadic shift -------------------------------------------------------

def test_shift_by_zero_is_identity():
    e2 = carrier("e2")
    assert operadic_shift(e2, 0) is e2


def test_lie_generator_degree_after_negative_shift():
    lie = carrier("lie")
    assert lie.component(2).degrees == (0,)
    assert operadic_shift(lie, -1).component(2).degrees == (-1,)


@pytest.mark.parametrize("j", [1, 2, -3])
def test_shift_then_unshift(j):
    e2 = carrier("e2")
    assert operadic_shift(operadic_shift(e2, j), -j).same_as(e2)


def test_shift_commutes_with_composition():
    p, q = carrier("comm"), carrier("e2")
    lhs = operadic_shift(compose_product(p, q), 1)
    rhs = compose_product(operadic_shift(p, 1), operadic_shift(q, 1))
    assert isomorphic(lhs, rhs)


def test_shift_preserves_hom_lev():
    x, y = carrier("e2"), carrier("comm")
    assert isomorphic(hom_lev(operadic_shift(x, 1), operadic_shift(y, 1)), hom_lev(x, y))


# --- interchange maps -----------------------------------------------------

def test_interchange_eta_on_units_is_identity():
    i = unit_sequence(T3)
    src, tgt, eta = interchange_eta(i, i, i, i)
    for n in range(4):
        assert eta.matrices[n] == SparseMatrix.identity(src.component(n).dim)


def test_interchange_mu_on_units_is_identity():
    i = unit_sequence(T3)
    src, tgt, mu = interchange_mu(i, i, i, i)
    for n in range(4):
        assert mu.matrices[n] == SparseMatrix.identity(src.component(n).dim)


def test_interchange_maps_are_equivariant():
    c, e2 = carrier("comm"), carrier("e2")
    for builder in (interchange_eta, interchange_mu):
        _, _, m = builder(e2, c, e2, c)
        assert m.is_equivariant() and m.is_homogeneous()


@settings(max_examples=10)
@given(st.randoms(use_true_random=False))
def test_eta_naturality(rnd):
    x, y = carrier("e2"), carrier("comm")
    f1, f2 = random_equivariant(x, x, rnd), random_equivariant(y, y, rnd)
    g1, g2 = random_equivariant(x, x, rnd), random_equivariant(y, y, rnd)
    src, tgt, eta = interchange_eta(x, y, x, y)
    lhs = hom_lev_compose(lev_map(f1, f2), lev_map(g1, g2)).then(eta)
    rhs = eta.then(lev_map(hom_lev_compose(f1, g1), hom_lev_compose(f2, g2)))
    assert lhs == rhs


# --- hom_lev_compose -----------------------------------------------------

def test_hom_lev_compose_identities():
    p, q = carrier("e2"), carrier("comm")
    fg = hom_lev_compose(identity_map(p), identity_map(q))
    for n in range(4):
        assert fg.matrices[n] == SparseMatrix.identity(fg.source.component(n).dim)


def test_hom_lev_compose_zero():
    p, q = carrier("e2"), carrier("comm")
    zero = SeqMap(p, p, {}, 0)
    assert all(m.is_zero() for m in hom_lev_compose(zero, identity_map(q)).matrices.values())
    assert all(m.is_zero() for m in hom_lev_compose(identity_map(p), SeqMap(q, q, {}, 0)).matrices.values())


def test_hom_lev_compose_rejects_graded_inner_map():
    p = carrier("e2")
    with pytest.raises(ValueError):
        hom_lev_compose(identity_map(p), SeqMap(p, p, {}, 1))


@settings(max_examples=20)
@given(st.randoms(use_true_random=False))
def test_hom_lev_compose_evaluation(rnd):
    p, q = carrier("e2"), carrier("e2")
    f, g = random_equivariant(p, p, rnd), random_equivariant(q, q, rnd)
    fg = hom_lev_compose(f, g)
    comp = fg.source
    assert fg.is_equivariant()
    for n in range(1, 4):
        for idx in range(comp.component(n).dim):
            k, pvec, t = comp.entry(n, idx)
            # evaluate f and g separately, then re-normalise
            expect = {}
            fx = f.matrices[k].apply(pvec)
            terms = [(Fraction(1), [])]
            for blk, qi in t:
                col = g.matrices[len(blk)].transpose().row(qi)
                terms = [(c * v, sl + [(blk, r)]) for c, sl in terms for r, v in col.items()]
            for c, sl in terms:
                for key, v in comp.normalize(n, k, fx, sl).items():
                    expect[key] = expect.get(key, 0) + c * v
            expect = {a: b for a, b in expect.items() if b}
            assert fg.matrices[n].apply({idx: 1}) == expect
