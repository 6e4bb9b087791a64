import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from opforge import barcobar as bc
from opforge.defcplx import ZeroAlgebra, symmetric_power_dims
from opforge.exact import SparseMatrix, homology
from opforge.modules import free_algebra
from opforge.operads import CommOperad, DualCooperad, en_operad, koszul_data
from opforge.suites import COEFFS, SuiteConfig, _gen_space, plain_mc_instance
from opforge.symseq import GradedSpace, Truncation


def gens(*degs):
    return _gen_space(degs)


def weights(y):
    sp = y.carrier.component(0)
    out = {}
    for i in range(sp.dim):
        w = y.weight(0, i)
        out[w] = out.get(w, 0) + 1
    return out


def mat_product(a, b):
    cols = {}
    for (r, c), v in b.entries.items():
        cols.setdefault(c, {})[r] = v
    out = {}
    for c, col in cols.items():
        img = a.apply(col)
        out[c] = {r: v for r, v in img.items() if v}
    return SparseMatrix.from_columns(a.shape[0], b.shape[1], out)


# ---------------------------------------------------------------------------
# cofree coalgebras

def test_cofree_weight_one_is_v():
    c = DualCooperad(en_operad(2, Truncation(3)))
    v = gens(0, 1, -2)
    y = bc.cofree_coalgebra(c, v, 3)
    w1 = [i for i in range(y.carrier.component(0).dim) if y.weight(0, i) == 1]
    assert sorted(y.carrier.component(0).degrees[i] for i in w1) == sorted(v.degrees)


def test_cofree_comm_dual_on_a_line():
    c = DualCooperad(CommOperad(Truncation(3)))
    y = bc.cofree_coalgebra(c, gens(0), 3)
    # one symmetric power per weight; the coaugmentation line is not in the carrier
    assert weights(y) == {1: 1, 2: 1, 3: 1}


@pytest.mark.parametrize("degs", [(0,), (1,), (0, 1), (0, 0)])
def test_cofree_comm_dual_is_the_symmetric_coalgebra(degs):
    c = DualCooperad(CommOperad(Truncation(3)))
    y = bc.cofree_coalgebra(c, gens(*degs), 3)
    assert weights(y) == {k: v for k, v in symmetric_power_dims(list(degs), 3).items() if v}


@pytest.mark.parametrize("preset", ["e2", "comm"])
def test_cofree_counit_and_coassociativity(preset):
    kd = koszul_data(preset, Truncation(3))
    y = bc.cofree_coalgebra(kd.cooperad, gens(0, 1), 3)
    assert y.check_counit() == []
    assert all(c.ok for c in y.check_coassociativity())


def test_cofree_filtration_matches_weight():
    c = DualCooperad(en_operad(2, Truncation(3)))
    y = bc.cofree_coalgebra(c, gens(0), 3)
    # F^i is spanned by the tensors of weight <= i
    fil = y.filtration()[0]
    w = weights(y)
    assert fil == {i: sum(v for k, v in w.items() if k <= i) for i in fil}


def test_cofree_extension_of_the_projection_is_the_identity():
    kd = koszul_data("e2", Truncation(3))
    x = free_algebra(kd.operad, gens(0), 3)
    b = bc.BarComplex(kd, x, max_k=3, max_weight=3)
    pr = bc.cofree_projection(b)
    ext = bc.cofree_extension(b, b, lambda n, vec: pr[n].apply(vec) if n in pr else {})
    dim = b.carrier.component(0).dim
    assert ext[0] == SparseMatrix.identity(dim)


@given(st.integers(0, 10_000))
def test_cofree_adjunction_roundtrip(seed):
    rnd = random.Random(seed)
    c = DualCooperad(en_operad(2, Truncation(3)))
    src = bc.cofree_coalgebra(c, gens(0, 0), 3)
    tgt = bc.cofree_coalgebra(c, gens(0), 3)
    # a linear map src -> V, nonzero only on weight one
    ssp = src.carrier.component(0)
    imgs = {i: {0: Fraction(rnd.choice(COEFFS))} for i in range(ssp.dim) if src.weight(0, i) == 1}
    phi = SparseMatrix.from_columns(1, ssp.dim, imgs)
    ext = bc.cofree_extension(src, tgt, lambda n, vec: phi.apply(vec) if n == 0 else {})
    assert bc.is_coalgebra_map(src, tgt, ext)
    assert mat_product(bc.cofree_projection(tgt)[0], ext[0]) == phi


# ---------------------------------------------------------------------------
# bar and cobar

@pytest.mark.parametrize("preset", ["e2", "comm", "lie"])
def test_bar_of_free_algebra_is_acyclic_above_weight_one(preset):
    kd = koszul_data(preset, Truncation(3))
    x = free_algebra(kd.operad, gens(0), 3)
    b = bc.BarComplex(kd, x, max_k=3, max_weight=3)
    b.check_square_zero()
    cxs = b.complexes(0)
    assert homology(cxs[1]).total() == 1
    for w in (2, 3):
        # the free Lie algebra on one even generator stops at weight one
        assert w not in cxs or homology(cxs[w]).total() == 0


def test_bar_differential_square_zero_with_odd_generator():
    kd = koszul_data("e2", Truncation(3))
    x = free_algebra(kd.operad, gens(0, 1), 3)
    b = bc.BarComplex(kd, x, max_k=3, max_weight=3)
    assert b.complex(0).square_zero_defect() is None


def test_bar_of_zero_algebra_has_no_bar_differential():
    kd = koszul_data("e2", Truncation(3))
    z = ZeroAlgebra(kd.operad, gens(0, 1))
    b = bc.BarComplex(kd, z, max_k=3, max_weight=3)
    sp = b.carrier.component(0)
    assert all(not b.differential(0, i) for i in range(sp.dim))
    assert homology(b.complex(0)).total() == sp.dim


def test_bar_is_a_coderivation():
    kd = koszul_data("e2", Truncation(3))
    x = free_algebra(kd.operad, gens(0, 1), 2)
    b = bc.BarComplex(kd, x, max_k=3, max_weight=2)
    assert b.check_coderivation(ks=(2, 3)) == []


def test_cobar_of_trivial_coalgebra_has_zero_differential():
    kd = koszul_data("e2", Truncation(3))
    y = bc.cofree_coalgebra(kd.cooperad, gens(0), 1)     # weight one only: no cooperations
    cb = bc.cobar_complex(kd, y, max_weight=3)
    sp = cb.carrier.component(0)
    assert sp.dim == free_algebra(kd.operad, gens(0), 3).carrier.component(0).dim
    assert all(not cb.differential(0, i) for i in range(sp.dim))


def test_cobar_of_bar_squares_to_zero():
    kd = koszul_data("e2", Truncation(3))
    x = free_algebra(kd.operad, gens(0), 2)
    b = bc.BarComplex(kd, x, max_k=3, max_weight=2)
    cb = bc.cobar_complex(kd, b, max_weight=2)
    assert cb.complex(0).square_zero_defect() is None


def test_cobar_of_cofree_resolves_the_generators():
    # Cobar(O^! o V) with zero differential on V is quasi-iso to O o V truncated; at weight 1 it is V
    kd = koszul_data("comm", Truncation(2))
    y = bc.cofree_coalgebra(kd.cooperad, gens(0), 2)
    cb = bc.cobar_complex(kd, y, max_weight=2)
    sp = cb.carrier.component(0)
    w1 = [i for i in range(sp.dim) if cb.carrier.weight(0, i) == 1]
    cx = bc.build_complex(sp, w1, lambda i: cb.differential(0, i))
    assert homology(cx).total() == 1


# ---------------------------------------------------------------------------
# Maurer-Cartan correspondences

def _plain_setup(preset="e2", degs=(0, 1), arity=3, weight=3):
    kd = koszul_data(preset, Truncation(arity))
    x1 = free_algebra(kd.operad, gens(*degs), weight)
    x = free_algebra(kd.operad, gens(*degs), weight)
    y = bc.BarComplex(kd, x1, max_k=arity, max_weight=weight)
    bx = bc.BarComplex(kd, x, max_k=arity, max_weight=weight)
    cob = bc.CobarComplex(kd, y, max_weight=weight)
    return kd, x1, x, y, bx, cob


def test_projection_twisting_gives_the_identity_coalgebra_map():
    kd, x1, _, y, _, cob = _plain_setup(degs=(0,), weight=2)
    th = bc.Twisting(y, x1, bc.bar_projection(y))
    bc.check_mc(kd, th)
    f = bc.twisting_to_coalgebra_map(kd, th, y)
    assert f[0] == SparseMatrix.identity(y.carrier.component(0).dim)


@given(st.integers(0, 10_000))
def test_mc_correspondence_roundtrips(seed):
    kd, x1, x, y, bx, cob = _plain_setup(degs=(0,), weight=2)
    f = plain_mc_instance(kd, x1, x, random.Random(seed))
    th = bc.twisting_from_map(y, f, x)
    r = bc.mc_correspondence(kd, th, bx, cob, expected_f=bc.bar_of_map(y, bx, f))
    assert r.ok, r


def test_mc_correspondence_with_odd_generator():
    cfg = SuiteConfig("e2", max_arity=3, max_weight=3, instances=3)
    checks = {c.name: c for c in __import__("opforge.suites", fromlist=["suite_mc"]).suite_mc(cfg)}
    assert all(c.status == "pass" for c in checks.values()), checks


def test_non_mc_element_raises_with_residual():
    kd, x1, _, y, _, _ = _plain_setup(degs=(0,), weight=2)
    pr = bc.bar_projection(y)
    # twice the projection fails the quadratic term
    bad = bc.Twisting(y, x1, {n: SparseMatrix.from_columns(m.shape[0], m.shape[1],
                                                            _scaled_cols(m, 2)) for n, m in pr.items()})
    with pytest.raises(bc.NotMaurerCartan) as ei:
        bc.check_mc(kd, bad)
    assert any(not m.is_zero() for m in ei.value.residual.values())


def _scaled_cols(m, s):
    cols = {}
    for (r, c), v in m.entries.items():
        cols.setdefault(c, {})[r] = s * v
    return cols


def test_bar_is_a_right_module_over_the_operad():
    from opforge.modules import OperadBimodule
    kd = koszul_data("e2", Truncation(3))
    b = bc.BarComplex(kd, OperadBimodule(kd.operad), max_k=3)
    assert bc.check_coalgebra_right_module(b) == []


# ---------------------------------------------------------------------------
# cocommutative core and the star product

def test_core_of_comm_dual_cofree_is_everything():
    c = DualCooperad(CommOperad(Truncation(3)))
    y = bc.cofree_coalgebra(c, gens(0, 1), 3)
    # Comm^* has only the product key, so nothing is cut
    core = bc.cocommutative_core(y)
    assert core.carrier.component(0).dim == y.carrier.component(0).dim


@pytest.mark.parametrize("degs", [(0,), (1,), (0, 1)])
def test_core_of_e2_cofree_is_the_symmetric_coalgebra(degs):
    c = DualCooperad(en_operad(2, Truncation(3)))
    y = bc.cofree_coalgebra(c, gens(*degs), 3)
    core = bc.cocommutative_core(y)
    assert core.carrier.component(0).dim == sum(symmetric_power_dims(list(degs), 3).values())
    assert core.check_counit() == []


def test_core_of_trivial_coalgebra_is_itself():
    c = DualCooperad(en_operad(2, Truncation(3)))
    y = bc.cofree_coalgebra(c, gens(0, 1, 2), 1)
    assert bc.cocommutative_core(y).carrier.component(0).dim == 3


def test_star_with_a_line_and_comm_unit_law():
    t = Truncation(2)
    a = bc.cofree_coalgebra(DualCooperad(CommOperad(t)), gens(0), 1)
    y = bc.cofree_coalgebra(DualCooperad(en_operad(2, t)), gens(0, 1), 2)
    s = bc.star_coalgebra(a, y)
    assert s.carrier.component(0).dim == y.carrier.component(0).dim
    u = bc.comm_unit_law(s)
    assert u.cooperad is y.cooperad
    assert u.check_counit() == []


def test_star_dims_multiply_and_counit_holds():
    t = Truncation(2)
    a = bc.cofree_coalgebra(DualCooperad(CommOperad(t)), gens(0), 2)
    y = bc.cofree_coalgebra(DualCooperad(en_operad(2, t)), gens(0), 2)
    s = bc.star_coalgebra(a, y)
    assert s.carrier.component(0).dim == a.carrier.component(0).dim * y.carrier.component(0).dim
    assert s.check_counit() == []


def test_star_rejects_truncation_mismatch():
    a = bc.cofree_coalgebra(DualCooperad(CommOperad(Truncation(2))), gens(0), 2)
    y = bc.cofree_coalgebra(DualCooperad(en_operad(2, Truncation(3))), gens(0), 2)
    with pytest.raises(ValueError):
        bc.star_coalgebra(a, y)


def test_comm_unit_law_needs_comm_first_factor():
    t = Truncation(2)
    y = bc.cofree_coalgebra(DualCooperad(en_operad(2, t)), gens(0), 2)
    with pytest.raises(ValueError):
        bc.comm_unit_law(bc.star_coalgebra(y, y))
