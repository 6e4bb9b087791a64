import random
from math import comb

import pytest
from hypothesis import given, strategies as st

from opforge.defcplx import (CEChainCoalgebra, ConvolutionLie, ConvolutionOperad, JacobiFailure, LieData,
                             NotMaurerCartanElement, ZeroAlgebra, bar_of_def, bracket_vanishing_experiment,
                             ce_chain_coalgebra, check_jacobi, check_prelie, def_operadic, def_plain,
                             def_relative, e_equal, e_scale, en_action_on_def, end_v_map, explicit_phi_generator,
                             hopf_route_check, kappa_element, operadic_relative_iso, phi_lie_map,
                             symmetric_power_dims)
from opforge.modules import OperadBimodule, free_algebra
from opforge.operads import (CommOperad, DualCooperad, IdentityOperad, check_operad_axioms, en_operad,
                             koszul_data)
from opforge.suites import END_V_STRUCTURES, end_v_space
from opforge.symseq import GradedSpace, Truncation


def conv_lie(preset="e2", arity=3):
    kd = koszul_data(preset, Truncation(arity))
    return ConvolutionLie(ConvolutionOperad(kd.cooperad, kd.operad))


# ---------------------------------------------------------------------------
# convolution operads and their Lie algebras

def test_convolution_with_identity_cooperad_is_arity_one():
    t = Truncation(3)
    conv = ConvolutionOperad(DualCooperad(IdentityOperad(t)), en_operad(2, t))
    assert [conv.space(k).dim for k in range(1, 4)] == [1, 0, 0]


def test_comm_dual_against_comm_is_one_dimensional():
    t = Truncation(4)
    conv = ConvolutionOperad(DualCooperad(CommOperad(t)), CommOperad(t))
    assert [conv.space(k).dim for k in range(1, 5)] == [1, 1, 1, 1]
    assert all(r.ok for r in check_operad_axioms(conv, stop_at_first=False))
    # every element is invariant, so the Lie algebra sees one line per arity
    assert ConvolutionLie(conv).dims() == {1: 1, 2: 1, 3: 1, 4: 1}


@pytest.mark.parametrize("preset", ["e2", "e3", "lie", "comm"])
def test_convolution_operad_axioms(preset):
    kd = koszul_data(preset, Truncation(3))
    conv = ConvolutionOperad(kd.cooperad, kd.operad)
    assert all(r.ok for r in check_operad_axioms(conv, stop_at_first=False))


@pytest.mark.parametrize("preset", ["e2", "e3", "lie"])
def test_prelie_and_jacobi(preset):
    lie = conv_lie(preset)
    assert check_prelie(lie, triples=100, seed=7).ok
    assert check_jacobi(lie.bracket, lie.degree, lambda r: lie.random_element(r), triples=100, seed=7).ok


@given(st.integers(0, 10_000))
def test_star_with_zero_and_self_bracket(seed):
    lie = conv_lie()
    a = lie.random_element(random.Random(seed))
    assert lie.star(a, {}) == {} and lie.star({}, a) == {}
    d = lie.degree(a)
    if d is None:
        return
    expected = e_scale(lie.star(a, a), 2) if d % 2 else {}
    assert e_equal(lie.bracket(a, a), expected)


def test_random_elements_are_invariant():
    lie = conv_lie()
    rng = random.Random(3)
    for _ in range(20):
        a = lie.random_element(rng)
        assert lie.is_invariant(a)
        assert e_equal(lie.from_coords(lie.coords(a)), a)


def test_coords_rejects_non_invariant():
    lie = conv_lie()
    k, v = next((k, v) for k, v in lie.basis if len(v) > 1)
    x = next(iter(v))
    with pytest.raises(ValueError):
        lie.coords({k: {x: 1}})


# ---------------------------------------------------------------------------
# phi

@pytest.mark.parametrize("preset", ["e2", "e3", "lie", "comm", "assoc"])
def test_phi_certificate(preset):
    kd = koszul_data(preset, Truncation(3))
    cert = phi_lie_map(kd, 3)
    assert cert.ok, cert.failures
    assert e_equal(cert.omega_image, explicit_phi_generator(kd))


def test_phi_for_lie_is_a_single_term():
    kd = koszul_data("lie", Truncation(3))
    assert len(kappa_element(kd)[2]) == 1


def test_hopf_route_agrees_with_phi():
    kd = koszul_data("e2", Truncation(3))
    for r in hopf_route_check(kd, 3):
        assert r.equal and not r.hopf_failures and not r.psi_failures


def test_hopf_route_needs_en():
    with pytest.raises(ValueError):
        hopf_route_check(koszul_data("lie", Truncation(3)))


# ---------------------------------------------------------------------------
# deformation complexes

@pytest.mark.parametrize("preset", ["e2", "e3"])
def test_def_identity_is_a_dg_lie_algebra(preset):
    d = def_operadic(koszul_data(preset, Truncation(3)))
    assert d.check_square_zero()
    assert d.leibniz_failures() == []
    assert d.jacobi_check(50).ok


@pytest.mark.parametrize("structure", sorted(END_V_STRUCTURES))
def test_def_into_end_v(structure):
    kd = koszul_data("e2", Truncation(3))
    c, l = END_V_STRUCTURES[structure]
    d = def_operadic(kd, end_v_map(kd, end_v_space(), c, l))
    assert d.check_square_zero()
    assert d.leibniz_failures() == []


def test_end_v_map_rejects_non_associative_product():
    kd = koszul_data("e2", Truncation(3))
    v = GradedSpace.from_pairs([("a", 0), ("b", 0)])
    # a.a = b, b.b = a: (a.a).b = a but a.(a.b) = 0
    with pytest.raises(ValueError):
        end_v_map(kd, v, {(1, (0, 0)): 1, (0, (1, 1)): 1}, {})


def test_operadic_relative_iso_e2():
    kd = koszul_data("e2", Truncation(3))
    gi = operadic_relative_iso(kd, OperadBimodule(kd.operad))
    assert gi.ok, gi


def test_relative_def_is_twisted_by_the_identity():
    kd = koszul_data("e2", Truncation(3))
    d = def_relative(kd, OperadBimodule(kd.operad))
    assert d.check_square_zero()
    assert d.leibniz_failures() == []
    theta = d.data["theta"]
    # twisting back by -theta recovers the untwisted differential
    back = d.twist(e_scale(theta, -1), "undo")
    assert back.d_matrix() == d.untwisted(["d0", "d_Bar"]).d_matrix()


def test_twist_rejects_non_mc_element():
    kd = koszul_data("e2", Truncation(3))
    d = def_relative(kd, OperadBimodule(kd.operad))
    base = d.untwisted(["d0", "d_Bar"])
    with pytest.raises(NotMaurerCartanElement) as ei:
        base.twist(e_scale(d.data["theta"], 2))
    assert ei.value.residual


def test_plain_def_of_free_algebra():
    kd = koszul_data("e2", Truncation(2))
    x = free_algebra(kd.operad, GradedSpace.from_pairs([("x", 0)]), 2)
    d = def_plain(kd, x, 2)
    assert d.kind == "plain"
    assert d.check_square_zero()
    assert d.leibniz_failures() == []


def test_zero_algebra_acts_trivially():
    kd = koszul_data("e2", Truncation(3))
    z = ZeroAlgebra(kd.operad, GradedSpace.from_pairs([("x", 0), ("y", 1)]))
    ovec = {k: 1 for k in kd.operad.basis(2)}
    assert z.act(2, ovec, [((0,), 0), ((1,), 1)]) == {}
    assert z.act(1, {kd.operad.unit(): 3}, [((0,), 1)]) == {1: 3}


def test_def_json_is_stable():
    import json
    d = def_operadic(koszul_data("e2", Truncation(2)))
    a = json.dumps(d.to_json(), sort_keys=True)
    b = json.dumps(def_operadic(koszul_data("e2", Truncation(2))).to_json(), sort_keys=True)
    assert a == b
    assert json.loads(a)["square_zero"] is True


# ---------------------------------------------------------------------------
# the e_n{n}-action

def test_en_action_on_def_e2():
    kd = koszul_data("e2", Truncation(3))
    d = def_operadic(kd)
    act = en_action_on_def(d, kd)
    assert act.axiom_failures(samples=5, seed=1) == []
    assert act.derivation_failures(d.untwisted(["d0", "d_Bar"]).d) == []
    assert act.lie_part_mismatches() == []


def test_product_homotopy_exists_at_arity_two():
    kd = koszul_data("e2", Truncation(2))
    d = def_operadic(kd)
    sol = en_action_on_def(d, kd).solve_homotopy(d.d)
    assert sol.found


def test_homotopy_solver_reports_infeasible_systems():
    kd = koszul_data("e2", Truncation(2))
    d = def_operadic(kd)
    act = en_action_on_def(d, kd)
    # with d = 0 every commutator [d, H] vanishes, so a nonzero defect has no solution
    sol = act.solve_homotopy(lambda e: {}, defect={(0, 0): {0: 1}})
    assert not sol.found and sol.defect_norm == 1


def test_action_needs_unshifted_en():
    kd = koszul_data("lie", Truncation(2))
    with pytest.raises(ValueError):
        en_action_on_def(def_operadic(kd), kd)


def test_bar_of_def_core_is_symmetric():
    kd = koszul_data("e2", Truncation(2))
    b = bar_of_def(en_action_on_def(def_operadic(kd), kd))
    assert b.square_zero
    assert b.ok, (b.core_dim, b.cofree_dims)


# ---------------------------------------------------------------------------
# Chevalley-Eilenberg chains

def test_ce_two_dimensional_nonabelian():
    g = LieData([0, 0], {}, {(0, 1): {1: 1}, (1, 0): {1: -1}}, ["e", "f"])
    assert ce_chain_coalgebra(g, 2).chain_betti() == {0: 1, 1: 1, 2: 0}


def test_ce_sl2():
    g = LieData([0, 0, 0], {}, {(0, 1): {2: 1}, (1, 0): {2: -1}, (2, 0): {0: 2}, (0, 2): {0: -2},
                                (2, 1): {1: -2}, (1, 2): {1: 2}}, ["e", "f", "h"])
    assert ce_chain_coalgebra(g, 3).chain_betti() == {0: 1, 1: 0, 2: 0, 3: 1}


@pytest.mark.parametrize("n", [1, 2, 3])
def test_ce_abelian_is_the_exterior_algebra(n):
    c = ce_chain_coalgebra(LieData([0] * n, {}, {}), n)
    assert c.chain_betti() == {k: comb(n, k) for k in range(n + 1)}


def test_ce_rejects_jacobi_failure():
    # [a, b] = a, [a, c] = a, [b, c] = b: the Jacobiator on (a, b, c) is a
    br = {(0, 1): {0: 1}, (1, 0): {0: -1}, (0, 2): {0: 1}, (2, 0): {0: -1}, (1, 2): {1: 1}, (2, 1): {1: -1}}
    with pytest.raises(JacobiFailure):
        CEChainCoalgebra(LieData([0, 0, 0], {}, br), 2)


def test_ce_of_def_complex():
    d = def_operadic(koszul_data("e2", Truncation(2)))
    c = ce_chain_coalgebra(LieData.from_def(d), 2)
    assert c.square_zero()
    assert c.coderivation_failures() == []
    prims = c.primitives()
    assert len(prims) == d.dim
    assert all(len(c.monos[j]) == 1 for v in prims for j in v)


def test_symmetric_power_dims():
    assert symmetric_power_dims([0], 3) == {1: 1, 2: 1, 3: 1}
    assert symmetric_power_dims([1], 3) == {1: 1, 2: 0, 3: 0}
    assert symmetric_power_dims([0, 1], 3) == {1: 2, 2: 2, 3: 2}


# ---------------------------------------------------------------------------
# the bracket-vanishing experiment

def test_bracket_vanishing_report_shape():
    kd = koszul_data("e2", Truncation(2))
    x = free_algebra(kd.operad, GradedSpace.from_pairs([("x", 0)]), 2)
    r = bracket_vanishing_experiment(def_plain(kd, x, 2))
    assert r.pairs == r.dim ** 2
    assert r.nonzero_pairs == len(r.norms)
    j = r.to_json()
    assert set(j) == {"name", "dim", "pairs", "nonzero_pairs", "max_support", "insertion_nonzero_pairs",
                      "insertion_max_support", "norms"}
