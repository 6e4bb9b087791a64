"""Verification suites shared by the command line and the acceptance tests.

Every suite is a function ``(config) -> list[Check]``.  A check carries a
status (``pass``, ``fail`` or ``reported``), a short witness string and
optional JSON data.  Suites never raise on mathematical failure: errors
are caught by the runner and turned into failing checks.
"""
from __future__ import annotations

import random
import time
from dataclasses import dataclass
from math import factorial
from typing import Callable, Dict, List, Optional, Sequence

from . import barcobar as bc
from .defcplx import (ConvolutionLie, ConvolutionOperad, LieData, bar_of_def, bracket_vanishing_experiment,
                      ce_chain_coalgebra, check_jacobi, check_prelie, def_operadic, def_plain, def_relative, e_equal,
                      en_action_on_def, end_v_map, explicit_phi_generator, hopf_route_check, operadic_relative_iso,
                      phi_lie_map, symmetric_power_dims)
from .exact import homology
from .modules import (FreeModule, GeneratorsTimesOperad, OperadBimodule, extend_from_generators, free_algebra,
                      right_linear_extension)
from .operads import (DualCooperad, PresetId, build_preset, check_operad_axioms, en_operad, hopf_diagonal,
                      koszul_data, operadic_cobar_resolution)
from .symseq import GradedSpace, SymSeq, Truncation, set_partitions
from .exact import SparseMatrix

DEFAULT_SEED = 0xC0FFEE
COEFFS = (-3, -2, -1, 1, 2, 3)
STATUSES = ("pass", "fail", "reported")


@dataclass
class Check:
    name: str
    status: str
    witness: str = ""
    data: Optional[dict] = None
    seconds: float = 0.0

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"bad status {self.status!r}")

    def to_json(self) -> dict:
        out = {"name": self.name, "status": self.status, "witness": self.witness}
        if self.data is not None:
            out["data"] = self.data
        return out


def verdict(name: str, ok: bool, witness: str = "", data: Optional[dict] = None) -> Check:
    return Check(name, "pass" if ok else "fail", witness, data)


@dataclass
class SuiteConfig:
    preset: str = "e2"
    n: Optional[int] = None
    max_arity: int = 3
    max_weight: int = 3
    seed: int = DEFAULT_SEED
    generators: Sequence[int] = (0, 1)
    instances: int = 25
    triples: int = 100

    def __post_init__(self):
        if self.max_arity < 1:
            raise ValueError("max_arity must be at least 1")
        if self.max_weight < 1:
            raise ValueError("max_weight must be at least 1")
        if self.n is not None:
            self.preset = f"e{self.n}"
        PresetId.parse(self.preset)

    @property
    def pid(self) -> PresetId:
        return PresetId.parse(self.preset)

    def rng(self, salt: str) -> random.Random:
        return random.Random(f"{self.seed}:{salt}")

    def truncation(self, arity: Optional[int] = None) -> Truncation:
        return Truncation(arity or self.max_arity)


def _need_en(cfg: SuiteConfig) -> PresetId:
    pid = cfg.pid
    if pid.family != "en" or pid.shift:
        raise ValueError(f"this suite needs an unshifted e_n preset, got {cfg.preset}")
    return pid


def _gen_space(degs: Sequence[int]) -> GradedSpace:
    return GradedSpace.from_pairs([(f"x{i}", d) for i, d in enumerate(degs)])


# ---------------------------------------------------------------------------
# operads

def suite_operad_axioms(cfg: SuiteConfig) -> List[Check]:
    o = build_preset(cfg.preset, cfg.truncation())
    out = []
    for r in check_operad_axioms(o, stop_at_first=False):
        out.append(verdict(f"operad-axioms/{cfg.preset}/{r.name}", r.ok, r.witness, {"cases": r.count}))
    return out


def left_normed_count(k: int) -> int:
    """Independent count of e_n(k): set partitions times left-normed words per block.

    A block of size m contributes the (m-1)! left-normed brackets with its
    least label in front.
    """
    total = 0
    for part in set_partitions(list(range(k))):
        words = 1
        for block in part:
            words *= factorial(len(block) - 1)
        total += words
    return total


def suite_basis_count(cfg: SuiteConfig) -> List[Check]:
    _need_en(cfg)
    top = max(cfg.max_arity, 1)
    o = build_preset(cfg.preset, Truncation(top))
    out = []
    for k in range(1, top + 1):
        built, counted = len(o.basis(k)), left_normed_count(k)
        ok = built == counted == factorial(k)
        out.append(verdict(f"basis-count/{cfg.preset}/arity-{k}", ok, f"basis {built}, counter {counted}, k! {factorial(k)}"))
    return out


def suite_hopf(cfg: SuiteConfig) -> List[Check]:
    pid = _need_en(cfg)
    h = hopf_diagonal(pid.n, cfg.truncation())
    bad = h.failures()
    return [verdict(f"hopf/{cfg.preset}/morphism", not bad, "; ".join(bad[:3]))]


def suite_koszul(cfg: SuiteConfig) -> List[Check]:
    kd = koszul_data(cfg.preset, cfg.truncation())
    out = []
    for r in operadic_cobar_resolution(kd):
        betti = {str(d): b for d, b in sorted(r.report.betti.items()) if b}
        out.append(verdict(f"koszul/{cfg.preset}/arity-{r.arity}", r.quasi_iso,
                           f"total {r.report.total()}, target {sum(r.target_dims.values())}",
                           {"betti": betti, "target": {str(d): v for d, v in sorted(r.target_dims.items()) if v}}))
    return out


# ---------------------------------------------------------------------------
# bar and cobar of algebras

def bar_truncation_oracle(cfg: SuiteConfig, w: int):
    """Expected total homology of the weight-w Bar complex at arity cap ``max_arity``.

    Capping the operad arity drops two pieces of the uncapped complex B: bar
    words longer than the cap (a quotient complex) and words containing an
    algebra element of weight above the cap (a subcomplex, reached only by
    d_Bar).  The capped complex is the subquotient in between.  We check that
    B is acyclic and compute the subquotient's homology inside B.
    Returns (B acyclic, expected total, dropped dimension).
    """
    cap = cfg.max_arity
    kd = koszul_data(cfg.preset, Truncation(w))
    x = free_algebra(kd.operad, _gen_space(cfg.generators), w)
    b = bc.BarComplex(kd, x, max_k=w, max_weight=w)
    sp = b.carrier.component(0)
    mine = [i for i in range(sp.dim) if b.weight(0, i) == w]
    full = bc.build_complex(sp, mine, lambda i: b.differential(0, i))

    def kept(i):
        r, _, t = b.carrier.entry(0, i)
        return r <= cap and all(x.carrier.weight(0, wi) <= cap for _, wi in t)

    keep = {i for i in mine if kept(i)}
    sub = bc.build_complex(sp, sorted(keep),
                           lambda i: {y: v for y, v in b.differential(0, i).items() if y in keep})
    return homology(full).total() == 0, homology(sub).total(), len(mine) - len(keep)


def suite_bar(cfg: SuiteConfig) -> List[Check]:
    kd = koszul_data(cfg.preset, cfg.truncation())
    x = free_algebra(kd.operad, _gen_space(cfg.generators), cfg.max_weight)
    b = bc.BarComplex(kd, x, max_k=cfg.max_arity, max_weight=cfg.max_weight)
    out = []
    for w, cx in b.complexes(0).items():
        defect = cx.square_zero_defect()
        out.append(verdict(f"bar/{cfg.preset}/weight-{w}/square-zero", defect is None,
                           "" if defect is None else f"degree {defect}"))
        if defect is None:
            rep = homology(cx)
            acyclic = True
            if w == 0:
                exp_total = 1
            elif w == 1:
                exp_total = len(cfg.generators)
            elif w <= cfg.max_arity:
                exp_total = 0
            else:
                acyclic, exp_total, _ = bar_truncation_oracle(cfg, w)
            out.append(verdict(f"bar/{cfg.preset}/weight-{w}/homology", acyclic and rep.total() == exp_total,
                               f"total {rep.total()}, expected {exp_total}"
                               + ("" if w <= cfg.max_arity else f", uncapped acyclic {acyclic}"),
                               {"betti": {str(d): v for d, v in sorted(rep.betti.items()) if v}}))
    return out


def suite_cobar(cfg: SuiteConfig) -> List[Check]:
    kd = koszul_data(cfg.preset, cfg.truncation())
    x = free_algebra(kd.operad, _gen_space(cfg.generators), cfg.max_weight)
    b = bc.BarComplex(kd, x, max_k=cfg.max_arity, max_weight=cfg.max_weight)
    cob = bc.CobarComplex(kd, b, max_weight=cfg.max_weight)
    defect = cob.complex(0).square_zero_defect()
    return [verdict(f"cobar/{cfg.preset}/square-zero", defect is None, "" if defect is None else f"degree {defect}",
                    {"dims": {str(k): v for k, v in sorted(cob.carrier.dims().items()) if v}})]


def plain_mc_instance(kd, x1: FreeModule, x: FreeModule, rng: random.Random):
    """A random map of free algebras on the same generators, as generator images."""
    sp = x.carrier.component(0)
    gsp = x1.carrier.component(0)
    imgs = {}
    for g in range(len([i for i in range(gsp.dim) if x1.carrier.weight(0, i) == 1])):
        deg = gsp.degrees[g]
        pool = [i for i in range(sp.dim) if sp.degrees[i] == deg]
        w1 = [i for i in pool if x.carrier.weight(0, i) == 1]
        rest = [i for i in pool if i not in w1]
        pick = w1 + (rng.sample(rest, 1) if rest else [])
        imgs[g] = {i: rng.choice(COEFFS) for i in pick}
    return extend_from_generators(x1, x, lambda n, widx: imgs[widx])


def suite_mc(cfg: SuiteConfig) -> List[Check]:
    kd = koszul_data(cfg.preset, cfg.truncation())
    out = []
    # plain: Y = Bar of a free algebra, X free on the same generators
    space = _gen_space(cfg.generators)
    x1 = free_algebra(kd.operad, space, cfg.max_weight)
    x = free_algebra(kd.operad, space, cfg.max_weight)
    y = bc.BarComplex(kd, x1, max_k=cfg.max_arity, max_weight=cfg.max_weight)
    bx = bc.BarComplex(kd, x, max_k=cfg.max_arity, max_weight=cfg.max_weight)
    cob = bc.CobarComplex(kd, y, max_weight=cfg.max_weight)
    rng = cfg.rng("mc-plain")
    bad = []
    for i in range(cfg.instances):
        f = plain_mc_instance(kd, x1, x, rng)
        th = bc.twisting_from_map(y, f, x)
        r = bc.mc_correspondence(kd, th, bx, cob, expected_f=bc.bar_of_map(y, bx, f))
        if not r.ok:
            bad.append(i)
    out.append(verdict(f"mc/{cfg.preset}/plain", not bad, f"{cfg.instances} instances, failing {bad[:5]}"))
    # relative over Q = O: a free bimodule on generators in arities 1 and 2
    o = kd.operad
    t = o.truncation
    vs = SymSeq(t, {1: GradedSpace(["v"], [0]), 2: GradedSpace(["u", "w"], [0, -1])},
                {2: [SparseMatrix.identity(2)]}, name="W")
    wq = GeneratorsTimesOperad(vs, o)
    xf = FreeModule(o, wq.as_with_right())
    xb = OperadBimodule(o)
    yr = bc.BarComplex(kd, xf, max_k=cfg.max_arity)
    bxr = bc.BarComplex(kd, xb, max_k=cfg.max_arity)
    cobr = bc.CobarComplex(kd, yr)
    rng = cfg.rng("mc-relative")
    bad = []
    en = cfg.pid.family == "en"
    for i in range(cfg.instances):
        r1, r2, r3 = (rng.choice(COEFFS) for _ in range(3))

        def w_images(k, wi, r1=r1, r2=r2, r3=r3):
            sp = o.space(k)
            if k == 1:
                return {sp.index[o.unit()]: r1}
            if not en:
                return {}
            return {sp.index[o.c2]: r2} if wi == 0 else {sp.index[o.l2]: r3}

        gi = right_linear_extension(wq, xb, w_images)
        f = extend_from_generators(xf, xb, gi)
        th = bc.twisting_from_map(yr, f, xb)
        r = bc.relative_mc_correspondence(kd, th, bxr, cobr, expected_f=bc.bar_of_map(yr, bxr, f))
        if not r.ok:
            bad.append(i)
    out.append(verdict(f"mc/{cfg.preset}/relative", not bad, f"{cfg.instances} instances, failing {bad[:5]}"))
    return out


def free_core_dims(degs: Sequence[int], max_weight: int, t: Truncation):
    """R(e_n^* o V) against Comm^* o V, both summed over weights 1..max_weight."""
    c = DualCooperad(en_operad(2, t))
    y = bc.cofree_coalgebra(c, _gen_space(degs), max_weight)
    core = bc.cocommutative_core(y)
    return core.carrier.component(0).dim, sum(symmetric_power_dims(list(degs), max_weight).values())


def suite_r_functor(cfg: SuiteConfig) -> List[Check]:
    out = []
    t = Truncation(cfg.max_weight)
    for degs in ((0,), (0, 0), (0, 1)):
        got, want = free_core_dims(degs, cfg.max_weight, t)
        out.append(verdict(f"r-functor/free/{','.join(map(str, degs))}", got == want, f"R {got}, Comm* {want}"))
    return out


# ---------------------------------------------------------------------------
# convolution and deformation complexes

def suite_convolution(cfg: SuiteConfig) -> List[Check]:
    kd = koszul_data(cfg.preset, cfg.truncation())
    t = ConvolutionOperad(kd.cooperad, kd.operad)
    out = []
    fails = [r for r in check_operad_axioms(t, stop_at_first=False) if not r.ok]
    out.append(verdict(f"convolution/{cfg.preset}/operad-axioms", not fails,
                       "; ".join(f"{r.name}: {r.witness}" for r in fails[:3])))
    lie = ConvolutionLie(t)
    pl = check_prelie(lie, cfg.triples, cfg.seed)
    out.append(verdict(f"convolution/{cfg.preset}/pre-lie", pl.ok, f"{pl.count} triples {pl.witness or ''}"))
    jc = check_jacobi(lie.bracket, lie.degree, lambda r: lie.random_element(r), cfg.triples, cfg.seed)
    out.append(verdict(f"convolution/{cfg.preset}/jacobi", jc.ok, f"{jc.count} triples {jc.witness or ''}"))
    return out


def suite_phi(cfg: SuiteConfig) -> List[Check]:
    kd = koszul_data(cfg.preset, cfg.truncation())
    cert = phi_lie_map(kd, cfg.max_arity)
    out = [verdict(f"phi/{cfg.preset}/operad-map", not cert.failures, "; ".join(cert.failures[:3])),
           verdict(f"phi/{cfg.preset}/jacobi-image", not cert.jacobi_image, str(cert.jacobi_image)[:200])]
    expl = explicit_phi_generator(kd)
    out.append(verdict(f"phi/{cfg.preset}/generator", e_equal(cert.omega_image, expl),
                       f"{len(expl.get(2, {}))} terms"))
    if cfg.pid.family == "en" and not cfg.pid.shift and cfg.pid.n % 2 == 0:
        for r in hopf_route_check(kd, cfg.max_arity):
            ok = r.equal and not r.hopf_failures and not r.psi_failures
            out.append(verdict(f"phi/{cfg.preset}/hopf-route/arity-{r.arity}", ok))
    return out


def _def_checks(tag: str, d, cfg: SuiteConfig) -> List[Check]:
    sq = d.check_square_zero()
    out = [verdict(f"def/{tag}/square-zero", sq)]
    lf = d.leibniz_failures()
    out.append(verdict(f"def/{tag}/leibniz", not lf, f"{d.dim}^2 pairs, failing {lf[:3]}"))
    jc = d.jacobi_check(cfg.triples, cfg.seed)
    out.append(verdict(f"def/{tag}/jacobi", jc.ok, f"{jc.count} triples"))
    return out


END_V_STRUCTURES = {
    # images of the product and the bracket in End(a:0, b:1)
    "unital": ({(0, (0, 0)): 1, (1, (0, 1)): 1, (1, (1, 0)): 1}, {}),
    "bracket": ({}, {(0, (0, 1)): 1, (0, (1, 0)): 1}),
}


def end_v_space() -> GradedSpace:
    return GradedSpace.from_pairs([("a", 0), ("b", 1)])


def suite_def(cfg: SuiteConfig) -> List[Check]:
    _need_en(cfg)
    kd = koszul_data(cfg.preset, cfg.truncation())
    out = _def_checks(f"{cfg.preset}->id", def_operadic(kd), cfg)
    if cfg.pid.n == 2:
        for name, (c, l) in sorted(END_V_STRUCTURES.items()):
            g = end_v_map(kd, end_v_space(), c, l)
            out += _def_checks(f"{cfg.preset}->End(V)/{name}", def_operadic(kd, g), cfg)
    gi = operadic_relative_iso(kd, OperadBimodule(kd.operad))
    out.append(verdict(f"def/{cfg.preset}/operadic-vs-relative", gi.ok,
                       f"dims {gi.dims_equal}, bijective {gi.bijective}, d {gi.d_intertwined}, "
                       f"bracket {gi.bracket_intertwined}"))
    return out


def suite_en_action(cfg: SuiteConfig) -> List[Check]:
    pid = _need_en(cfg)
    if pid.n % 2:
        raise ValueError("the action is built for even n only")
    out = []
    kd = koszul_data(cfg.preset, cfg.truncation())
    d = def_operadic(kd)
    act = en_action_on_def(d, kd)
    bad = act.axiom_failures(samples=10, seed=cfg.seed)
    out.append(verdict(f"en-action/{cfg.preset}/algebra-axioms", not bad, "; ".join(bad[:3])))
    un = d.untwisted(["d0", "d_Bar"])
    bad = act.derivation_failures(un.d)
    out.append(verdict(f"en-action/{cfg.preset}/untwisted-derivation", not bad, "; ".join(bad[:3])))
    lp = act.lie_part_mismatches()
    out.append(verdict(f"en-action/{cfg.preset}/lie-part", not lp, f"mismatches {lp[:3]}"))
    rel = def_relative(kd, OperadBimodule(kd.operad))
    lf = rel.leibniz_failures()
    out.append(verdict(f"en-action/{cfg.preset}/twisted-lie-leibniz", not lf, f"failing {lf[:3]}"))
    kd2 = koszul_data(cfg.preset, Truncation(min(2, cfg.max_arity)))
    d2 = def_operadic(kd2)
    sol = en_action_on_def(d2, kd2).solve_homotopy(d2.d)
    out.append(Check(f"en-action/{cfg.preset}/product-homotopy", "reported",
                     f"defect support {sol.defect_norm}, homotopy {'found' if sol.found else 'not found'}",
                     {"found": sol.found, "defect_support": sol.defect_norm, "unknowns": sol.unknowns,
                      "equations": sol.equations}))
    return out


def suite_bar_of_def(cfg: SuiteConfig) -> List[Check]:
    _need_en(cfg)
    kd = koszul_data(cfg.preset, cfg.truncation(min(cfg.max_arity, 2)))
    act = en_action_on_def(def_operadic(kd), kd)
    b = bar_of_def(act)
    total = sum(b.cofree_dims.values())
    return [verdict(f"bar-of-def/{cfg.preset}/square-zero", b.square_zero),
            verdict(f"bar-of-def/{cfg.preset}/core-dims", b.core_dim == total, f"R {b.core_dim}, Comm* {total}")]


def suite_ce(cfg: SuiteConfig) -> List[Check]:
    g = LieData([0, 0], {}, {(0, 1): {1: 1}, (1, 0): {1: -1}}, ["e", "f"])
    c = ce_chain_coalgebra(g, 2)
    betti = c.chain_betti()
    out = [verdict("ce/oracle/[e,f]=f", [betti.get(k, 0) for k in (0, 1, 2)] == [1, 1, 0], str(betti))]
    kd = koszul_data(cfg.preset, cfg.truncation(min(cfg.max_arity, 3)))
    d = def_operadic(kd)
    c = ce_chain_coalgebra(LieData.from_def(d), 2)
    out.append(verdict(f"ce/{cfg.preset}/square-zero", c.square_zero()))
    cf = c.coderivation_failures()
    out.append(verdict(f"ce/{cfg.preset}/coderivation", not cf, str(cf[:3])))
    prims = c.primitives()
    weight_one = all(len(c.monos[j]) == 1 for v in prims for j in v)
    out.append(verdict(f"ce/{cfg.preset}/primitives", weight_one and len(prims) == d.dim, f"{len(prims)} of {d.dim}"))
    return out


def suite_experiment(cfg: SuiteConfig) -> List[Check]:
    _need_en(cfg)
    out = []
    kd = koszul_data(cfg.preset, Truncation(2))
    x = free_algebra(kd.operad, GradedSpace.from_pairs([("x", 0)]), 2)
    r = bracket_vanishing_experiment(def_plain(kd, x, 2))
    out.append(Check(f"experiment/{cfg.preset}/bracket-vanishing/free", "reported",
                     f"nonzero pairs {r.nonzero_pairs}/{r.pairs}, max support {r.max_support}", r.to_json()))
    kd3 = koszul_data(cfg.preset, cfg.truncation(min(cfg.max_arity, 3)))
    r = bracket_vanishing_experiment(def_relative(kd3, OperadBimodule(kd3.operad)))
    out.append(Check(f"experiment/{cfg.preset}/bracket-vanishing/relative", "reported",
                     f"nonzero pairs {r.nonzero_pairs}/{r.pairs}, max support {r.max_support}", r.to_json()))
    return out


SUITES: Dict[str, Callable[[SuiteConfig], List[Check]]] = {
    "operad-axioms": suite_operad_axioms,
    "basis-count": suite_basis_count,
    "hopf": suite_hopf,
    "koszul": suite_koszul,
    "bar": suite_bar,
    "cobar": suite_cobar,
    "mc": suite_mc,
    "r-functor": suite_r_functor,
    "convolution": suite_convolution,
    "phi": suite_phi,
    "def": suite_def,
    "en-action": suite_en_action,
    "bar-of-def": suite_bar_of_def,
    "ce": suite_ce,
    "experiment": suite_experiment,
}


def run_suite(name: str, cfg: SuiteConfig) -> List[Check]:
    """Run one suite; an exception becomes a single failing check."""
    t0 = time.perf_counter()
    try:
        checks = SUITES[name](cfg)
    except Exception as ex:  # noqa: BLE001 - reported as a failing check
        checks = [Check(f"{name}/error", "fail", f"{type(ex).__name__}: {ex}")]
    dt = (time.perf_counter() - t0) / max(len(checks), 1)
    for c in checks:
        c.seconds = dt
    return checks
