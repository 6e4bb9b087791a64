"""Convolution operads, deformation complexes and their algebraic structure.

``ConvolutionOperad(C, P)`` realises Hom_lev(C, P) for C = K^* a dual
cooperad: the key ``(c, p)`` is the elementary map sending the C-basis
vector ``c`` to ``p`` and every other basis vector to 0.  Elements of the
convolution Lie algebra are the Sigma-invariant elements, stored as
``{arity: {key: coefficient}}`` dicts and truncated at the operad's
maximal arity (the part of higher arity is an ideal, so every structure
survives the truncation).

Two brackets live on deformation complexes:

* the *insertion* bracket, from the pre-Lie product f * g = sum of
  unshuffled f o_0 g, used by Def_Op(O -> P);
* the *cup* bracket m(a, b) = omega(a, b), root composition with the
  Lie{1}-generator omega, used by Def_0(X, Y) and transported to the
  shifted grading by [a, b] = (-1)^{|a|} m(a, b).
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, permutations
from typing import Callable, Dict, Hashable, List, Optional, Sequence, Tuple

from .exact import ChainComplex, SparseMatrix, homology, kernel_vectors, row_space_basis, solve_linear
from .operads import (DualCooperad, Hadamard, KoszulData, Operad, OperadMap, Shifted, hopf_diagonal,
                      lie_operad)
from .symseq import Truncation
from .tensor import koszul_sign, shuffles, vadd, vscale

Elem = Dict[int, Dict[Hashable, Fraction]]

COEFFS = (-3, -2, -1, 1, 2, 3)


def _sgn(e: int) -> int:
    return -1 if e % 2 else 1


def _clean(v: dict) -> dict:
    return {k: c for k, c in v.items() if c}


# ---------------------------------------------------------------------------
# element arithmetic

def e_clean(e: Elem) -> Elem:
    out = {}
    for k, v in e.items():
        v = _clean(v)
        if v:
            out[k] = v
    return out


def e_add(acc: Elem, e: Elem, s=1) -> Elem:
    for k, v in e.items():
        vadd(acc.setdefault(k, {}), v, s)
    return acc


def e_sum(*es: Elem) -> Elem:
    out: Elem = {}
    for e in es:
        e_add(out, e)
    return e_clean(out)


def e_scale(e: Elem, s) -> Elem:
    return e_clean({k: vscale(v, s) for k, v in e.items()})


def e_equal(a: Elem, b: Elem) -> bool:
    return e_clean(a) == e_clean(b)


def e_support(e: Elem) -> int:
    return sum(len(v) for v in e_clean(e).values())


def unit_vec(p: Operad) -> dict:
    """The unit of P as a vector (End-type operads only offer unit_vec)."""
    if hasattr(p, "unit_vec"):
        return dict(p.unit_vec())
    return {p.unit(): 1}


# ---------------------------------------------------------------------------
# the convolution operad

class ConvolutionOperad(Operad):
    """Hom_lev(C, P) with composition through Delta_i on C and o_i on P.

    ``(f o_i g)(z) = sum (-1)^{|g||z1|} f(z1) o_i g(z2)`` over
    Delta_i(z) = sum z1 (x) z2, and ``(s.f)(z) = s.f(s^{-1} z)``.
    """

    def __init__(self, c: DualCooperad, p: Operad, name: str = ""):
        if c.max_arity != p.max_arity:
            raise ValueError("truncation mismatch")
        super().__init__(p.truncation)
        self.co, self.target = c, p
        self.name = name or f"Hom({c.name},{p.name})"
        self._inv: Dict[tuple, Dict[tuple, list]] = {}

    def _basis(self, k):
        return [(a, x) for a in self.co.basis(k) for x in self.target.basis(k)]

    def degree(self, k, key):
        a, x = key
        return self.target.degree(k, x) - self.co.degree(k, a)

    def key_name(self, k, key):
        a, x = key
        return f"[{self.co.key_name(k, a)}->{self.target.key_name(k, x)}]"

    def act(self, p, key):
        # the functional picking out the C-vector a transforms like K = C^*
        a, x = key
        va, vx = self.co.op.act(p, a), self.target.act(p, x)
        return {(b, y): ca * cx for b, ca in va.items() for y, cx in vx.items()}

    def _pairs(self, m, i, n):
        key = (m, i, n)
        inv = self._inv.get(key)
        if inv is None:
            inv = {}
            for z, row in self.co.table(m, i, n).items():
                for ab, c in row.items():
                    inv.setdefault(ab, []).append((z, c))
            self._inv[key] = inv
        return inv

    def _comp(self, m, i, n, a, b):
        a1, x1 = a
        b1, x2 = b
        hits = self._pairs(m, i, n).get((a1, b1))
        if not hits:
            return {}
        s = _sgn(self.degree(n, b) * self.co.degree(m, a1))
        px = self.target.comp(m, i, n, x1, x2)
        out = {}
        for z, c in hits:
            for y, cy in px.items():
                out[(z, y)] = out.get((z, y), 0) + s * c * cy
        return out

    def unit(self):
        return (self.co.counit(), self.target.unit())

    def unit_vec(self):
        u = self.co.counit()
        return {(u, y): c for y, c in unit_vec(self.target).items()}

    def differential(self, k, key):
        a, x = key
        return {(a, y): c for y, c in self.target.differential(k, x).items() if c}


def convolution_operad(c: DualCooperad, p: Operad) -> ConvolutionOperad:
    return ConvolutionOperad(c, p)


def hadamard_to_convolution(h: Hadamard, t: ConvolutionOperad) -> OperadMap:
    """K (x)lev P -> Hom_lev(K^*, P), k (x) p -> (-1)^{|k||p|} [k -> p]."""
    k_op, p_op = h.left, h.right

    def image(k, key):
        a, x = key
        return {(a, x): _sgn(k_op.degree(k, a) * p_op.degree(k, x))}

    return OperadMap(h, t, image, name="Psi")


# ---------------------------------------------------------------------------
# the convolution pre-Lie / Lie algebra on invariants

class ConvolutionLie:
    """Sigma-invariant part of a convolution operad, arities min_arity..max.

    The basis is an exact reduced row echelon basis of the Reynolds images,
    degree by degree, so coordinates are read off at pivot columns.
    """

    def __init__(self, t: ConvolutionOperad, max_arity: Optional[int] = None, min_arity: int = 1):
        self.t = t
        self.max_arity = max_arity or t.max_arity
        self.min_arity = min_arity
        self.basis: List[Tuple[int, dict]] = []
        self.pivots: List[Tuple[int, Hashable]] = []
        self.degrees: List[int] = []
        self._pivot_index: Dict[Tuple[int, Hashable], int] = {}
        for k in range(min_arity, self.max_arity + 1):
            self._build(k)

    def _build(self, k: int):
        sp = self.t.space(k)
        perms = list(permutations(range(k)))
        by_deg: Dict[int, list] = {}
        for x in sp.keys:
            v: dict = {}
            for p in perms:
                vadd(v, self.t.act(p, x), 1)
            v = _clean(v)
            if v:
                by_deg.setdefault(self.t.degree(k, x), []).append({sp.index[y]: c for y, c in v.items()})
        for d in sorted(by_deg):
            for row in row_space_basis(by_deg[d]):
                piv = min(row)
                vec = {sp.keys[j]: c for j, c in row.items()}
                self._pivot_index[(k, sp.keys[piv])] = len(self.basis)
                self.basis.append((k, vec))
                self.pivots.append((k, sp.keys[piv]))
                self.degrees.append(d)

    @property
    def dim(self) -> int:
        return len(self.basis)

    def dims(self) -> Dict[int, int]:
        out: Dict[int, int] = {}
        for k, _ in self.basis:
            out[k] = out.get(k, 0) + 1
        return out

    def element(self, i: int) -> Elem:
        k, v = self.basis[i]
        return {k: dict(v)}

    def from_coords(self, coords: Dict[int, object]) -> Elem:
        out: Elem = {}
        for i, c in coords.items():
            k, v = self.basis[i]
            vadd(out.setdefault(k, {}), v, c)
        return e_clean(out)

    def coords(self, e: Elem, check: bool = True) -> Dict[int, Fraction]:
        e = self.truncate(e)
        out = {}
        for k, v in e.items():
            for x, c in v.items():
                i = self._pivot_index.get((k, x))
                if i is not None:
                    out[i] = Fraction(c)
        if check and not e_equal(self.from_coords(out), e):
            raise ValueError("element is not Sigma-invariant")
        return out

    def truncate(self, e: Elem) -> Elem:
        return e_clean({k: v for k, v in e.items() if self.min_arity <= k <= self.max_arity})

    def degree(self, e: Elem) -> Optional[int]:
        degs = {self.t.degree(k, x) for k, v in e_clean(e).items() for x in v}
        if len(degs) > 1:
            raise ValueError("inhomogeneous element")
        return degs.pop() if degs else None

    def is_invariant(self, e: Elem) -> bool:
        for k, v in e_clean(e).items():
            for j in range(k - 1):
                p = tuple(j + 1 if a == j else j if a == j + 1 else a for a in range(k))
                if not e_equal({k: self.t.act_vec(p, v)}, {k: v}):
                    return False
        return True

    # -- products
    def star(self, f: Elem, g: Elem) -> Elem:
        """Pre-Lie product: sum over unshuffles of f o_0 g."""
        out: Elem = {}
        for m, fv in f.items():
            for n, gv in g.items():
                total = m + n - 1
                if total > self.max_arity or not fv or not gv:
                    continue
                h = self.t.comp_vec(m, 0, n, fv, gv)
                if not h:
                    continue
                acc = out.setdefault(total, {})
                for first, rest in shuffles(n, m - 1):
                    vadd(acc, self.t.act_vec(tuple(first) + tuple(rest), h))
        return e_clean(out)

    def bracket(self, f: Elem, g: Elem) -> Elem:
        df, dg = self.degree(f), self.degree(g)
        if df is None or dg is None:
            return {}
        return e_sum(self.star(f, g), e_scale(self.star(g, f), -_sgn(df * dg)))

    def root(self, mu: Tuple[int, dict], children: Sequence[Elem]) -> Elem:
        """Sum over block assignments of mu(f_1, ..., f_r) (root composition)."""
        r, mv = mu
        if len(children) != r:
            raise ValueError("arity mismatch")
        out: Elem = {}

        def rec(j, comps):
            if j == r:
                total = sum(m for m, _ in comps)
                if total > self.max_arity:
                    return
                acc = out.setdefault(total, {})
                for blocks in _block_assignments(total, [m for m, _ in comps]):
                    vadd(acc, self.t.compose_blocks(r, mv, [(b, v) for b, (_, v) in zip(blocks, comps)]))
                return
            for m, v in children[j].items():
                if v:
                    rec(j + 1, comps + [(m, v)])

        rec(0, [])
        return e_clean(out)

    def differential(self, f: Elem) -> Elem:
        """Internal differential from P."""
        return e_clean({k: self.t.d_vec(k, v) for k, v in f.items()})

    # -- sampling
    def random_element(self, rng: random.Random, degree: Optional[int] = None, terms: int = 3) -> Elem:
        idx = [i for i, d in enumerate(self.degrees) if degree is None or d == degree]
        if degree is None and idx:
            degree = self.degrees[rng.choice(idx)]
            idx = [i for i in idx if self.degrees[i] == degree]
        if not idx:
            return {}
        pick = rng.sample(idx, min(terms, len(idx)))
        return self.from_coords({i: rng.choice(COEFFS) for i in pick})


def _block_assignments(total: int, sizes: Sequence[int]):
    """Ordered set partitions of range(total) into blocks of the given sizes."""
    def rec(avail, j):
        if j == len(sizes):
            yield []
            return
        for blk in combinations(avail, sizes[j]):
            rest = tuple(a for a in avail if a not in blk)
            for tail in rec(rest, j + 1):
                yield [blk] + tail
    yield from rec(tuple(range(total)), 0)


@dataclass
class IdentityCheck:
    name: str
    ok: bool
    count: int
    witness: Optional[str] = None


def check_prelie(lie: ConvolutionLie, triples: int = 100, seed: int = 0) -> IdentityCheck:
    """Right-symmetry of the associator (f*g)*h - f*(g*h) in (g, h)."""
    rng = random.Random(seed)
    for n in range(triples):
        f, g, h = (lie.random_element(rng) for _ in range(3))
        dg, dh = lie.degree(g), lie.degree(h)
        if dg is None or dh is None:
            continue
        a1 = e_sum(lie.star(lie.star(f, g), h), e_scale(lie.star(f, lie.star(g, h)), -1))
        a2 = e_sum(lie.star(lie.star(f, h), g), e_scale(lie.star(f, lie.star(h, g)), -1))
        if not e_equal(a1, e_scale(a2, _sgn(dg * dh))):
            return IdentityCheck("pre-Lie", False, n, f"triple #{n}")
    return IdentityCheck("pre-Lie", True, triples)


def check_jacobi(bracket: Callable[[Elem, Elem], Elem], degree: Callable[[Elem], Optional[int]],
                 sample: Callable[[random.Random], Elem], triples: int = 100, seed: int = 0,
                 name: str = "Jacobi") -> IdentityCheck:
    """Graded Jacobi and antisymmetry on random triples."""
    rng = random.Random(seed)
    for n in range(triples):
        a, b, c = sample(rng), sample(rng), sample(rng)
        da, db, dc = degree(a), degree(b), degree(c)
        if None in (da, db, dc):
            continue
        ab, ba = bracket(a, b), bracket(b, a)
        if not e_equal(ab, e_scale(ba, -_sgn(da * db))):
            return IdentityCheck(name, False, n, f"antisymmetry #{n}")
        j = e_sum(e_scale(bracket(a, bracket(b, c)), _sgn(da * dc)),
                  e_scale(bracket(b, bracket(c, a)), _sgn(db * da)),
                  e_scale(bracket(c, ab), _sgn(dc * db)))
        if j:
            return IdentityCheck(name, False, n, f"Jacobi #{n}")
    return IdentityCheck(name, True, triples)


# ---------------------------------------------------------------------------
# maps out of Lie{1}

class SignConventionError(ArithmeticError):
    """The image of a relation is nonzero: a sign convention is broken."""


def _comb(o: Operad, gen: dict, k: int) -> dict:
    cur = gen
    for m in range(3, k + 1):
        cur = o.comp_vec(2, 0, m - 1, gen, cur)
    return cur


def map_from_binary_generator(src: Operad, gen: dict, tgt: Operad, image: dict,
                              max_arity: Optional[int] = None, name: str = "f") -> OperadMap:
    """Extend gen -> image to a morphism, for src generated by one binary gen.

    In arity k every basis key is written through the k! relabelled left
    combs; each linear relation among the combs must map to zero in tgt,
    otherwise SignConventionError is raised with the offending relation.
    """
    top = max_arity or min(src.max_arity, tgt.max_arity)
    table: Dict[Tuple[int, Hashable], dict] = {}
    for k in range(1, top + 1):
        if k == 1:
            for key in src.basis(1):
                table[(1, key)] = {x: c for x, c in unit_vec(tgt).items()}
            continue
        perms = list(permutations(range(k)))
        src_combs = [src.act_vec(p, _comb(src, gen, k)) for p in perms]
        tgt_combs = [tgt.act_vec(p, _comb(tgt, image, k)) for p in perms]
        sp = src.space(k)
        m = SparseMatrix.from_columns(sp.dim, len(perms),
                                      {j: {sp.index[x]: c for x, c in v.items() if c}
                                       for j, v in enumerate(src_combs)})
        for rel in kernel_vectors(m):
            img: dict = {}
            for j, c in rel.items():
                vadd(img, tgt_combs[j], c)
            if _clean(img):
                raise SignConventionError(f"relation in arity {k} maps to {_clean(img)}")
        for key in sp.keys:
            x = solve_linear(m, {sp.index[key]: 1})
            if x is None:
                raise ValueError(f"{src.name} is not generated by the binary generator in arity {k}")
            img = {}
            for j, c in enumerate(x):
                if c:
                    vadd(img, tgt_combs[j], c)
            table[(k, key)] = _clean(img)

    def apply(k, key):
        if k > top:
            raise ValueError("outside the certified truncation")
        return table[(k, key)]

    return OperadMap(src, tgt, apply, name=name)


def lie1_operad(t: Truncation) -> Shifted:
    return Shifted(lie_operad(t), 1)


def lie1_generator(lie1: Shifted) -> dict:
    return {(lie1.base.l2, 0): 1}


def kappa_element(kd: KoszulData, t: Optional[ConvolutionOperad] = None) -> Elem:
    """The twisting morphism as the arity-2 element of Hom(C, O)."""
    out = {}
    for y, img in kd.kappa.items():
        for x, c in img.items():
            out[(y, x)] = out.get((y, x), 0) + c
    return {2: _clean(out)}


def explicit_phi_generator(kd: KoszulData) -> Elem:
    """sum_i t_i[1]^* (x) t_i from the generator pairing of the presets."""
    out = {}
    for okey, ckey in kd.pairing:
        # extend to every O(2) basis vector through the Sigma_2 orbit
        for p in ((0, 1), (1, 0)):
            for x, cx in kd.operad.act(p, okey).items():
                for y, cy in kd.cooperad.act(p, ckey).items():
                    out[(y, x)] = cx * cy
    return {2: _clean(out)}


@dataclass
class PhiCertificate:
    phi: OperadMap
    omega_image: Elem
    jacobi_image: Elem
    kappa_star_kappa: Elem
    failures: List[str]

    @property
    def ok(self) -> bool:
        return not self.jacobi_image and not self.kappa_star_kappa and not self.failures


def phi_lie_map(kd: KoszulData, max_arity: int = 3) -> PhiCertificate:
    """phi: Lie{1} -> Hom_Op(O^!, O), omega -> kappa, with its certificates."""
    t = ConvolutionOperad(kd.cooperad, kd.operad)
    lie1 = lie1_operad(kd.operad.truncation)
    om = kappa_element(kd)
    phi = map_from_binary_generator(lie1, lie1_generator(lie1), t, om[2], max_arity, name="phi")
    jac = jacobi_image(t, om[2])
    lie = ConvolutionLie(t, max_arity=min(max_arity, t.max_arity), min_arity=2)
    kk = lie.star(om, om)
    return PhiCertificate(phi, om, jac, kk, phi.failures(max_arity))


def jacobi_image(t: Operad, w: dict) -> Elem:
    """The Jacobi relation of Lie{1} evaluated on w in arity 3."""
    lie1 = lie1_operad(Truncation(3))
    gen = lie1_generator(lie1)
    perms = list(permutations(range(3)))
    combs = [lie1.act_vec(p, _comb(lie1, gen, 3)) for p in perms]
    sp = lie1.space(3)
    m = SparseMatrix.from_columns(sp.dim, len(perms), {j: {sp.index[x]: c for x, c in v.items() if c}
                                                       for j, v in enumerate(combs)})
    img: dict = {}
    wc = _comb(t, w, 3)
    for rel in kernel_vectors(m):
        for j, c in rel.items():
            vadd(img, t.act_vec(perms[j], wc), c)
    return {3: _clean(img)} if _clean(img) else {}


def shifted_hopf(n: int, t: Truncation) -> OperadMap:
    """e_n{n} -> e_n{n} (x)lev e_n induced by the Hopf diagonal (n even)."""
    if n % 2:
        raise ValueError("only even n: odd shifts carry signs not modelled here")
    hop = hopf_diagonal(n, t)
    en = hop.source
    src = Shifted(en, n)
    tgt = Hadamard(Shifted(en, n), en)

    def image(k, key):
        x, _ = key
        return {((a, 0), b): c for (a, b), c in hop.apply(k, x).items()}

    return OperadMap(src, tgt, image, name="Delta{n}")


@dataclass
class HopfRouteCheck:
    arity: int
    equal: bool
    hopf_failures: List[str]
    psi_failures: List[str]


def hopf_route_check(kd: KoszulData, max_arity: int = 3) -> List[HopfRouteCheck]:
    """Lie{1} -> e_n{n} -> e_n{n} (x)lev e_n -> Hom(e_n^!, e_n) against phi."""
    pid = kd.operad.preset
    if pid.family != "en" or pid.shift:
        raise ValueError("hopf_route_check needs an unshifted e_n preset")
    n = pid.n
    tr = kd.operad.truncation
    hop = shifted_hopf(n, tr)
    en_n = hop.source
    lie1 = lie1_operad(tr)
    iota = map_from_binary_generator(lie1, lie1_generator(lie1), en_n, {(en_n.base.l2, 0): 1}, max_arity)
    t = ConvolutionOperad(kd.cooperad, kd.operad)
    psi = hadamard_to_convolution(hop.target, t)
    cert = phi_lie_map(kd, max_arity)
    out = []
    hf = hop.failures(max_arity)
    pf = psi.failures(max_arity)
    for k in range(2, max_arity + 1):
        eq = True
        for key in lie1.basis(k):
            a = psi.apply_vec(k, hop.apply_vec(k, iota.apply(k, key)))
            if _clean(a) != _clean(cert.phi.apply(k, key)):
                eq = False
        out.append(HopfRouteCheck(k, eq, hf, pf))
    return out


# ---------------------------------------------------------------------------
# deformation complexes

class NotMaurerCartanElement(ValueError):
    def __init__(self, residual: Elem):
        super().__init__(f"Maurer-Cartan residual is nonzero: {residual}")
        self.residual = residual


class NotSquareZero(ArithmeticError):
    pass


class DefComplex:
    """A dg Lie algebra on the invariants of a convolution operad.

    ``shift`` relates gradings: Lie degree = convolution degree + shift.
    ``bracket_kind`` is ``"insertion"`` (pre-Lie commutator) or ``"cup"``
    (root composition with ``cup_root``).  The differential is the sum of
    the named ``parts``, each a linear map on elements.
    """

    def __init__(self, kind: str, lie: ConvolutionLie, shift: int, bracket_kind: str,
                 parts: Dict[str, Callable[[Elem], Elem]], cup_root: Optional[dict] = None,
                 name: str = "", data: Optional[dict] = None):
        if bracket_kind not in ("insertion", "cup"):
            raise ValueError(bracket_kind)
        if bracket_kind == "cup" and cup_root is None:
            raise ValueError("cup bracket needs its binary root")
        self.kind, self.lie, self.shift, self.bracket_kind = kind, lie, shift, bracket_kind
        self.parts = dict(parts)
        self.cup_root = cup_root
        self.name = name or kind
        self.data = data or {}
        self._dmat: Optional[SparseMatrix] = None
        self._btab: Dict[Tuple[int, int], Dict[int, Fraction]] = {}

    # -- grading
    @property
    def dim(self) -> int:
        return self.lie.dim

    def lie_degree(self, e: Elem) -> Optional[int]:
        d = self.lie.degree(e)
        return None if d is None else d + self.shift

    def degrees(self) -> List[int]:
        return [d + self.shift for d in self.lie.degrees]

    # -- structure
    def d(self, e: Elem) -> Elem:
        out: Elem = {}
        for part in self.parts.values():
            e_add(out, part(e))
        return self.lie.truncate(out)

    def cup(self, a: Elem, b: Elem) -> Elem:
        """The symmetric degree-one operation m(a, b) = omega(a, b)."""
        return self.lie.root((2, self.cup_root), [a, b])

    def bracket(self, a: Elem, b: Elem) -> Elem:
        if self.bracket_kind == "insertion":
            return self.lie.bracket(a, b)
        da = self.lie.degree(a)
        if da is None:
            return {}
        return e_scale(self.cup(a, b), _sgn(da))

    def ad(self, theta: Elem) -> Callable[[Elem], Elem]:
        return lambda e: self.bracket(theta, e)

    def mc_residual(self, theta: Elem) -> Elem:
        return self.lie.truncate(e_sum(self.d(theta), e_scale(self.bracket(theta, theta), Fraction(1, 2))))

    def twist(self, theta: Elem, name: str = "twist") -> "DefComplex":
        """d + ad(theta), after checking the Maurer-Cartan equation."""
        res = self.mc_residual(theta)
        if res:
            raise NotMaurerCartanElement(res)
        parts = dict(self.parts)
        parts[name] = self.ad(theta)
        return DefComplex(self.kind, self.lie, self.shift, self.bracket_kind, parts, self.cup_root,
                          self.name, self.data)

    def untwisted(self, keep: Sequence[str]) -> "DefComplex":
        return DefComplex(self.kind, self.lie, self.shift, self.bracket_kind,
                          {k: v for k, v in self.parts.items() if k in keep}, self.cup_root, self.name, self.data)

    # -- matrices
    def d_matrix(self) -> SparseMatrix:
        if self._dmat is None:
            cols = {j: self.lie.coords(self.d(self.lie.element(j))) for j in range(self.dim)}
            self._dmat = SparseMatrix.from_columns(self.dim, self.dim, cols)
        return self._dmat

    def bracket_coords(self, i: int, j: int) -> Dict[int, Fraction]:
        key = (i, j)
        if key not in self._btab:
            self._btab[key] = self.lie.coords(self.bracket(self.lie.element(i), self.lie.element(j)))
        return self._btab[key]

    def chain_complex(self) -> ChainComplex:
        degs = self.degrees()
        if not degs:
            return ChainComplex([], {})
        lo, hi = min(degs), max(degs)
        by = {d: [i for i, x in enumerate(degs) if x == d] for d in range(lo, hi + 1)}
        pos = {i: (d, j) for d, ids in by.items() for j, i in enumerate(ids)}
        dm = self.d_matrix()
        blocks: Dict[int, dict] = {}
        for (r, c), v in dm.entries.items():
            dr, jr = pos[r]
            dc, jc = pos[c]
            if dr != dc + 1:
                raise ValueError("differential is not of degree +1")
            blocks.setdefault(dc, {}).setdefault(jr, {})[jc] = v
        diffs = {d: SparseMatrix.from_rows(len(by.get(d + 1, [])), len(by[d]), rows) for d, rows in blocks.items()}
        names = {d: [self.basis_name(i) for i in ids] for d, ids in by.items()}
        return ChainComplex(list(range(lo, hi + 1)), {d: len(ids) for d, ids in by.items()}, diffs, names)

    def basis_name(self, i: int) -> str:
        k, v = self.lie.basis[i]
        x = self.lie.pivots[i][1]
        return f"a{k}:{self.lie.t.key_name(k, x)}+{len(v) - 1}"

    # -- checks
    def check_square_zero(self) -> bool:
        m = self.d_matrix()
        return (m @ m).is_zero()

    def leibniz_failures(self, pairs: Optional[Sequence[Tuple[int, int]]] = None) -> List[Tuple[int, int]]:
        """Pairs of basis indices where d[a,b] != [da,b] + (-1)^{|a|}[a,db]."""
        degs = self.degrees()
        if pairs is None:
            pairs = [(i, j) for i in range(self.dim) for j in range(self.dim)]
        bad = []
        for i, j in pairs:
            a, b = self.lie.element(i), self.lie.element(j)
            lhs = self.d(self.bracket(a, b))
            rhs = e_sum(self.bracket(self.d(a), b), e_scale(self.bracket(a, self.d(b)), _sgn(degs[i])))
            if not e_equal(lhs, self.lie.truncate(rhs)):
                bad.append((i, j))
        return bad

    def jacobi_check(self, triples: int = 100, seed: int = 0) -> IdentityCheck:
        return check_jacobi(self.bracket, self.lie_degree, lambda r: self.lie.random_element(r), triples, seed)

    def homology(self):
        return homology(self.chain_complex())

    def to_json(self) -> dict:
        out = {"kind": self.kind, "name": self.name, "shift": self.shift, "bracket_kind": self.bracket_kind,
               "arity_dims": {str(k): v for k, v in sorted(self.lie.dims().items())},
               "differential_parts": sorted(self.parts),
               "square_zero": self.check_square_zero(),
               "complex": self.chain_complex().to_json()}
        trip = []
        for i in range(self.dim):
            for j in range(self.dim):
                for k, c in sorted(self.bracket_coords(i, j).items()):
                    trip.append([i, j, k, str(c)])
        out["bracket"] = trip
        return out


def _right_insertion(lie: ConvolutionLie, w: Elem) -> Callable[[Elem], Elem]:
    """a -> -(-1)^{|a|} a * w, the right half of ad(w)."""
    def f(a):
        da = lie.degree(a)
        if da is None:
            return {}
        return e_scale(lie.star(a, w), -_sgn(da))
    return f


def omega_g(kd: KoszulData, t: ConvolutionOperad, g: Optional[OperadMap]) -> Elem:
    """g o kappa restricted to the cogenerators, an arity-2 element of Hom(C, P)."""
    out = {}
    for y, img in kd.kappa.items():
        v = g.apply_vec(2, img) if g is not None else img
        for x, c in v.items():
            out[(y, x)] = out.get((y, x), 0) + c
    return {2: _clean(out)}


def def_operadic(kd: KoszulData, g: Optional[OperadMap] = None, max_arity: Optional[int] = None,
                 name: str = "") -> DefComplex:
    """Def_Op(O -g-> P) = (Hom_Sigma(O^!, P), d_0 + ad(omega_g)), insertion bracket."""
    p = g.target if g is not None else kd.operad
    t = ConvolutionOperad(kd.cooperad, p)
    lie = ConvolutionLie(t, max_arity)
    om = omega_g(kd, t, g)
    if lie.star(om, om):
        raise NotMaurerCartanElement(lie.star(om, om))
    # ad(omega) = left insertion (the d_id analogue) + right insertion (d_Bar)
    parts = {"d0": lie.differential, "d_Bar": _right_insertion(lie, om), "d_id": lambda e: lie.star(om, e)}
    return DefComplex("operadic", lie, 0, "insertion", parts, om[2], name or f"Def_Op({kd.operad.name}->{p.name})",
                      {"omega": om, "map": g})


def def_relative(kd: KoszulData, x, max_arity: Optional[int] = None, kind: str = "relative",
                 name: str = "") -> DefComplex:
    """Def(X -id-> X)_Q on Hom_Sigma(C, [X, X]_Q)[-1] with the cup bracket.

    The differential is d_Bar + d_id: d_Bar is the right insertion of the
    structure element rho o kappa, d_id = ad(theta) for theta the identity
    of X, the Maurer-Cartan element Bar(id)_pr.  For an arity-0 X (an
    algebra) this is the plain complex with Q = I.
    """
    from .modules import bimodule_to_operad_map
    rho, end = bimodule_to_operad_map(x, max_arity)
    t = ConvolutionOperad(kd.cooperad, end)
    lie = ConvolutionLie(t, max_arity)
    om = omega_g(kd, t, rho)
    theta = {1: t.unit_vec()}
    base = DefComplex(kind, lie, 1, "cup", {"d0": lie.differential, "d_Bar": _right_insertion(lie, om)}, om[2],
                      name or "Def({0}->{0})".format(getattr(x, "name", "X")), {"omega": om, "theta": theta, "rho": rho})
    return base.twist(theta, "d_id")


def def_plain(kd: KoszulData, x, max_arity: Optional[int] = None) -> DefComplex:
    return def_relative(kd, x, max_arity, kind="plain")


def end_v_map(kd: KoszulData, v, c_img: dict, l_img: dict):
    """An operad map e_n -> End(V) from images of the generators."""
    from .operads import EndOperad, en_map_from_generators
    end = EndOperad(kd.operad.truncation, v)
    g = en_map_from_generators(kd.operad, end, c_img, l_img, name="e->End(V)")
    bad = g.failures()
    if bad:
        raise ValueError(f"not an operad map: {bad[:3]}")
    return g


# ---------------------------------------------------------------------------
# the operadic versus relative comparison

@dataclass
class OperadicRelativeIso:
    dims_equal: bool
    bijective: bool
    d_intertwined: bool
    bracket_intertwined: bool
    rho_failures: List[str]
    dims: Dict[int, int]

    @property
    def ok(self) -> bool:
        return (self.dims_equal and self.bijective and self.d_intertwined and self.bracket_intertwined
                and not self.rho_failures)


def operadic_relative_iso(kd: KoszulData, x, max_arity: Optional[int] = None) -> OperadicRelativeIso:
    """Def(X -id-> X)_Q[1] against Def_Op(O -> [X, X]_Q) through rho: O -> [X, X]_Q.

    The map is f -> rho o f arity-wise.  On the relative side the
    differential is d_Bar + d_id and the bracket is the insertion bracket
    computed with the evaluation composition of [X, X]_Q.
    """
    op = def_operadic(kd, None, max_arity)
    rel = def_relative(kd, x, max_arity)
    rho = rel.data["rho"]
    fails = rho.failures(max_arity)
    lo, lr = op.lie, rel.lie

    def phi(e: Elem) -> Elem:
        out: Elem = {}
        for k, v in e.items():
            acc = out.setdefault(k, {})
            for (y, p), c in v.items():
                for q, cq in rho.apply(k, p).items():
                    acc[(y, q)] = acc.get((y, q), 0) + c * cq
        return e_clean(out)

    cols = {j: lr.coords(phi(lo.element(j))) for j in range(lo.dim)}
    m = SparseMatrix.from_columns(lr.dim, lo.dim, cols)
    from .exact import rank
    bij = lo.dim == lr.dim and rank(m) == lo.dim
    d_ok = all(e_equal(phi(op.d(lo.element(j))), rel.d(phi(lo.element(j)))) for j in range(lo.dim))
    b_ok = True
    for i in range(lo.dim):
        for j in range(lo.dim):
            a, b = lo.element(i), lo.element(j)
            if not e_equal(phi(op.bracket(a, b)), lr.bracket(phi(a), phi(b))):
                b_ok = False
                break
        if not b_ok:
            break
    return OperadicRelativeIso(lo.dims() == lr.dims(), bij, d_ok, b_ok, fails, lo.dims())


# ---------------------------------------------------------------------------
# the e_n{n}-action on Def[1]

def _bilinear_products(lie: ConvolutionLie, op: Callable[[Elem, Elem], Elem]) -> Dict[Tuple[int, int], Dict[int, Fraction]]:
    return {(i, j): lie.coords(op(lie.element(i), lie.element(j)))
            for i in range(lie.dim) for j in range(lie.dim)}


@dataclass
class HomotopySolve:
    """Outcome of solving defect = [d, H] for a bilinear H of the same arity."""

    defect_norm: int
    found: bool
    unknowns: int
    equations: int
    support: int = 0
    residual: Optional[List] = None


class EnAction:
    """e_n{n} acting on the carrier of a Def complex (convolution grading).

    An operation mu acts by root composition with iota(mu), the image of
    mu under e_n{n} -> e_n{n} (x)lev e_n -> e_n{n} (x)lev P -> Hom_lev(C, P),
    the middle arrow being id (x) g for the structure map g.
    """

    def __init__(self, d: DefComplex, kd: KoszulData, g: Optional[OperadMap]):
        pid = kd.operad.preset
        if pid.family != "en" or pid.shift:
            raise ValueError("the action needs an unshifted e_n preset")
        self.d, self.kd, self.g = d, kd, g
        self.lie = d.lie
        self.hop = shifted_hopf(pid.n, kd.operad.truncation)
        self.operad = self.hop.source
        base = self.operad.base
        self.product_key = (base.c2, 0)
        self.bracket_key = (base.l2, 0)

    def iota(self, k: int, vec: dict) -> dict:
        kop = self.hop.target.left
        out: dict = {}
        for (a, b), c in self.hop.apply_vec(k, vec).items():
            img = self.g.apply(k, b) if self.g is not None else {b: 1}
            for y, cy in img.items():
                s = _sgn(kop.degree(k, a) * self.lie.t.target.degree(k, y))
                out[(a, y)] = out.get((a, y), 0) + s * c * cy
        return _clean(out)

    def act(self, k: int, vec: dict, args: Sequence[Elem]) -> Elem:
        return self.lie.root((k, self.iota(k, vec)), list(args))

    def product(self, a: Elem, b: Elem) -> Elem:
        return self.act(2, {self.product_key: 1}, [a, b])

    def lie_op(self, a: Elem, b: Elem) -> Elem:
        return self.act(2, {self.bracket_key: 1}, [a, b])

    def generators(self) -> List[Tuple[str, dict]]:
        return [("product", {self.product_key: 1}), ("bracket", {self.bracket_key: 1})]

    def op_degree(self, k: int, vec: dict) -> int:
        return self.lie.t.degree(k, next(iter(self.iota(k, vec))))

    # -- untwisted checks
    def axiom_failures(self, samples: int = 10, seed: int = 0) -> List[str]:
        """Equivariance and sequential composition of the action on samples."""
        rng = random.Random(seed)
        lie, o = self.lie, self.operad
        bad = []
        swap = (1, 0)
        for _ in range(samples):
            a, b, c = (lie.random_element(rng) for _ in range(3))
            if not (a and b and c):
                continue
            da, db = lie.degree(a), lie.degree(b)
            for mk in o.basis(2):
                mu = {mk: 1}
                lhs = self.act(2, o.act_vec(swap, mu), [a, b])
                rhs = e_scale(self.act(2, mu, [b, a]), _sgn(da * db))
                if not e_equal(lhs, rhs):
                    bad.append(f"equivariance {o.key_name(2, mk)}")
                if o.max_arity < 3:
                    continue
                for nk in o.basis(2):
                    nu = {nk: 1}
                    dn = self.op_degree(2, nu)
                    first = self.act(3, o.comp_vec(2, 0, 2, mu, nu), [a, b, c])
                    if not e_equal(first, self.act(2, mu, [self.act(2, nu, [a, b]), c])):
                        bad.append(f"o_1 {o.key_name(2, mk)},{o.key_name(2, nk)}")
                    second = self.act(3, o.comp_vec(2, 1, 2, mu, nu), [a, b, c])
                    other = e_scale(self.act(2, mu, [a, self.act(2, nu, [b, c])]), _sgn(dn * da))
                    if not e_equal(second, other):
                        bad.append(f"o_2 {o.key_name(2, mk)},{o.key_name(2, nk)}")
        return sorted(set(bad))

    def derivation_failures(self, dpart: Callable[[Elem], Elem], pairs=None) -> List[str]:
        """d(mu(a, b)) = (-1)^{|mu|} (mu(da, b) + (-1)^{|a|} mu(a, db)) on basis pairs."""
        lie = self.lie
        if pairs is None:
            pairs = [(i, j) for i in range(lie.dim) for j in range(lie.dim)]
        bad = []
        for name, mu in self.generators():
            s = _sgn(self.op_degree(2, mu))
            for i, j in pairs:
                a, b = lie.element(i), lie.element(j)
                lhs = dpart(self.act(2, mu, [a, b]))
                rhs = e_sum(self.act(2, mu, [dpart(a), b]),
                            e_scale(self.act(2, mu, [a, dpart(b)]), _sgn(lie.degrees[i])))
                if not e_equal(lhs, lie.truncate(e_scale(rhs, s))):
                    bad.append(f"{name} on ({i},{j})")
        return bad

    def lie_part_mismatches(self) -> List[Tuple[int, int]]:
        """Pairs where the transported bracket operation differs from the cup bracket."""
        lie = self.lie
        bad = []
        for i in range(lie.dim):
            for j in range(lie.dim):
                a, b = lie.element(i), lie.element(j)
                op = e_scale(self.lie_op(a, b), _sgn(lie.degrees[i]))
                if not e_equal(op, lie.truncate(e_scale(self.d.cup(a, b), _sgn(lie.degrees[i])))):
                    bad.append((i, j))
        return bad

    # -- twisted checks
    def product_defect(self, dfull: Callable[[Elem], Elem]) -> Dict[Tuple[int, int], Dict[int, Fraction]]:
        lie = self.lie
        s = _sgn(self.op_degree(2, {self.product_key: 1}))
        out = {}
        for i in range(lie.dim):
            for j in range(lie.dim):
                a, b = lie.element(i), lie.element(j)
                lhs = dfull(self.product(a, b))
                rhs = e_scale(e_sum(self.product(dfull(a), b),
                                    e_scale(self.product(a, dfull(b)), _sgn(lie.degrees[i]))), s)
                v = lie.coords(e_sum(lhs, e_scale(rhs, -1)))
                if v:
                    out[(i, j)] = v
        return out

    def solve_homotopy(self, dfull: Callable[[Elem], Elem],
                       defect: Optional[Dict[Tuple[int, int], Dict[int, Fraction]]] = None) -> HomotopySolve:
        """Find H with defect(a, b) = d H(a, b) - s (H(da, b) + (-1)^{|a|} H(a, db)).

        H is bilinear on basis pairs, arity additive like the product, of
        convolution degree one less than the product operation.
        """
        lie = self.lie
        n = lie.dim
        if defect is None:
            defect = self.product_defect(dfull)
        dm = SparseMatrix.from_columns(n, n, {j: lie.coords(dfull(lie.element(j))) for j in range(n)})
        hdeg = self.op_degree(2, {self.product_key: 1}) - 1
        s = _sgn(hdeg)
        ar = [lie.basis[i][0] for i in range(n)]
        # unknown (i, j, k): coefficient of basis k in H(e_i, e_j)
        unknowns = [(i, j, k) for i in range(n) for j in range(n) for k in range(n)
                    if ar[k] == ar[i] + ar[j] and lie.degrees[k] == lie.degrees[i] + lie.degrees[j] + hdeg]
        uidx = {u: x for x, u in enumerate(unknowns)}
        rows: Dict[Tuple[int, int, int], dict] = {}
        dcols = {j: dict(dm.transpose().row(j)) for j in range(n)}

        def add(row_key, u, c):
            x = uidx.get(u)
            if x is None or not c:
                return
            r = rows.setdefault(row_key, {})
            r[x] = r.get(x, 0) + c

        for (i, j, k) in unknowns:
            for r, c in dcols[k].items():
                add((i, j, r), (i, j, k), c)
        for i in range(n):
            for j in range(n):
                for i2, c in dcols[i].items():
                    for k in range(n):
                        add((i, j, k), (i2, j, k), -s * c)
                for j2, c in dcols[j].items():
                    for k in range(n):
                        add((i, j, k), (i, j2, k), -s * _sgn(lie.degrees[i]) * c)
        keys = sorted(set(rows) | {(i, j, k) for (i, j), v in defect.items() for k in v})
        ridx = {r: x for x, r in enumerate(keys)}
        mat = SparseMatrix.from_rows(len(keys), len(unknowns), {ridx[r]: v for r, v in rows.items()})
        rhs = {ridx[(i, j, k)]: c for (i, j), v in defect.items() for k, c in v.items()}
        norm = sum(len(v) for v in defect.values())
        if not rhs:
            return HomotopySolve(0, True, len(unknowns), len(keys))
        sol = solve_linear(mat, rhs)
        if sol is None:
            return HomotopySolve(norm, False, len(unknowns), len(keys), residual=sorted(defect)[:5])
        return HomotopySolve(norm, True, len(unknowns), len(keys), sum(1 for c in sol if c))


def en_action_on_def(d: DefComplex, kd: KoszulData) -> EnAction:
    g = d.data.get("map") if d.kind == "operadic" else d.data.get("rho")
    return EnAction(d, kd, g)


# ---------------------------------------------------------------------------
# Bar of Def

class DefAlgebra:
    """The carrier of a Def complex as an arity-0 algebra over e_n{n}.

    Basis vector i is the i-th invariant basis element, in its convolution
    degree.  The differential does not preserve arity, so no weight grading
    is recorded; truncate the Bar construction by its bar arity instead.
    """

    def __init__(self, action: EnAction, operad: Operad, twisted: bool = True):
        from .modules import LeftModule
        from .symseq import GradedSpace, SymSeq
        lie = action.lie
        sp = GradedSpace(list(range(lie.dim)), lie.degrees, [action.d.basis_name(i) for i in range(lie.dim)])
        seq = SymSeq(operad.truncation, {0: sp}, {}, name="Def")
        self._mod = LeftModule(operad, seq, name="Def")
        self.operad, self.carrier, self.name = operad, seq, "Def"
        self.action = action
        self.dfun = action.d.d if twisted else action.d.untwisted(["d0", "d_Bar"]).d
        self._cache: Dict[tuple, Dict[int, Fraction]] = {}

    def act(self, r, ovec, slots):
        key = (r, tuple(sorted(ovec.items())), tuple(i for _, i in slots))
        out = self._cache.get(key)
        if out is None:
            lie = self.action.lie
            args = [lie.element(i) for _, i in slots]
            out = lie.coords(self.action.act(r, ovec, args))
            self._cache[key] = out
        return dict(out)

    def differential(self, n, idx):
        return self.action.lie.coords(self.dfun(self.action.lie.element(idx)))

    def d_vec(self, n, vec):
        out: Dict[int, Fraction] = {}
        for i, c in vec.items():
            vadd(out, self.differential(n, i), c)
        return out

    def degree(self, n, idx):
        return self.carrier.component(n).degrees[idx]

    def act_vecs(self, r, ovec, blocks, vecs):
        return self._mod.__class__.act_vecs(self, r, ovec, blocks, vecs)

    @property
    def max_arity(self):
        return self.carrier.max_arity


def symmetric_power_dims(degrees: Sequence[int], max_k: int) -> Dict[int, int]:
    """dim of the graded symmetric powers S^k V for k = 1..max_k (odd = exterior)."""
    even = sum(1 for d in degrees if d % 2 == 0)
    odd = len(degrees) - even
    from math import comb

    def sym(a):  # dim S^a of the even part
        return comb(even + a - 1, a) if even else int(a == 0)

    out = {}
    for k in range(1, max_k + 1):
        out[k] = sum(sym(a) * comb(odd, k - a) for a in range(k + 1))
    return out


@dataclass
class BarOfDef:
    bar: object
    core: object
    square_zero: bool
    core_dim: int
    cofree_dims: Dict[int, int]

    @property
    def ok(self) -> bool:
        return self.square_zero and self.core_dim == sum(self.cofree_dims.values())


def bar_of_def(action: EnAction, max_k: Optional[int] = None, twisted: bool = True) -> BarOfDef:
    """Bar_{e_n{n}}(Def) as an e_n^*-coalgebra together with its cocommutative core."""
    from .barcobar import BarComplex, cocommutative_core
    from .operads import koszul_data
    n = action.kd.operad.preset.n
    kd = koszul_data(f"e{n}{{{n}}}", action.kd.operad.truncation)
    alg = DefAlgebra(action, kd.operad, twisted)
    bar = BarComplex(kd, alg, max_k=max_k)
    sq = True
    try:
        bar.check_square_zero(0)
    except ArithmeticError:
        sq = False
    core = cocommutative_core(bar)
    kmax = bar.max_k()
    return BarOfDef(bar, core, sq, core.carrier.component(0).dim,
                    symmetric_power_dims(action.lie.degrees, kmax))


# ---------------------------------------------------------------------------
# Chevalley-Eilenberg chains

@dataclass
class LieData:
    """A finite dg Lie algebra in structure constants (d of degree +1)."""

    degrees: List[int]
    d: Dict[int, Dict[int, Fraction]]                      # column j -> d(e_j)
    bracket: Dict[Tuple[int, int], Dict[int, Fraction]]    # (i, j) -> [e_i, e_j]
    names: Optional[List[str]] = None

    @property
    def dim(self) -> int:
        return len(self.degrees)

    @classmethod
    def from_def(cls, d: DefComplex) -> "LieData":
        cols = d.d_matrix().transpose()
        return cls(d.degrees(), {j: dict(cols.row(j)) for j in range(d.dim)},
                   {(i, j): d.bracket_coords(i, j) for i in range(d.dim) for j in range(d.dim)},
                   [d.basis_name(i) for i in range(d.dim)])

    def br(self, x: Dict[int, Fraction], y: Dict[int, Fraction]) -> Dict[int, Fraction]:
        out: Dict[int, Fraction] = {}
        for i, a in x.items():
            for j, b in y.items():
                vadd(out, self.bracket.get((i, j), {}), a * b)
        return _clean(out)

    def jacobi_failures(self) -> List[Tuple[int, int, int]]:
        bad = []
        n, deg = self.dim, self.degrees
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    ei, ej, ek = {i: 1}, {j: 1}, {k: 1}
                    v: Dict[int, Fraction] = {}
                    vadd(v, self.br(ei, self.br(ej, ek)))
                    vadd(v, self.br(self.br(ei, ej), ek), -1)
                    vadd(v, self.br(ej, self.br(ei, ek)), -_sgn(deg[i] * deg[j]))
                    if _clean(v):
                        bad.append((i, j, k))
        return bad


class JacobiFailure(ArithmeticError):
    pass


Mono = Tuple[int, ...]


def _inverse(order: Sequence[int]) -> Tuple[int, ...]:
    """Destination slots from a list of source positions."""
    out = [0] * len(order)
    for dest, src in enumerate(order):
        out[src] = dest
    return tuple(out)


class CEChainCoalgebra:
    """C_CE(g) = S(g[1]) with the coderivation induced by d and the bracket.

    Monomials are sorted index tuples; a shifted generator s e_i has degree
    |e_i| - 1 and odd generators appear at most once.  The corestriction
    is q1(s x) = -s dx and q2(s x, s y) = (-1)^{|s x|} s [x, y].
    """

    def __init__(self, g: LieData, max_weight: int, check: bool = True):
        if check:
            bad = g.jacobi_failures()
            if bad:
                raise JacobiFailure(f"input fails Jacobi on {bad[:3]}")
        self.g, self.max_weight = g, max_weight
        self.sdeg = [d - 1 for d in g.degrees]
        self.monos: List[Mono] = [()]
        for w in range(1, max_weight + 1):
            self.monos.extend(self._monos(w))
        self.index = {m: i for i, m in enumerate(self.monos)}

    def _monos(self, w: int) -> List[Mono]:
        from itertools import combinations_with_replacement
        out = []
        for m in combinations_with_replacement(range(self.g.dim), w):
            if any(self.sdeg[i] % 2 and m.count(i) > 1 for i in set(m)):
                continue
            out.append(m)
        return out

    def degree(self, m: Mono) -> int:
        return sum(self.sdeg[i] for i in m)

    def normal(self, word: Sequence[int]) -> Tuple[int, Optional[Mono]]:
        """Sign and sorted monomial of a word of shifted generators (None if zero)."""
        degs = [self.sdeg[i] for i in word]
        order = sorted(range(len(word)), key=lambda p: word[p])
        m = tuple(word[p] for p in order)
        if any(self.sdeg[i] % 2 and m.count(i) > 1 for i in set(m)):
            return 0, None
        return koszul_sign(degs, _inverse(order)), m

    def unshuffles(self, m: Mono, p: int):
        """Pairs (sign, front, back) with front of length p, signs by Koszul rule."""
        k = len(m)
        for front in combinations(range(k), p):
            back = tuple(x for x in range(k) if x not in front)
            order = tuple(front) + back
            sign = koszul_sign([self.sdeg[i] for i in m], _inverse(order))
            yield sign, tuple(m[x] for x in front), tuple(m[x] for x in back)

    def q(self, front: Mono) -> Dict[int, Fraction]:
        g = self.g
        if len(front) == 1:
            return {i: -c for i, c in g.d.get(front[0], {}).items() if c}
        i, j = front
        return {k: _sgn(self.sdeg[i]) * c for k, c in g.bracket.get((i, j), {}).items() if c}

    def d(self, m: Mono) -> Dict[Mono, Fraction]:
        """Coderivation: sum over unshuffles of q(front) * back."""
        out: Dict[Mono, Fraction] = {}
        for p in (1, 2):
            if len(m) < p:
                continue
            for s, front, back in self.unshuffles(m, p):
                for k, c in self.q(front).items():
                    s2, mono = self.normal((k,) + back)
                    if mono is None:
                        continue
                    out[mono] = out.get(mono, 0) + Fraction(s * s2 * c)
        return _clean(out)

    def coproduct(self, m: Mono) -> Dict[Tuple[Mono, Mono], Fraction]:
        """Reduced unshuffle coproduct (so Delta(x x) = 2 x (x) x for even x)."""
        out: Dict[Tuple[Mono, Mono], Fraction] = {}
        for p in range(1, len(m)):
            for s, f, b in self.unshuffles(m, p):
                out[(f, b)] = out.get((f, b), 0) + Fraction(s)
        return _clean(out)

    def matrix(self) -> SparseMatrix:
        n = len(self.monos)
        cols = {}
        for j, m in enumerate(self.monos):
            cols[j] = {self.index[k]: c for k, c in self.d(m).items() if k in self.index}
        return SparseMatrix.from_columns(n, n, cols)

    def square_zero(self) -> bool:
        m = self.matrix()
        return (m @ m).is_zero()

    def coderivation_failures(self) -> List[Mono]:
        """Delta d = (d (x) 1 + 1 (x) d) Delta on every monomial (reduced coproduct)."""
        bad = []
        for m in self.monos:
            lhs: Dict[tuple, Fraction] = {}
            for k, c in self.d(m).items():
                for key, v in self.coproduct(k).items():
                    lhs[key] = lhs.get(key, 0) + c * v
            rhs: Dict[tuple, Fraction] = {}
            for (f, b), c in self.coproduct(m).items():
                for f2, v in self.d(f).items():
                    if f2:
                        rhs[(f2, b)] = rhs.get((f2, b), 0) + c * v
                s = _sgn(self.degree(f))
                for b2, v in self.d(b).items():
                    if b2:
                        rhs[(f, b2)] = rhs.get((f, b2), 0) + s * c * v
            if _clean(lhs) != _clean(rhs):
                bad.append(m)
        return bad

    def primitives(self) -> List[Dict[int, Fraction]]:
        """Kernel of the reduced coproduct on positive weights (as coordinate vectors)."""
        pos = [j for j, m in enumerate(self.monos) if m]
        rows: Dict[Tuple[Mono, Mono], Dict[int, Fraction]] = {}
        for col, j in enumerate(pos):
            for key, c in self.coproduct(self.monos[j]).items():
                rows.setdefault(key, {})[col] = c
        if not rows:
            return [{j: Fraction(1)} for j in pos]
        mat = SparseMatrix.from_rows(len(rows), len(pos), dict(enumerate(rows.values())))
        return [{pos[c]: v for c, v in vec.items()} for vec in kernel_vectors(mat)]

    def chain_complex(self) -> ChainComplex:
        degs = [self.degree(m) for m in self.monos]
        lo, hi = min(degs), max(degs)
        by = {d: [i for i, x in enumerate(degs) if x == d] for d in range(lo, hi + 1)}
        pos = {i: j for ids in by.values() for j, i in enumerate(ids)}
        diffs: Dict[int, dict] = {}
        for (r, c), v in self.matrix().entries.items():
            diffs.setdefault(degs[c], {}).setdefault(pos[r], {})[pos[c]] = v
        mats = {d: SparseMatrix.from_rows(len(by.get(d + 1, [])), len(by[d]), rows) for d, rows in diffs.items()}
        return ChainComplex(list(range(lo, hi + 1)), {d: len(v) for d, v in by.items()}, mats,
                            {d: [self.name(self.monos[i]) for i in v] for d, v in by.items()})

    def name(self, m: Mono) -> str:
        if not m:
            return "1"
        nm = self.g.names or [f"e{i}" for i in range(self.g.dim)]
        return ".".join(f"s{nm[i]}" for i in m)

    def chain_betti(self) -> Dict[int, int]:
        """Betti numbers in chain degree (minus the cohomological degree)."""
        b = homology(self.chain_complex()).betti
        return {-d: v for d, v in sorted(b.items())}


def ce_chain_coalgebra(g: LieData, max_weight: int) -> CEChainCoalgebra:
    return CEChainCoalgebra(g, max_weight)


def primitives(c: CEChainCoalgebra) -> List[Dict[int, Fraction]]:
    return c.primitives()


# ---------------------------------------------------------------------------
# the bracket-vanishing experiment

class ZeroAlgebra:
    """A graded space with the zero action of every operation of arity >= 2."""

    def __init__(self, operad: Operad, space, name: str = "Z"):
        from .modules import LeftModule
        from .symseq import arity_zero
        self.operad, self.name = operad, name
        self.carrier = arity_zero(operad.truncation, space, name=name)
        self._mod = LeftModule(operad, self.carrier, name)

    def act(self, r, ovec, slots):
        if r == 1:
            (blk, i), = slots
            return {i: Fraction(c) for k, c in ovec.items() if k == self.operad.unit()}
        return {}

    def differential(self, n, idx):
        return {}

    def d_vec(self, n, vec):
        return {}

    def degree(self, n, idx):
        return self.carrier.component(n).degrees[idx]

    def act_vecs(self, r, ovec, blocks, vecs):
        return self._mod.__class__.act_vecs(self, r, ovec, blocks, vecs)

    @property
    def max_arity(self):
        return self.carrier.max_arity


@dataclass
class BracketReport:
    name: str
    dim: int
    pairs: int
    nonzero_pairs: int
    max_support: int
    norms: List[Tuple[int, int, int]]        # (i, j, support of [e_i, e_j])
    insertion_nonzero_pairs: int
    insertion_max_support: int

    def to_json(self) -> dict:
        return {"name": self.name, "dim": self.dim, "pairs": self.pairs,
                "nonzero_pairs": self.nonzero_pairs, "max_support": self.max_support,
                "insertion_nonzero_pairs": self.insertion_nonzero_pairs,
                "insertion_max_support": self.insertion_max_support,
                "norms": [list(t) for t in self.norms]}


def bracket_vanishing_experiment(d: DefComplex) -> BracketReport:
    """Compute [e_i, e_j] on the whole basis of Def(X -> X) and record supports.

    Both the cup bracket of the complex and the insertion bracket of the
    underlying convolution algebra are measured.  Nothing is asserted.
    """
    lie = d.lie
    norms, ins_nz, ins_max = [], 0, 0
    for i in range(lie.dim):
        for j in range(lie.dim):
            norms.append((i, j, len(d.bracket_coords(i, j))))
            sup = len(lie.coords(lie.bracket(lie.element(i), lie.element(j))))
            ins_nz += sup > 0
            ins_max = max(ins_max, sup)
    nz = [n for n in norms if n[2]]
    return BracketReport(d.name, lie.dim, len(norms), len(nz), max((n[2] for n in norms), default=0),
                         nz, ins_nz, ins_max)
