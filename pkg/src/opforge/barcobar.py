"""Conilpotent coalgebras, Bar and Cobar complexes, Maurer-Cartan maps.

Coalgebras are reduced (the coaugmentation line is kept out of the carrier).
``delta(n, idx, k)`` returns the k-fold structure map as a vector of the full
tensor space C(k) (x) Y^{boxtimes k}: keys are ``(ckey, word)`` with ``word``
a tuple of ``(block, index)`` pairs.  The sum runs over *ordered* block
decompositions, so passing to a composite divides by k!.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations, product as iproduct
from math import factorial
from typing import Callable, Dict, Hashable, List, Optional, Sequence, Tuple

from .exact import ChainComplex, SparseMatrix, kernel_vectors, rank, row_space_basis
from .modules import FreeModule, LeftModule, RightModule, _keys_to_idx
from .operads import CommOperad, DualCooperad, Hadamard, KoszulData, Operad
from .symseq import CompositeSeq, GradedSpace, SymSeq, Truncation, set_partitions
from .tensor import koszul_sign, vadd

Word = Tuple[Tuple[tuple, int], ...]


def _sgn(e: int) -> int:
    return -1 if e % 2 else 1


def _clean(v: dict) -> dict:
    return {k: c for k, c in v.items() if c}


def ordered_partitions(r: int, k: int):
    """Ordered decompositions of range(r) into k nonempty blocks."""
    for part in set_partitions(range(r)):
        if len(part) != k:
            continue
        for order in permutations(part):
            yield order


class FullDecomposition:
    """Full decompositions of a dual cooperad C = K^*.

    ``terms(r, key, k)`` lists ``(blocks, a, bs, coeff)`` with blocks an
    ordered decomposition of the r inputs; the coefficient is
    ``(-1)^{sum_{i<j}|x_i||x_j|} [key in a(b_1, ..., b_k)]`` over
    ``x = (a, b_1, ..., b_k)``, which reduces to the binary rule of
    :class:`DualCooperad` when k = 2.
    """

    def __init__(self, c: DualCooperad):
        self.c, self.k_op = c, c.op
        self._tables: Dict[Tuple[int, int], Dict[Hashable, list]] = {}

    def table(self, r: int, k: int) -> Dict[Hashable, list]:
        key = (r, k)
        t = self._tables.get(key)
        if t is not None:
            return t
        t = {}
        o = self.k_op
        if 1 <= k <= r <= o.max_arity:
            for blocks in ordered_partitions(r, k):
                sizes = [len(b) for b in blocks]
                for a in o.basis(k):
                    for bs in iproduct(*[o.basis(s) for s in sizes]):
                        degs = [o.degree(k, a)] + [o.degree(s, b) for s, b in zip(sizes, bs)]
                        sign = 1
                        for i in range(len(degs)):
                            for j in range(i + 1, len(degs)):
                                sign *= _sgn(degs[i] * degs[j])
                        v = o.compose_blocks(k, {a: 1}, [(blk, {b: 1}) for blk, b in zip(blocks, bs)])
                        for ck, cv in v.items():
                            if cv:
                                t.setdefault(ck, []).append((blocks, a, bs, sign * cv))
        self._tables[key] = t
        return t

    def terms(self, r: int, key, k: int) -> list:
        return self.table(r, k).get(key, [])


# ---------------------------------------------------------------------------
# coalgebras

class ProConilCoalgebra:
    """A reduced conilpotent coalgebra over a dual cooperad (finite data)."""

    name = "Y"

    def __init__(self, cooperad: DualCooperad, carrier: SymSeq, name: str = ""):
        self.cooperad, self.carrier = cooperad, carrier
        if name:
            self.name = name

    @property
    def max_arity(self) -> int:
        return self.carrier.max_arity

    def degree(self, n: int, idx: int) -> int:
        return self.carrier.component(n).degrees[idx]

    def weight(self, n: int, idx: int) -> int:
        return self.carrier.weight(n, idx)

    def delta(self, n: int, idx: int, k: int) -> Dict[tuple, Fraction]:
        raise NotImplementedError

    def max_k(self) -> int:
        return self.cooperad.max_arity

    def differential(self, n: int, idx: int) -> Dict[int, Fraction]:
        return {}

    def d_vec(self, n: int, vec: dict) -> Dict[int, Fraction]:
        out: Dict[int, Fraction] = {}
        for i, c in vec.items():
            vadd(out, self.differential(n, i), c)
        return out

    def delta_vec(self, n: int, vec: dict, k: int) -> Dict[tuple, Fraction]:
        out: Dict[tuple, Fraction] = {}
        for i, c in vec.items():
            vadd(out, self.delta(n, i, k), c)
        return out

    def word_degree(self, word) -> int:
        return sum(self.degree(len(b), y) for b, y in word)

    # -- structure checks ---------------------------------------------------
    def check_counit(self) -> List[str]:
        """Delta_1 is the identity (the counit of C pairs with the unit)."""
        unit = self.cooperad.counit()
        bad = []
        for n in range(self.max_arity + 1):
            for idx in range(self.carrier.component(n).dim):
                if _clean(self.delta(n, idx, 1)) != {(unit, ((tuple(range(n)), idx),)): 1}:
                    bad.append(f"counit on arity {n} element {idx}")
        return bad

    def filtration(self) -> Dict[int, Dict[int, int]]:
        """dims of F^i = {y : Delta_k(y) = 0 for k > i}, per arity."""
        out: Dict[int, Dict[int, int]] = {}
        top = self.max_k()
        for n in range(self.max_arity + 1):
            dim = self.carrier.component(n).dim
            rows: List[dict] = []
            out[n] = {}
            for i in range(top, 0, -1):
                out[n][i] = dim - (rank(_delta_matrix(self, n, range(i + 1, top + 1))) if i < top else 0)
            out[n] = dict(sorted(out[n].items()))
        return out

    def check_coderivation(self, ks: Sequence[int] = (2,)) -> List[str]:
        """Delta_k d = sum (id (x) .. d .. (x) id) Delta_k on every basis element."""
        bad = []
        for n in range(self.max_arity + 1):
            for idx in range(self.carrier.component(n).dim):
                dv = self.differential(n, idx)
                for k in ks:
                    lhs = _clean(self.delta_vec(n, dv, k)) if dv else {}
                    rhs = _clean(self.apply_d_to_words(self.delta(n, idx, k)))
                    if lhs != rhs:
                        bad.append(f"coderivation k={k} on arity {n} element {idx}")
        return bad

    def apply_d_to_words(self, full: Dict[tuple, Fraction]) -> Dict[tuple, Fraction]:
        c = self.cooperad
        out: Dict[tuple, Fraction] = {}
        for (ck, word), coef in full.items():
            pre = c.degree(len(word), ck)
            for p, (blk, y) in enumerate(word):
                dy = self.differential(len(blk), y)
                s = _sgn(pre)
                for y2, v in dy.items():
                    nw = word[:p] + ((blk, y2),) + word[p + 1:]
                    key = (ck, nw)
                    out[key] = out.get(key, 0) + s * coef * v
                pre += self.degree(len(blk), y)
        return out

    def dual_algebra(self) -> "DualAlgebra":
        return DualAlgebra(self)

    def check_coassociativity(self, weight_budget: Optional[int] = None):
        """Module axioms of the dual K-algebra on Y^*, exhaustively up to the weight budget.

        Arity-0 coalgebras only; the default budget is the largest weight present.
        """
        from .modules import check_left_module
        sp = self.carrier.component(0)
        if weight_budget is None:
            weight_budget = max((self.weight(0, i) for i in range(sp.dim)), default=0)
        return check_left_module(self.dual_algebra(), weight_budget=weight_budget)


def _delta_matrix(y: ProConilCoalgebra, n: int, ks) -> SparseMatrix:
    keys: Dict[tuple, int] = {}
    cols = {}
    for idx in range(y.carrier.component(n).dim):
        col = {}
        for k in ks:
            for key, c in y.delta(n, idx, k).items():
                if c:
                    col[keys.setdefault((k,) + key, len(keys))] = c
        cols[idx] = col
    return SparseMatrix.from_columns(len(keys), y.carrier.component(n).dim, cols)


class DualAlgebra(LeftModule):
    """Y^* as an algebra over K (C = K^*), for arity-0 coalgebras.

    ``(a . (f_1, ..., f_k))(y) = <a^* (x) f_1 (x) .. (x) f_k, Delta_k(y)>`` with the
    Koszul pairing sign of reversing the tensor factors.
    """

    def __init__(self, y: ProConilCoalgebra):
        c = y.cooperad
        sp = y.carrier.component(0)
        dual = GradedSpace(list(range(sp.dim)), [-d for d in sp.degrees], [f"{x}^" for x in sp.names])
        t = Truncation(c.max_arity)
        seq = SymSeq(t, {0: dual}, {}, name=f"{y.name}^*")
        seq.weights[0] = tuple(y.weight(0, i) for i in range(sp.dim))
        super().__init__(c.op, seq, name=f"{y.name}^*")
        self.y = y
        self._by_word: Dict[int, Dict[tuple, Dict[int, Fraction]]] = {}

    def _table(self, k: int):
        t = self._by_word.get(k)
        if t is None:
            t = {}
            for idx in range(self.y.carrier.component(0).dim):
                for (ck, word), c in self.y.delta(0, idx, k).items():
                    if c:
                        key = (ck, tuple(w for _, w in word))
                        t.setdefault(key, {})[idx] = c
            self._by_word[k] = t
        return t

    def act(self, r, ovec, slots):
        ydeg = self.y.carrier.component(0).degrees
        out: Dict[int, Fraction] = {}
        fs = tuple(i for _, i in slots)
        degs = [ydeg[i] for i in fs]
        tab = self._table(r)
        for a, ca in ovec.items():
            ad = self.operad.degree(r, a)
            allde = [ad] + degs
            sign = 1
            for i in range(len(allde)):
                for j in range(i + 1, len(allde)):
                    sign *= _sgn(allde[i] * allde[j])
            for idx, c in tab.get((a, fs), {}).items():
                out[idx] = out.get(idx, 0) + sign * ca * c
        return _clean(out)


class CofreeCoalgebra(ProConilCoalgebra):
    """C o W with Delta_k from the full decompositions of C.

    For W in arity 0 this is the (reduced) cofree conilpotent C-coalgebra.
    """

    def __init__(self, cooperad: DualCooperad, w: SymSeq, max_k: Optional[int] = None,
                 max_weight: Optional[int] = None, name: str = ""):
        carrier = CompositeSeq(cooperad.carrier(), w, max_k=max_k, max_weight=max_weight)
        super().__init__(cooperad, carrier, name=name or f"{cooperad.name}o{w.name}")
        self.w = w
        self.bar_max_k = max_k if max_k is not None else cooperad.max_arity
        self.fd = FullDecomposition(cooperad)
        self._delta_cache: Dict[tuple, dict] = {}

    def max_k(self) -> int:
        return self.bar_max_k

    def slot_degree(self, blk, wi) -> int:
        return self.w.component(len(blk)).degrees[wi]

    def delta(self, n, idx, k):
        key = (n, idx, k)
        r = self._delta_cache.get(key)
        if r is None:
            r = self._delta_cache[key] = _clean(self._delta(n, idx, k))
        return r

    def _delta(self, n, idx, k):
        c = self.cooperad
        comp = self.carrier
        r, pvec, t = comp.entry(n, idx)
        csp = c.space(r)
        sdegs = [self.slot_degree(b, w) for b, w in t]
        out: Dict[tuple, Fraction] = {}
        for ci, cc in pvec.items():
            for blocks, a, bs, coef in self.fd.terms(r, csp.keys[ci], k):
                # reorder a b_1..b_k x_0..x_{r-1} into a b_1 x_{S_1} b_2 x_{S_2} ..
                degs = [c.degree(len(blk), b) for blk, b in zip(blocks, bs)] + sdegs
                target = []
                pos = 0
                slot_pos = {}
                for j, blk in enumerate(blocks):
                    target.append(pos)
                    pos += 1
                    for s in blk:
                        slot_pos[s] = pos
                        pos += 1
                perm = tuple(target + [slot_pos[s] for s in range(r)])
                sign = koszul_sign(degs, perm)
                parts = []
                for blk, b in zip(blocks, bs):
                    sub = [t[s] for s in blk]
                    labels = tuple(sorted(l for bb, _ in sub for l in bb))
                    lab = {l: i for i, l in enumerate(labels)}
                    local = [(tuple(lab[l] for l in bb), w) for bb, w in sub]
                    bi = c.space(len(blk)).index[b]
                    try:
                        yv = comp.normalize(len(labels), len(blk), {bi: 1}, local)
                    except KeyError:
                        yv = {}
                    parts.append((labels, yv))
                if any(not yv for _, yv in parts):
                    continue
                for combo in iproduct(*[list(yv.items()) for _, yv in parts]):
                    word = tuple((labels, y) for (labels, _), (y, _) in zip(parts, combo))
                    v = sign * coef * cc
                    for _, cy in combo:
                        v *= cy
                    key = (a, word)
                    out[key] = out.get(key, 0) + v
        return out


def cofree_coalgebra(c: DualCooperad, v: GradedSpace, max_weight: int, name: str = "") -> CofreeCoalgebra:
    """F^C(V) for V in arity 0, up to ``max_weight`` cogenerators."""
    if not hasattr(c, "coaugmentation"):
        raise ValueError("the cooperad must be biaugmented")
    from .symseq import arity_zero
    t = Truncation(c.max_arity, max_weight)
    return CofreeCoalgebra(c, arity_zero(t, v), max_k=min(max_weight, c.max_arity), max_weight=max_weight,
                           name=name)


# ---------------------------------------------------------------------------
# Bar complex

class NotSquareZero(ArithmeticError):
    def __init__(self, arity: int, weight: Optional[int], degree: int):
        super().__init__(f"d^2 != 0 in arity {arity}, weight {weight}, degree {degree}")
        self.arity, self.weight, self.degree = arity, weight, degree


class BarComplex(CofreeCoalgebra, RightModule):
    """Bar_O(X) = C o X with d = d_0 + d_Bar (C = O^!-cooperad of the Koszul data).

    ``max_k`` caps the bar arity.  Since d lowers the bar arity this keeps a
    subcomplex.  When X carries a right Q-action so does the Bar complex.
    """

    def __init__(self, kd: KoszulData, x: LeftModule, max_k: Optional[int] = None,
                 max_weight: Optional[int] = None, name: str = ""):
        if x.operad.max_arity < kd.operad.max_arity:
            raise ValueError("truncation mismatch")
        self.kd, self.x = kd, x
        super().__init__(kd.cooperad, x.carrier, max_k=max_k, max_weight=max_weight,
                         name=name or f"Bar({x.name})")
        self.right_operad = getattr(x, "right_operad", None)
        self._d_cache: Dict[tuple, dict] = {}

    def slot_degree(self, blk, wi):
        return self.x.carrier.component(len(blk)).degrees[wi]

    def differential(self, n, idx):
        key = (n, idx)
        r = self._d_cache.get(key)
        if r is None:
            r = _clean(self.d0(n, idx))
            vadd(r, self.d_bar(n, idx))
            r = self._d_cache[key] = _clean(r)
        return r

    def d0(self, n, idx):
        c = self.cooperad
        comp = self.carrier
        r, pvec, t = comp.entry(n, idx)
        cdeg = c.space(r).degrees[next(iter(pvec))]
        out: Dict[int, Fraction] = {}
        pre = cdeg
        for j, (blk, xi) in enumerate(t):
            dx = self.x.differential(len(blk), xi)
            for y, v in dx.items():
                slots = list(t)
                slots[j] = (blk, y)
                vadd(out, comp.normalize(n, r, pvec, slots), _sgn(pre) * v)
            pre += self.slot_degree(blk, xi)
        return out

    def d_bar(self, n, idx):
        c, o, kappa = self.cooperad, self.kd.operad, self.kd.kappa
        comp = self.carrier
        r, pvec, t = comp.entry(n, idx)
        if r < 2:
            return {}
        csp = c.space(r)
        sdegs = [self.slot_degree(b, w) for b, w in t]
        out: Dict[int, Fraction] = {}
        for i in range(r):
            for j in range(i + 1, r):
                rest = [l for l in range(r) if l not in (i, j)]
                rho = [0] * r
                for new, old in enumerate([i, j] + rest):
                    rho[old] = new
                rho = tuple(rho)
                ks = koszul_sign(sdegs, rho)
                cvec: Dict[Hashable, Fraction] = {}
                for ci, cc in pvec.items():
                    vadd(cvec, c.act(rho, csp.keys[ci]), cc)
                bi, bj = t[i], t[j]
                union = tuple(sorted(bi[0] + bj[0]))
                lab = {l: p for p, l in enumerate(union)}
                local = [(tuple(lab[l] for l in bi[0]), bi[1]), (tuple(lab[l] for l in bj[0]), bj[1])]
                new_rest = [t[l] for l in rest]
                for ck, cv in cvec.items():
                    for (a, b), coef in c.decomp(r - 1, 0, 2, ck).items():
                        kb = kappa.get(b)
                        if not kb:
                            continue
                        mu = self.x.act(2, kb, local)
                        if not mu:
                            continue
                        s = ks * _sgn(c.degree(r - 1, a)) * coef * cv
                        ai = c.space(r - 1).index[a]
                        for y, mv in mu.items():
                            try:
                                vadd(out, comp.normalize(n, r - 1, {ai: 1}, [(union, y)] + new_rest), s * mv)
                            except KeyError:
                                pass
        return out

    # -- right action through the X-slots
    def ract(self, m, idx, i, p, qvec):
        if self.right_operad is None:
            raise ValueError("X has no right action")
        comp = self.carrier
        k, b, t = comp.entry(m, idx)
        j = next(a for a, (blk, _) in enumerate(t) if i in blk)
        blk, xi = t[j]
        wv = self.x.ract(len(blk), xi, blk.index(i), p, qvec)
        if not wv:
            return {}
        qdeg = self.right_operad.vec_degree(p, qvec) or 0
        later = sum(self.slot_degree(bb, x) for bb, x in t[j + 1:])
        sign = _sgn(qdeg * later)

        def shift(l):
            return l if l < i else l + p - 1

        nb = tuple(sorted([shift(l) for l in blk if l != i] + list(range(i, i + p))))
        out: Dict[int, Fraction] = {}
        for w2, c in wv.items():
            slots = [(tuple(shift(l) for l in bb), x) for bb, x in t[:j]] + [(nb, w2)] + \
                    [(tuple(shift(l) for l in bb), x) for bb, x in t[j + 1:]]
            try:
                vadd(out, comp.normalize(m + p - 1, k, b, slots), sign * c)
            except KeyError:
                pass
        return out

    # -- complexes
    def complexes(self, n: int = 0) -> Dict[int, ChainComplex]:
        """The arity-n part split by weight (d preserves the weight)."""
        sp = self.carrier.component(n)
        by_w: Dict[int, List[int]] = {}
        for idx in range(sp.dim):
            by_w.setdefault(self.weight(n, idx), []).append(idx)
        return {w: build_complex(sp, idxs, lambda i: self.differential(n, i)) for w, idxs in sorted(by_w.items())}

    def complex(self, n: int = 0) -> ChainComplex:
        sp = self.carrier.component(n)
        return build_complex(sp, list(range(sp.dim)), lambda i: self.differential(n, i))

    def check_square_zero(self, n: int = 0) -> None:
        for w, cx in self.complexes(n).items():
            bad = cx.square_zero_defect()
            if bad is not None:
                raise NotSquareZero(n, w, bad)


def build_complex(sp: GradedSpace, idxs: Sequence[int], dfun: Callable[[int], dict]) -> ChainComplex:
    """Cochain complex on the basis elements ``idxs`` of ``sp`` (closed under d)."""
    by_deg: Dict[int, List[int]] = {}
    for i in idxs:
        by_deg.setdefault(sp.degrees[i], []).append(i)
    if not by_deg:
        return ChainComplex([], {})
    lo, hi = min(by_deg), max(by_deg)
    degrees = list(range(lo, hi + 1))
    pos = {d: {i: p for p, i in enumerate(by_deg.get(d, []))} for d in degrees}
    diffs = {}
    for d in degrees[:-1]:
        cols = {}
        for p, i in enumerate(by_deg.get(d, [])):
            col = {}
            for y, v in dfun(i).items():
                if v:
                    if y not in pos[d + 1]:
                        raise ValueError("differential leaves the chosen basis")
                    col[pos[d + 1][y]] = v
            cols[p] = col
        diffs[d] = SparseMatrix.from_columns(len(pos[d + 1]), len(pos[d]), cols)
    names = {d: [sp.names[i] for i in by_deg.get(d, [])] for d in degrees}
    return ChainComplex(degrees, {d: len(by_deg.get(d, [])) for d in degrees}, diffs, names)


def bar_complex(kd: KoszulData, x: LeftModule, max_k: Optional[int] = None,
                max_weight: Optional[int] = None, check: bool = True) -> BarComplex:
    b = BarComplex(kd, x, max_k=max_k, max_weight=max_weight)
    if check:
        for n in range(b.max_arity + 1):
            if b.carrier.component(n).dim:
                b.check_square_zero(n)
    return b


# ---------------------------------------------------------------------------
# Cobar complex

class CobarComplex(FreeModule):
    """Cobar(Y) = O o Y (Y reduced) with the derivation d extending

    ``d(1; y) = (1; d_Y y) - 1/2 [(kappa (x) id (x) id) Delta_2(y)]``.
    """

    def __init__(self, kd: KoszulData, y: ProConilCoalgebra, max_weight: Optional[int] = None, name: str = ""):
        from .modules import WithRight
        q = getattr(y, "right_operad", None)
        w = WithRight(y.carrier, q, y.ract) if q is not None else y.carrier
        super().__init__(kd.operad, w, max_weight=max_weight, name=name or f"Cobar({y.name})")
        self.kd, self.y = kd, y
        self._gen_d: Dict[tuple, dict] = {}
        self._d_cache: Dict[tuple, dict] = {}

    def generator_differential(self, n: int, yi: int) -> Dict[int, Fraction]:
        key = (n, yi)
        r = self._gen_d.get(key)
        if r is not None:
            return r
        o, kappa = self.operad, self.kd.kappa
        out: Dict[int, Fraction] = {}
        for y2, c in self.y.differential(n, yi).items():
            vadd(out, self.generator(n, y2), c)
        half = Fraction(-1, 2)
        for (ck, word), c in self.y.delta(n, yi, 2).items():
            kv = kappa.get(ck)
            if not kv:
                continue
            try:
                vadd(out, self.carrier.normalize(n, 2, _keys_to_idx(o.space(2), kv), list(word)), half * c)
            except KeyError:
                pass
        r = self._gen_d[key] = _clean(out)
        return r

    def differential(self, n, idx):
        key = (n, idx)
        r = self._d_cache.get(key)
        if r is not None:
            return r
        o = self.operad
        k, pvec, t = self.carrier.entry(n, idx)
        odeg = o.space(k).degrees[next(iter(pvec))]
        out: Dict[int, Fraction] = {}
        pre = odeg
        blocks = [b for b, _ in t]
        for l, (blk, yi) in enumerate(t):
            dg = self.generator_differential(len(blk), yi)
            if dg:
                vecs = [{y: 1} for _, y in t]
                vecs[l] = dg
                # substituting into slot l: act on the composite of the generator's vector
                for pi, pc in pvec.items():
                    vadd(out, self.act_vecs(k, {o.space(k).keys[pi]: 1}, blocks, vecs), _sgn(pre) * pc)
            pre += self.y.degree(len(blk), yi)
        r = self._d_cache[key] = _clean(out)
        return r

    def complex(self, n: int = 0) -> ChainComplex:
        sp = self.carrier.component(n)
        return build_complex(sp, list(range(sp.dim)), lambda i: self.differential(n, i))


def cobar_complex(kd: KoszulData, y: ProConilCoalgebra, max_weight: Optional[int] = None) -> CobarComplex:
    cb = CobarComplex(kd, y, max_weight=max_weight)
    for n in range(cb.max_arity + 1):
        cx = cb.complex(n)
        bad = cx.square_zero_defect()
        if bad is not None:
            raise NotSquareZero(n, None, bad)
    return cb


# ---------------------------------------------------------------------------
# twisting morphisms and the Maurer-Cartan correspondences

class NotMaurerCartan(ValueError):
    """Raised when a twisting candidate fails the MC equation; carries the residual."""

    def __init__(self, residual: Dict[int, SparseMatrix]):
        nz = {n: m.nnz() for n, m in residual.items() if not m.is_zero()}
        super().__init__(f"Maurer-Cartan residual is nonzero (nonzero entries per arity: {nz})")
        self.residual = residual


def _mats_equal(a: Dict[int, SparseMatrix], b: Dict[int, SparseMatrix]) -> bool:
    for n in set(a) | set(b):
        x, y = a.get(n), b.get(n)
        if x is None or y is None:
            if (x is not None and not x.is_zero()) or (y is not None and not y.is_zero()):
                return False
        elif x != y:
            return False
    return True


def _col(m: SparseMatrix, j: int) -> Dict[int, Fraction]:
    return {r: v for (r, c), v in m.entries.items() if c == j}


class _Cols:
    """Column access for a SparseMatrix (built once)."""

    def __init__(self, m: SparseMatrix):
        self.cols: Dict[int, Dict[int, Fraction]] = {}
        for (r, c), v in m.entries.items():
            self.cols.setdefault(c, {})[r] = v

    def __getitem__(self, j):
        return self.cols.get(j, {})

    def apply(self, vec):
        out: Dict[int, Fraction] = {}
        for j, c in vec.items():
            vadd(out, self[j], c)
        return out


@dataclass
class Twisting:
    """A degree-0 map theta: Y -> X (Y reduced), one matrix per arity."""

    y: ProConilCoalgebra
    x: LeftModule
    mats: Dict[int, SparseMatrix]

    def apply(self, n: int, vec: dict) -> Dict[int, Fraction]:
        m = self.mats.get(n)
        return m.apply(vec) if m is not None else {}


def mc_residual(kd: KoszulData, theta: Twisting) -> Dict[int, SparseMatrix]:
    """d_X theta - theta d_Y + 1/2 mu_X(kappa; theta, theta) Delta_2."""
    y, x = theta.y, theta.x
    out = {}
    for n in range(y.max_arity + 1):
        ydim, xdim = y.carrier.component(n).dim, x.carrier.component(n).dim
        if not ydim:
            continue
        cols = {}
        for j in range(ydim):
            tv = theta.apply(n, {j: 1})
            v = x.d_vec(n, tv)
            vadd(v, theta.apply(n, y.differential(n, j)), -1)
            for (ck, word), c in y.delta(n, j, 2).items():
                kv = kappa_vec(kd, ck)
                if not kv:
                    continue
                vecs = [theta.apply(len(b), {w: 1}) for b, w in word]
                if all(vecs):
                    vadd(v, x.act_vecs(2, kv, [b for b, _ in word], vecs), Fraction(c, 2))
            cols[j] = _clean(v)
        out[n] = SparseMatrix.from_columns(xdim, ydim, cols)
    return out


def kappa_vec(kd: KoszulData, ck) -> dict:
    return kd.kappa.get(ck, {})


def check_mc(kd: KoszulData, theta: Twisting) -> None:
    res = mc_residual(kd, theta)
    if any(not m.is_zero() for m in res.values()):
        raise NotMaurerCartan(res)


def cofree_extension(y: ProConilCoalgebra, target: CofreeCoalgebra, phi) -> Dict[int, SparseMatrix]:
    """The coalgebra map Y -> C o W whose projection to W is phi.

    ``phi(n, vec)`` maps a vector of Y(n) to a vector of W(n).  The k-th
    component is 1/k! [(id (x) phi^{(x)k}) Delta_k].
    """
    out = {}
    for n in range(y.max_arity + 1):
        ydim = y.carrier.component(n).dim
        if not ydim:
            continue
        cols = {}
        for j in range(ydim):
            v: Dict[int, Fraction] = {}
            for k in range(1, target.max_k() + 1):
                inv = Fraction(1, factorial(k))
                for (ck, word), c in y.delta(n, j, k).items():
                    vecs = [phi(len(b), {w: 1}) for b, w in word]
                    if not all(vecs):
                        continue
                    ai = target.cooperad.space(k).index[ck]
                    for combo in iproduct(*[list(vv.items()) for vv in vecs]):
                        coef = c * inv
                        slots = []
                        for (b, _), (xi, xc) in zip(word, combo):
                            coef *= xc
                            slots.append((b, xi))
                        try:
                            vadd(v, target.carrier.normalize(n, k, {ai: 1}, slots), coef)
                        except KeyError:
                            pass
            cols[j] = _clean(v)
        out[n] = SparseMatrix.from_columns(target.carrier.component(n).dim, ydim, cols)
    return out


def cofree_projection(target: CofreeCoalgebra) -> Dict[int, SparseMatrix]:
    """C o W -> W onto the arity-one part of C."""
    out = {}
    for n in range(target.max_arity + 1):
        sp = target.carrier.component(n)
        if not sp.dim:
            continue
        cols = {}
        for j in range(sp.dim):
            r, pvec, t = target.carrier.entry(n, j)
            if r == 1:
                (pi, pc), = pvec.items()
                cols[j] = {t[0][1]: pc}
        out[n] = SparseMatrix.from_columns(target.w.component(n).dim, sp.dim, cols)
    return out


def is_coalgebra_map(src: ProConilCoalgebra, tgt: ProConilCoalgebra, f: Dict[int, SparseMatrix],
                     ks: Sequence[int] = (2, 3)) -> bool:
    """Delta_k f = (id (x) f^{(x)k}) Delta_k on every basis element."""
    cols = {n: _Cols(m) for n, m in f.items()}

    def fv(n, vec):
        return cols[n].apply(vec) if n in cols else {}

    for n in range(src.max_arity + 1):
        for j in range(src.carrier.component(n).dim):
            img = fv(n, {j: 1})
            for k in ks:
                lhs = _clean(tgt.delta_vec(n, img, k))
                rhs: Dict[tuple, Fraction] = {}
                for (ck, word), c in src.delta(n, j, k).items():
                    vecs = [fv(len(b), {w: 1}) for b, w in word]
                    if not all(vecs):
                        continue
                    for combo in iproduct(*[list(vv.items()) for vv in vecs]):
                        coef = c
                        nw = []
                        for (b, _), (x, xc) in zip(word, combo):
                            coef *= xc
                            nw.append((b, x))
                        key = (ck, tuple(nw))
                        rhs[key] = rhs.get(key, 0) + coef
                if lhs != _clean(rhs):
                    return False
    return True


def twisting_to_coalgebra_map(kd: KoszulData, theta: Twisting, bar: BarComplex) -> Dict[int, SparseMatrix]:
    """F_theta: Y -> Bar(X), the coalgebra map with pr o F_theta = theta."""
    check_mc(kd, theta)
    return cofree_extension(theta.y, bar, theta.apply)


def bar_projection(bar: BarComplex) -> Dict[int, SparseMatrix]:
    """pr: Bar(X) -> X onto bar arity one."""
    return cofree_projection(bar)


def coalgebra_map_to_twisting(bar: BarComplex, y: ProConilCoalgebra, f: Dict[int, SparseMatrix]) -> Twisting:
    pr = bar_projection(bar)
    return Twisting(y, bar.x, {n: pr[n] @ m for n, m in f.items() if n in pr})


def twisting_to_algebra_map(kd: KoszulData, theta: Twisting, cobar: CobarComplex) -> Dict[int, SparseMatrix]:
    """G_theta: Cobar(Y) -> X, the algebra map extending theta."""
    check_mc(kd, theta)
    x = theta.x
    o = cobar.operad
    out = {}
    for n in range(cobar.max_arity + 1):
        sp = cobar.carrier.component(n)
        if not sp.dim:
            continue
        cols = {}
        for j in range(sp.dim):
            k, pvec, t = cobar.carrier.entry(n, j)
            vecs = [theta.apply(len(b), {w: 1}) for b, w in t]
            v: Dict[int, Fraction] = {}
            if all(vecs):
                for pi, pc in pvec.items():
                    vadd(v, x.act_vecs(k, {o.space(k).keys[pi]: 1}, [b for b, _ in t], vecs), pc)
            cols[j] = _clean(v)
        out[n] = SparseMatrix.from_columns(x.carrier.component(n).dim, sp.dim, cols)
    return out


def algebra_map_to_twisting(cobar: CobarComplex, x: LeftModule, g: Dict[int, SparseMatrix]) -> Twisting:
    y = cobar.y
    mats = {}
    for n, m in g.items():
        cols = _Cols(m)
        ydim = y.carrier.component(n).dim
        mats[n] = SparseMatrix.from_columns(x.carrier.component(n).dim, ydim,
                                            {j: cols.apply(cobar.generator(n, j)) for j in range(ydim)})
    return Twisting(y, x, mats)


def differential_matrix(obj, n: int) -> SparseMatrix:
    dim = obj.carrier.component(n).dim
    return SparseMatrix.from_columns(dim, dim, {j: obj.differential(n, j) for j in range(dim)})


def is_chain_map(src, tgt, f: Dict[int, SparseMatrix]) -> bool:
    for n, m in f.items():
        if m.is_zero():
            continue
        if m @ differential_matrix(src, n) != differential_matrix(tgt, n) @ m:
            return False
    return True


@dataclass
class MCRoundtrip:
    """Outcome of one instance of the three-way correspondence."""

    residual_zero: bool
    coalgebra_map_ok: bool      # F_theta is a chain map and matches the expected map
    algebra_map_ok: bool        # G_theta is a chain map
    roundtrips: Dict[str, bool] = field(default_factory=dict)
    equivariant: Optional[bool] = None

    @property
    def ok(self) -> bool:
        eq = True if self.equivariant is None else self.equivariant
        return self.residual_zero and self.coalgebra_map_ok and self.algebra_map_ok and \
            all(self.roundtrips.values()) and eq


def mc_correspondence(kd: KoszulData, theta: Twisting, bar: BarComplex, cobar: CobarComplex,
                      expected_f: Optional[Dict[int, SparseMatrix]] = None) -> MCRoundtrip:
    """Run theta through coalgebra maps Y -> Bar X and algebra maps Cobar Y -> X and back."""
    res = mc_residual(kd, theta)
    zero = all(m.is_zero() for m in res.values())
    if not zero:
        raise NotMaurerCartan(res)
    f = twisting_to_coalgebra_map(kd, theta, bar)
    g = twisting_to_algebra_map(kd, theta, cobar)
    f_ok = is_chain_map(theta.y, bar, f) and (expected_f is None or _mats_equal(f, expected_f))
    g_ok = is_chain_map(cobar, theta.x, g)
    th_f = coalgebra_map_to_twisting(bar, theta.y, f)
    th_g = algebra_map_to_twisting(cobar, theta.x, g)
    rt = {
        "theta->F->theta": _mats_equal(th_f.mats, theta.mats),
        "theta->G->theta": _mats_equal(th_g.mats, theta.mats),
        "F->theta->F": _mats_equal(twisting_to_coalgebra_map(kd, th_f, bar), f),
        "G->theta->G": _mats_equal(twisting_to_algebra_map(kd, th_g, cobar), g),
    }
    return MCRoundtrip(zero, f_ok, g_ok, rt)


def bar_of_map(src: BarComplex, tgt: BarComplex, f) -> Dict[int, SparseMatrix]:
    """C o f: (c; x_1, .., x_r) |-> (c; f x_1, .., f x_r), for a degree-0 module map f."""
    out = {}
    for n in range(src.max_arity + 1):
        sp = src.carrier.component(n)
        if not sp.dim:
            continue
        cols = {}
        for j in range(sp.dim):
            r, pvec, t = src.carrier.entry(n, j)
            vecs = [f.apply(len(b), w) for b, w in t]
            v: Dict[int, Fraction] = {}
            if all(vecs):
                for combo in iproduct(*[list(vv.items()) for vv in vecs]):
                    coef = 1
                    slots = []
                    for (b, _), (xi, xc) in zip(t, combo):
                        coef *= xc
                        slots.append((b, xi))
                    try:
                        vadd(v, tgt.carrier.normalize(n, r, pvec, slots), coef)
                    except KeyError:
                        pass
            cols[j] = _clean(v)
        out[n] = SparseMatrix.from_columns(tgt.carrier.component(n).dim, sp.dim, cols)
    return out


def twisting_from_map(bar_src: BarComplex, f, x: LeftModule) -> Twisting:
    """theta = f o pr : Bar(X') -> X for a module map f: X' -> X."""
    pr = bar_projection(bar_src)
    mats = {}
    for n, p in pr.items():
        xdim = x.carrier.component(n).dim
        fm = SparseMatrix.from_columns(xdim, bar_src.x.carrier.component(n).dim,
                                       {j: f.apply(n, j) for j in range(bar_src.x.carrier.component(n).dim)})
        mats[n] = fm @ p
    return Twisting(bar_src, x, mats)


# ---------------------------------------------------------------------------
# right-module compatibility (relative case)

def right_action_matrix(obj, m: int, i: int, p: int, qkey) -> SparseMatrix:
    src, tgt = obj.carrier.component(m), obj.carrier.component(m + p - 1)
    return SparseMatrix.from_columns(tgt.dim, src.dim, {j: obj.ract(m, j, i, p, {qkey: 1}) for j in range(src.dim)})


def _right_cases(obj):
    q = obj.right_operad
    top = obj.max_arity
    for m in range(1, top + 1):
        for p in range(2, top - m + 2):
            for qkey in q.basis(p):
                for i in range(m):
                    yield m, i, p, qkey


def check_coalgebra_right_module(y) -> List[str]:
    """The two compatibility squares of a coalgebra with a right action.

    d(y o_i q) = d(y) o_i q, and Delta_2(y o_i q) is Delta_2(y) with q acting
    in the word slot holding label i (Koszul sign past the later slots).
    """
    bad = []
    q = y.right_operad
    for m, i, p, qkey in _right_cases(y):
        a = right_action_matrix(y, m, i, p, qkey)
        if a @ differential_matrix(y, m) != differential_matrix(y, m + p - 1) @ a:
            bad.append(f"differential square at arity {m}, o_{i + 1} {q.key_name(p, qkey)}")
        qdeg = q.degree(p, qkey)
        for j in range(y.carrier.component(m).dim):
            lhs: Dict[tuple, Fraction] = {}
            for j2, c in y.ract(m, j, i, p, {qkey: 1}).items():
                vadd(lhs, y.delta(m + p - 1, j2, 2), c)
            rhs: Dict[tuple, Fraction] = {}
            for (ck, word), c in y.delta(m, j, 2).items():
                pos = next(a2 for a2, (blk, _) in enumerate(word) if i in blk)
                blk, w = word[pos]
                later = sum(y.degree(len(b), x) for b, x in word[pos + 1:])
                s = _sgn(qdeg * later)

                def shift(l):
                    return l if l < i else l + p - 1

                nb = tuple(sorted([shift(l) for l in blk if l != i] + list(range(i, i + p))))
                for w2, cw in y.ract(len(blk), w, blk.index(i), p, {qkey: 1}).items():
                    nw = tuple((tuple(shift(l) for l in b), x) for b, x in word[:pos]) + ((nb, w2),) + \
                        tuple((tuple(shift(l) for l in b), x) for b, x in word[pos + 1:])
                    key = (ck, nw)
                    rhs[key] = rhs.get(key, 0) + s * c * cw
            if _clean(lhs) != _clean(rhs):
                bad.append(f"comultiplication square at arity {m}, element {j}, o_{i + 1} {q.key_name(p, qkey)}")
                break
    return bad


def is_right_linear(src, tgt, f: Dict[int, SparseMatrix]) -> bool:
    for m, i, p, qkey in _right_cases(src):
        fm, fm2 = f.get(m), f.get(m + p - 1)
        if fm is None or fm2 is None:
            continue
        if fm2 @ right_action_matrix(src, m, i, p, qkey) != right_action_matrix(tgt, m, i, p, qkey) @ fm:
            return False
    return True


def relative_mc_correspondence(kd: KoszulData, theta: Twisting, bar: BarComplex, cobar: CobarComplex,
                               expected_f: Optional[Dict[int, SparseMatrix]] = None) -> MCRoundtrip:
    """The relative correspondence: as :func:`mc_correspondence` plus right-Q equivariance."""
    y = theta.y
    bad = check_coalgebra_right_module(y) + check_coalgebra_right_module(bar)
    if bad:
        raise ValueError("compatibility square fails: " + bad[0])
    out = mc_correspondence(kd, theta, bar, cobar, expected_f)
    f = twisting_to_coalgebra_map(kd, theta, bar)
    g = twisting_to_algebra_map(kd, theta, cobar)
    out.equivariant = (is_right_linear(y, theta.x, theta.mats) and is_right_linear(y, bar, f)
                       and is_right_linear(cobar, theta.x, g))
    return out


# ---------------------------------------------------------------------------
# sub-coalgebras, the cocommutative core, the star product

def _rref_pivot(row: Dict[int, Fraction]) -> int:
    return min(c for c, v in row.items() if v)


class SubCoalgebra(ProConilCoalgebra):
    """A subcoalgebra of ``parent`` spanned by RREF rows, arity 0.

    ``keymap`` relabels cooperad keys (e.g. into Comm^*); structure maps are
    re-expressed in the sub basis through the pivot coordinates.
    """

    def __init__(self, parent: ProConilCoalgebra, rows: List[Dict[int, Fraction]], cooperad: DualCooperad,
                 keymap: Callable[[int, Hashable], Optional[Hashable]], name: str = ""):
        self.parent, self.rows, self.keymap = parent, rows, keymap
        self.pivots = [_rref_pivot(r) for r in rows]
        self.pos = {p: b for b, p in enumerate(self.pivots)}
        psp = parent.carrier.component(0)
        degs = [psp.degrees[p] for p in self.pivots]
        sp = GradedSpace(list(range(len(rows))), degs, [f"s{b}" for b in range(len(rows))])
        seq = SymSeq(Truncation(parent.max_arity), {0: sp}, {}, name=name or "S")
        seq.weights[0] = tuple(parent.weight(0, p) for p in self.pivots)
        super().__init__(cooperad, seq, name=name or f"sub({parent.name})")
        self._cache: Dict[tuple, dict] = {}

    def max_k(self) -> int:
        return self.parent.max_k()

    def coordinates(self, vec: Dict[int, Fraction]) -> Dict[int, Fraction]:
        return {self.pos[p]: vec[p] for p in self.pivots if vec.get(p)}

    def delta(self, n, idx, k):
        key = (n, idx, k)
        if key in self._cache:
            return self._cache[key]
        out: Dict[tuple, Fraction] = {}
        for (ck, word), c in self.parent.delta_vec(0, self.rows[idx], k).items():
            if not all(w in self.pos for _, w in word):
                continue  # a non-pivot coordinate: determined by the pivot ones
            nk = self.keymap(k, ck)
            if nk is None:
                continue
            nw = tuple((b, self.pos[w]) for b, w in word)
            out[(nk, nw)] = out.get((nk, nw), 0) + c
        self._cache[key] = _clean(out)
        return self._cache[key]

    def differential(self, n, idx):
        return self.coordinates(self.parent.d_vec(n, self.rows[idx]))


def product_monomial_key(o: Operad, k: int):
    """The key of the pure product in a Poisson-type operad (dual to Comm(k) -> P(k))."""
    if isinstance(o, CommOperad):
        return o.basis(k)[0]
    target = tuple((j,) for j in range(k))
    for key in o.basis(k):
        inner = key
        while isinstance(o, Hadamard) and isinstance(inner, tuple) and len(inner) == 2 and inner[1] == 0:
            inner = inner[0]  # an operadic shift (x) Suspension
        if key == target or inner == target:
            return key
    raise ValueError(f"{o.name}({k}) has no pure product monomial")


def cocommutative_core(y: ProConilCoalgebra, max_rounds: int = 50) -> SubCoalgebra:
    """R(Y): the largest S with Delta_k(S) in m_k^* (x) S^{(x)k} for all k >= 2.

    Y is an arity-0 coalgebra over P^* for a Poisson-type P; m_k^* is the
    dual of the pure product.  Iterated exact intersection until stable.
    """
    c = y.cooperad
    o = c.op
    ks = list(range(2, y.max_k() + 1))
    mkeys = {k: product_monomial_key(o, k) for k in ks if o.basis(k)}
    dim = y.carrier.component(0).dim
    rows = [{i: Fraction(1)} for i in range(dim)]
    for _ in range(max_rounds):
        basis_rows = row_space_basis(rows)
        piv = [_rref_pivot(r) for r in basis_rows]
        # projection to Y/S: reduce by the RREF rows, keep non-pivot coordinates
        pivset = set(piv)
        prow = dict(zip(piv, basis_rows))

        def project(i):
            if i not in pivset:
                return {i: Fraction(1)}
            return {j: -v for j, v in prow[i].items() if j != i and j not in pivset and v}

        proj = {i: project(i) for i in range(dim)}
        cons: Dict[tuple, Dict[int, Fraction]] = {}
        for b, r in enumerate(basis_rows):
            for k in ks:
                for (ck, word), cv in y.delta_vec(0, r, k).items():
                    if ck != mkeys.get(k):
                        key = ("key", k, ck, word)
                        cons.setdefault(key, {})
                        cons[key][b] = cons[key].get(b, 0) + cv
                        continue
                    for p, (blk, w) in enumerate(word):
                        for w2, pv in proj[w].items():
                            key = ("tensor", k, p, word[:p] + ((blk, w2),) + word[p + 1:])
                            cons.setdefault(key, {})
                            cons[key][b] = cons[key].get(b, 0) + cv * pv
        eqs = [r for r in cons.values() if any(r.values())]
        if eqs:
            mat = SparseMatrix.from_rows(len(eqs), len(basis_rows), dict(enumerate(eqs)))
            sols = kernel_vectors(mat)
        else:
            sols = [{b: Fraction(1)} for b in range(len(basis_rows))]
        if len(sols) == len(basis_rows):
            break
        rows = []
        for s in sols:
            v: Dict[int, Fraction] = {}
            for b, cb in s.items():
                vadd(v, basis_rows[b], cb)
            rows.append(v)
    else:
        raise RuntimeError("cocommutative core did not stabilise")
    comm_dual = DualCooperad(CommOperad(o.truncation), name="Comm*")
    mk_inv = {(k, key): k for k, key in mkeys.items()}
    mk_inv[(1, c.counit())] = 1
    return SubCoalgebra(y, row_space_basis(rows), comm_dual, lambda k, key: mk_inv.get((k, key)),
                        name=f"R({y.name})")


class StarCoalgebra(ProConilCoalgebra):
    """A * Y for A an arity-0 C1-coalgebra and Y a C2-coalgebra, over C1 (x)_lev C2."""

    def __init__(self, a: ProConilCoalgebra, y: ProConilCoalgebra, name: str = ""):
        self.a, self.y = a, y
        had = Hadamard(a.cooperad.op, y.cooperad.op)
        coop = DualCooperad(had, name=f"({a.cooperad.name}x{y.cooperad.name})")
        asp = a.carrier.component(0)
        comps, trans = {}, {}
        self.pairs: Dict[int, List[Tuple[int, int]]] = {}
        for n in range(y.max_arity + 1):
            ysp = y.carrier.component(n)
            pairs = [(i, j) for i in range(asp.dim) for j in range(ysp.dim)]
            self.pairs[n] = pairs
            comps[n] = GradedSpace(pairs, [asp.degrees[i] + ysp.degrees[j] for i, j in pairs],
                                   [f"{asp.names[i]}*{ysp.names[j]}" for i, j in pairs])
            mats = []
            for t in range(n - 1):
                ty = y.carrier.transpositions[n][t]
                index = comps[n].index
                cols = {}
                for col, (i, j) in enumerate(pairs):
                    cols[col] = {index[(i, r)]: v for (r, c), v in ty.entries.items() if c == j}
                mats.append(SparseMatrix.from_columns(len(pairs), len(pairs), cols))
            trans[n] = mats
        seq = SymSeq(y.carrier.truncation, comps, trans, name=name or f"{a.name}*{y.name}")
        for n in comps:
            seq.weights[n] = tuple(a.weight(0, i) + y.weight(n, j) for i, j in self.pairs[n])
        super().__init__(coop, seq, name=seq.name)

    def max_k(self) -> int:
        return min(self.a.max_k(), self.y.max_k())

    def delta(self, n, idx, k):
        i, j = self.pairs[n][idx]
        c1, c2 = self.a.cooperad, self.y.cooperad
        index = {m: self.carrier.component(m).index for m in range(self.max_arity + 1)}
        out: Dict[tuple, Fraction] = {}
        da, dy = self.a.delta(0, i, k), self.y.delta(n, j, k)
        for (k1, wa), ca in da.items():
            for (k2, wy), cy in dy.items():
                # c1 a_1 .. a_k c2 y_1 .. y_k  ->  c1 c2 a_1 y_1 .. a_k y_k
                degs = [c1.degree(k, k1)] + [self.a.degree(0, x) for _, x in wa] + \
                       [c2.degree(k, k2)] + [self.y.degree(len(b), x) for b, x in wy]
                perm = [0] + [2 + 2 * p for p in range(k)] + [1] + [3 + 2 * p for p in range(k)]
                s = koszul_sign(degs, tuple(perm))
                word = tuple((b, index[len(b)][(xa, xy)]) for (_, xa), (b, xy) in zip(wa, wy))
                key = ((k1, k2), word)
                out[key] = out.get(key, 0) + s * ca * cy
        return _clean(out)

    def differential(self, n, idx):
        i, j = self.pairs[n][idx]
        index = self.carrier.component(n).index
        out: Dict[int, Fraction] = {}
        for i2, c in self.a.differential(0, i).items():
            out[index[(i2, j)]] = out.get(index[(i2, j)], 0) + c
        s = _sgn(self.a.degree(0, i))
        for j2, c in self.y.differential(n, j).items():
            out[index[(i, j2)]] = out.get(index[(i, j2)], 0) + s * c
        return _clean(out)


def star_coalgebra(a: ProConilCoalgebra, y: ProConilCoalgebra) -> StarCoalgebra:
    if a.max_arity != y.max_arity:
        raise ValueError("truncation mismatch")
    return StarCoalgebra(a, y)


class RelabeledCoalgebra(ProConilCoalgebra):
    """The same carrier and structure maps, with cooperad keys renamed."""

    def __init__(self, base: ProConilCoalgebra, cooperad: DualCooperad, keymap, name: str = ""):
        super().__init__(cooperad, base.carrier, name=name or base.name)
        self.base, self.keymap = base, keymap

    def max_k(self):
        return self.base.max_k()

    def delta(self, n, idx, k):
        out: Dict[tuple, Fraction] = {}
        for (ck, word), c in self.base.delta(n, idx, k).items():
            out[(self.keymap(k, ck), word)] = c
        return out

    def differential(self, n, idx):
        return self.base.differential(n, idx)


def comm_unit_law(s: StarCoalgebra) -> RelabeledCoalgebra:
    """Comm^* (x)_lev C = C: view Comm^* * Y as a C-coalgebra."""
    if not isinstance(s.a.cooperad.op, CommOperad):
        raise ValueError("the first factor must be a Comm^*-coalgebra")
    return RelabeledCoalgebra(s, s.y.cooperad, lambda k, key: key[1], name=s.name)


# ---------------------------------------------------------------------------
# even operadic shifts of algebras

class ShiftedAlgebra(LeftModule):
    """X{j} for an arity-0 P-algebra X and even j: an algebra over P{j}.

    For even j the suspension carries no signs, so only degrees move
    (by -j).  Odd shifts are not needed by the constructions here.
    """

    def __init__(self, x: LeftModule, j: int, shifted_operad: Operad):
        if j % 2:
            raise NotImplementedError("only even shifts are supported")
        sp = x.carrier.component(0)
        comps = {n: x.carrier.component(n) for n in range(x.carrier.max_arity + 1)}
        comps[0] = GradedSpace(sp.keys, [d - j for d in sp.degrees], sp.names)
        seq = SymSeq(x.carrier.truncation, comps, {n: x.carrier.transpositions[n]
                                                    for n in range(2, x.carrier.max_arity + 1)}, name=f"{x.name}{{{j}}}")
        seq.weights[0] = tuple(x.carrier.weight(0, i) for i in range(sp.dim))
        super().__init__(shifted_operad, seq, name=seq.name)
        self.base, self.j = x, j

    def act(self, r, ovec, slots):
        return self.base.act(r, {k[0]: c for k, c in ovec.items()}, slots)

    def differential(self, n, idx):
        return self.base.differential(n, idx)
