"""Left modules, right modules and bimodules over operads.

Carriers are index-based :class:`SymSeq` objects.  A left action is given by
``act(r, ovec, slots)``: ``ovec`` is a vector of O(r) (keys), ``slots`` is a
list of ``(block, index)`` pairs, one per input of the operation, where the
blocks partition the output labels ``0..n-1`` (empty blocks for arity-0
elements).  The result is a vector of carrier indices in arity n.

A right action ``ract(m, idx, i, p, qvec)`` computes ``x o_i q``.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .exact import SparseMatrix
from .operads import Operad, OperadMap, standardize
from .symseq import CompositeSeq, GradedSpace, SymSeq, Truncation, arity_zero
from .tensor import inverse, koszul_sign, transposition, vadd, vscale


def _sgn(e: int) -> int:
    return -1 if e % 2 else 1


def _keys_to_idx(sp: GradedSpace, vec: dict) -> Dict[int, Fraction]:
    return {sp.index[k]: c for k, c in vec.items() if c}


def _idx_to_keys(sp: GradedSpace, vec: dict) -> dict:
    return {sp.keys[i]: c for i, c in vec.items() if c}


def vec_degree(sp: GradedSpace, vec: dict) -> Optional[int]:
    degs = {sp.degrees[i] for i, c in vec.items() if c}
    if len(degs) > 1:
        raise ValueError("inhomogeneous element")
    return degs.pop() if degs else None


# ---------------------------------------------------------------------------
# left modules

class LeftModule:
    """A left module over ``operad`` on an index-based carrier."""

    name = "M"

    def __init__(self, operad: Operad, carrier: SymSeq, name: str = ""):
        self.operad, self.carrier = operad, carrier
        if name:
            self.name = name

    def act(self, r: int, ovec: dict, slots: Sequence[Tuple[tuple, int]]) -> Dict[int, Fraction]:
        raise NotImplementedError

    def differential(self, n: int, idx: int) -> Dict[int, Fraction]:
        return {}

    def d_vec(self, n: int, vec: dict) -> Dict[int, Fraction]:
        out: Dict[int, Fraction] = {}
        for i, c in vec.items():
            vadd(out, self.differential(n, i), c)
        return out

    def degree(self, n: int, idx: int) -> int:
        return self.carrier.component(n).degrees[idx]

    def act_vecs(self, r: int, ovec: dict, blocks: Sequence[tuple], vecs: Sequence[dict]) -> Dict[int, Fraction]:
        """Multilinear extension of act over vectors of the slots."""
        terms = [((), 1)]
        for v in vecs:
            terms = [(t + (i,), c * x) for t, c in terms for i, x in v.items() if x]
        out: Dict[int, Fraction] = {}
        for t, c in terms:
            vadd(out, self.act(r, ovec, list(zip(blocks, t))), c)
        return out

    @property
    def max_arity(self):
        return self.carrier.max_arity


class RightModule:
    """Mixin protocol for right actions x o_i q."""

    right_operad: Operad

    def ract(self, m: int, idx: int, i: int, p: int, qvec: dict) -> Dict[int, Fraction]:
        raise NotImplementedError

    def ract_vec(self, m: int, vec: dict, i: int, p: int, qvec: dict) -> Dict[int, Fraction]:
        out: Dict[int, Fraction] = {}
        for j, c in vec.items():
            vadd(out, self.ract(m, j, i, p, qvec), c)
        return out


class OperadBimodule(LeftModule, RightModule):
    """An operad as a bimodule over itself (and as a left module)."""

    def __init__(self, o: Operad):
        super().__init__(o, o.carrier(), name=o.name)
        self.right_operad = o

    def act(self, r, ovec, slots):
        o = self.operad
        children = []
        for blk, idx in slots:
            children.append((list(blk), {o.space(len(blk)).keys[idx]: 1}))
        n = sum(len(b) for b, _ in slots)
        return _keys_to_idx(o.space(n), o.compose_blocks(r, ovec, children))

    def differential(self, n, idx):
        o = self.operad
        return _keys_to_idx(o.space(n), o.differential(n, o.space(n).keys[idx]))

    def ract(self, m, idx, i, p, qvec):
        o = self.operad
        v = o.comp_vec(m, i, p, {o.space(m).keys[idx]: 1}, qvec)
        return _keys_to_idx(o.space(m + p - 1), v)


class FreeModule(LeftModule, RightModule):
    """The free left module O o W; a bimodule when W carries a right action.

    ``w`` is a SymSeq or a :class:`WithRight` (a SymSeq plus a right action).
    """

    def __init__(self, o: Operad, w, max_weight: Optional[int] = None, name: str = ""):
        self.w = w
        wseq = w.carrier if isinstance(w, WithRight) else w
        self.wseq = wseq
        carrier = CompositeSeq(o.carrier(), wseq, max_weight=max_weight)
        super().__init__(o, carrier, name=name or f"{o.name}<{wseq.name}>")
        self.right_operad = w.right_operad if isinstance(w, WithRight) else None

    def _slot_degree(self, t) -> int:
        return sum(self.wseq.component(len(b)).degrees[qi] for b, qi in t)

    def act(self, r, ovec, slots):
        o = self.operad
        comp = self.carrier
        children = []
        all_slots: List[tuple] = []
        sign_exp = 0
        passed = 0
        n = sum(len(b) for b, _ in slots)
        for blk, idx in slots:
            k, b, t = comp.entry(len(blk), idx)
            lab = sorted(blk)
            bdeg = o.space(k).degrees[next(iter(b))] if b else 0
            sign_exp += bdeg * passed
            passed += self._slot_degree(t)
            children.append((k, _idx_to_keys(o.space(k), b)))
            for sb, qi in t:
                all_slots.append((tuple(lab[l] for l in sb), qi))
        total = sum(k for k, _ in children)
        if total > o.max_arity:
            return {}  # beyond the truncation: the quotient kills it
        g = o.gamma(r, ovec, children)
        if not g:
            return {}
        try:
            return vscale(comp.normalize(n, total, _keys_to_idx(o.space(total), g), all_slots), _sgn(sign_exp))
        except KeyError:
            return {}  # beyond the weight truncation: the quotient kills it

    def differential(self, n, idx):
        o = self.operad
        k, b, t = self.carrier.entry(n, idx)
        dv: dict = {}
        for pi, c in b.items():
            vadd(dv, o.differential(k, o.space(k).keys[pi]), c)
        if not dv:
            return {}
        return self.carrier.normalize(n, k, _keys_to_idx(o.space(k), dv), list(t))

    def ract(self, m, idx, i, p, qvec):
        if self.right_operad is None:
            raise ValueError("no right action on the generators")
        comp = self.carrier
        k, b, t = comp.entry(m, idx)
        j = next(a for a, (blk, _) in enumerate(t) if i in blk)
        blk, qi = t[j]
        ipos = blk.index(i)
        wv = self.w.ract(len(blk), qi, ipos, p, qvec)
        if not wv:
            return {}
        qdeg = self.right_operad.vec_degree(p, qvec) or 0
        later = sum(self.wseq.component(len(bb)).degrees[x] for bb, x in t[j + 1:])
        sign = _sgn(qdeg * later)

        def shift(l):
            return l if l < i else l + p - 1

        new_blk = tuple(sorted([shift(l) for l in blk if l != i] + list(range(i, i + p))))
        out: Dict[int, Fraction] = {}
        for w2, c in wv.items():
            slots = [(tuple(shift(l) for l in bb), x) for bb, x in t[:j]] + [(new_blk, w2)] + \
                    [(tuple(shift(l) for l in bb), x) for bb, x in t[j + 1:]]
            vadd(out, comp.normalize(m + p - 1, k, b, slots), sign * c)
        return out

    def generator(self, n: int, widx: int) -> Dict[int, Fraction]:
        """The element id (x) w for w a basis element of W(n)."""
        o = self.operad
        unit = o.space(1).index[o.unit()]
        return self.carrier.normalize(n, 1, {unit: 1}, [(tuple(range(n)), widx)])


@dataclass
class WithRight(RightModule):
    """A SymSeq carrying a right action given by a function."""

    carrier: SymSeq
    right_operad: Operad
    action: object  # callable (m, idx, i, p, qvec) -> dict

    def ract(self, m, idx, i, p, qvec):
        return self.action(m, idx, i, p, qvec)


class GeneratorsTimesOperad(RightModule):
    """W o Q: the free right Q-module on a SymSeq W (no left structure)."""

    def __init__(self, w: SymSeq, q: Operad):
        self.wseq, self.right_operad = w, q
        self.carrier = CompositeSeq(w, q.carrier())

    def ract(self, m, idx, i, p, qvec):
        q = self.right_operad
        comp = self.carrier
        k, b, t = comp.entry(m, idx)
        j = next(a for a, (blk, _) in enumerate(t) if i in blk)
        blk, qi = t[j]
        ipos = blk.index(i)
        qsp = q.space(len(blk))
        v = q.comp_vec(len(blk), ipos, p, {qsp.keys[qi]: 1}, qvec)
        if not v:
            return {}
        qdeg = q.vec_degree(p, qvec) or 0
        later = sum(q.space(len(bb)).degrees[x] for bb, x in t[j + 1:])
        sign = _sgn(qdeg * later)

        def shift(l):
            return l if l < i else l + p - 1

        new_blk = tuple(sorted([shift(l) for l in blk if l != i] + list(range(i, i + p))))
        nsp = q.space(len(new_blk))
        out: Dict[int, Fraction] = {}
        for key, c in v.items():
            slots = [(tuple(shift(l) for l in bb), x) for bb, x in t[:j]] + [(new_blk, nsp.index[key])] + \
                    [(tuple(shift(l) for l in bb), x) for bb, x in t[j + 1:]]
            vadd(out, comp.normalize(m + p - 1, k, b, slots), sign * c)
        return out

    def as_with_right(self) -> WithRight:
        return WithRight(self.carrier, self.right_operad, self.ract)


def free_algebra(o: Operad, v: GradedSpace, max_weight: int, name: str = "") -> FreeModule:
    """O<V> = O o V for V in arity 0, truncated at ``max_weight`` generators.

    The truncation is the quotient by the ideal of elements of larger weight,
    so the result is still an O-algebra.
    """
    t = Truncation(o.max_arity, max_weight)
    return FreeModule(o, arity_zero(t, v, name=name or "V"), max_weight=max_weight)


def free_bimodule(o: Operad, w: SymSeq, q: Operad) -> FreeModule:
    """The free (O, Q)-bimodule O o W o Q."""
    return FreeModule(o, GeneratorsTimesOperad(w, q).as_with_right())


# ---------------------------------------------------------------------------
# module maps

class ModuleMap:
    """A degree-0 linear map between carriers given per arity on indices."""

    def __init__(self, source, target, image, name: str = "f"):
        self.source, self.target, self._image, self.name = source, target, image, name
        self._cache: Dict[tuple, dict] = {}

    def apply(self, n: int, idx: int) -> Dict[int, Fraction]:
        r = self._cache.get((n, idx))
        if r is None:
            r = self._cache[(n, idx)] = {i: c for i, c in self._image(n, idx).items() if c}
        return r

    def apply_vec(self, n: int, vec: dict) -> Dict[int, Fraction]:
        out: Dict[int, Fraction] = {}
        for i, c in vec.items():
            vadd(out, self.apply(n, i), c)
        return out

    def matrix(self, n: int) -> SparseMatrix:
        s, t = self.source.carrier.component(n), self.target.carrier.component(n)
        return SparseMatrix.from_columns(t.dim, s.dim, {j: self.apply(n, j) for j in range(s.dim)})


def extend_from_generators(x: FreeModule, y: LeftModule, gen_images) -> ModuleMap:
    """The O-module map O o W -> Y extending w |-> gen_images(n, widx).

    When W carries a right Q-action and Y is a bimodule, the images must be
    chosen on the generators of W o Q, i.e. ``gen_images`` is consulted on
    the canonical representatives of W and extended right-linearly.
    """
    o = x.operad

    def image(n, idx):
        k, b, t = x.carrier.entry(n, idx)
        vecs, blocks = [], []
        for blk, widx in t:
            vecs.append(gen_images(len(blk), widx))
            blocks.append(blk)
        out: Dict[int, Fraction] = {}
        for pi, c in b.items():
            vadd(out, y.act_vecs(k, {o.space(k).keys[pi]: 1}, blocks, vecs), c)
        return out

    return ModuleMap(x, y, image)


def right_linear_extension(wq: GeneratorsTimesOperad, y: RightModule, w_images):
    """Right-linear map W o Q -> Y determined by images of the generators of W.

    Returns a callable (n, idx) -> vector of Y(n).
    """
    q = wq.right_operad

    def image(n, idx):
        k, b, t = wq.carrier.entry(n, idx)
        out: Dict[int, Fraction] = {}
        for wi, c in b.items():
            cur, arity, pos = w_images(k, wi), k, 0
            for blk, qi in t:
                cur = y.ract_vec(arity, cur, pos, len(blk), {q.space(len(blk)).keys[qi]: 1})
                arity += len(blk) - 1
                pos += len(blk)
            flat = [l for blk, _ in t for l in blk]
            vadd(out, _act_idx(y.carrier, arity, standardize(flat), cur), c)
        return out

    return image


def _act_idx(seq: SymSeq, n: int, perm, vec: dict) -> Dict[int, Fraction]:
    if n < 2:
        return dict(vec)
    return seq.perm_matrix(n, tuple(perm)).apply(vec)


# ---------------------------------------------------------------------------
# axiom checks

@dataclass
class ModuleCheck:
    name: str
    ok: bool
    witness: str = ""
    count: int = 0


def _random_slots(m: LeftModule, r: int, rng: random.Random, arity_zero_only: bool):
    """Random slots for an r-ary operation; returns (blocks, indices) or None."""
    seq = m.carrier
    if arity_zero_only:
        dims = seq.component(0).dim
        if not dims:
            return None
        return [()] * r, [rng.randrange(dims) for _ in range(r)]
    sizes = []
    for _ in range(r):
        choices = [a for a in range(1, seq.max_arity + 1) if seq.component(a).dim]
        if not choices:
            return None
        sizes.append(rng.choice(choices))
    n = sum(sizes)
    if n > seq.max_arity:
        return None
    labels = list(range(n))
    rng.shuffle(labels)
    blocks, pos = [], 0
    for s in sizes:
        blocks.append(tuple(sorted(labels[pos:pos + s])))
        pos += s
    return blocks, [rng.randrange(seq.component(s).dim) for s in sizes]


def _weight_bounded_tuples(m: LeftModule, r: int, budget: int):
    """All r-tuples of arity-0 basis indices with total weight <= budget."""
    seq = m.carrier
    dims = seq.component(0).dim
    ws = [seq.weight(0, i) for i in range(dims)]

    def rec(left, room, acc):
        if left == 0:
            yield tuple(acc)
            return
        for i in range(dims):
            if ws[i] <= room:
                yield from rec(left - 1, room - ws[i], acc + [i])

    yield from rec(r, budget, [])


def _assoc_cases(m, rng, samples, exhaustive, budget):
    o = m.operad
    top = o.max_arity
    if exhaustive:
        for ar in range(1, top + 1):
            for br in range(1, top - ar + 2):
                for a in o.basis(ar):
                    for b in o.basis(br):
                        for i in range(ar):
                            for idxs in _weight_bounded_tuples(m, ar + br - 1, budget):
                                yield ar, br, a, b, i, [()] * len(idxs), list(idxs)
        return
    zero_only = _is_arity_zero(m)
    for _ in range(samples):
        ar = rng.randint(1, top)
        br = rng.randint(1, top - ar + 1)
        if not o.basis(ar) or not o.basis(br):
            continue
        sl = _random_slots(m, ar + br - 1, rng, zero_only)
        if sl is None:
            continue
        yield ar, br, rng.choice(o.basis(ar)), rng.choice(o.basis(br)), rng.randrange(ar), sl[0], sl[1]


def _equiv_cases(m, rng, samples, exhaustive, budget):
    o = m.operad
    top = o.max_arity
    if exhaustive:
        for r in range(2, top + 1):
            for a in o.basis(r):
                for idxs in _weight_bounded_tuples(m, r, budget):
                    for t in range(r - 1):
                        yield r, a, [()] * r, list(idxs), t
        return
    zero_only = _is_arity_zero(m)
    for _ in range(samples):
        r = rng.randint(2, top)
        if not o.basis(r):
            continue
        sl = _random_slots(m, r, rng, zero_only)
        if sl is None:
            continue
        yield r, rng.choice(o.basis(r)), sl[0], sl[1], rng.randrange(r - 1)


def _is_arity_zero(m) -> bool:
    return all(m.carrier.component(a).dim == 0 for a in range(1, m.carrier.max_arity + 1))


def check_left_module(m: LeftModule, samples: int = 40, seed: int = 0,
                      weight_budget: Optional[int] = None) -> List[ModuleCheck]:
    """Unit, equivariance and associativity of the left action.

    With ``weight_budget`` (arity-0 modules only) every input tuple of total
    weight at most the budget is tested; otherwise ``samples`` random cases.
    ``count`` records how many cases had a nonzero side.
    """
    rng = random.Random(seed)
    o = m.operad
    exhaustive = weight_budget is not None
    if exhaustive and not _is_arity_zero(m):
        raise ValueError("exhaustive checks need an arity-0 module")
    res = []
    bad, cnt = "", 0
    unit = o.unit_vec() if hasattr(o, "unit_vec") else {o.unit(): 1}
    for n in range(m.carrier.max_arity + 1):
        for idx in range(m.carrier.component(n).dim):
            cnt += 1
            if m.act(1, unit, [(tuple(range(n)), idx)]) != {idx: 1}:
                bad = f"id . x{idx} (arity {n})"
                break
        if bad:
            break
    res.append(ModuleCheck("unit", not bad, bad, cnt))
    # associativity: (a o_i b)(xs) = a(x.., b(x_i..), ..)
    bad, cnt = "", 0
    for ar, br, a, b, i, blocks, idxs in _assoc_cases(m, rng, samples, exhaustive, weight_budget):
        lhs = _clean_vec(m.act(ar + br - 1, o.comp(ar, i, br, a, b), list(zip(blocks, idxs))))
        inner_blocks = blocks[i:i + br]
        union = tuple(sorted(l for bl in inner_blocks for l in bl))
        lab = {l: j for j, l in enumerate(union)}
        inner = m.act(br, {b: 1}, [(tuple(lab[l] for l in bl), x) for bl, x in zip(inner_blocks, idxs[i:i + br])])
        # b passes the slots before position i
        pre = sum(m.degree(len(bl), x) for bl, x in zip(blocks[:i], idxs[:i]))
        s = _sgn(o.degree(br, b) * pre)
        outer_blocks = list(blocks[:i]) + [union] + list(blocks[i + br:])
        rhs: Dict[int, Fraction] = {}
        for y, c in inner.items():
            vadd(rhs, m.act(ar, {a: 1}, list(zip(outer_blocks, list(idxs[:i]) + [y] + list(idxs[i + br:])))), s * c)
        rhs = _clean_vec(rhs)
        cnt += bool(lhs or rhs)
        if lhs != rhs:
            bad = f"({o.key_name(ar, a)} o_{i + 1} {o.key_name(br, b)}) on {idxs}"
            break
    res.append(ModuleCheck("associativity", not bad, bad, cnt))
    # equivariance: (s.a)(x_0..x_{r-1}) = a(x_{s(0)}, ..) with the Koszul sign
    bad, cnt = "", 0
    for r, a, blocks, idxs, t in _equiv_cases(m, rng, samples, exhaustive, weight_budget):
        p = transposition(r, t)
        lhs = _clean_vec(m.act(r, o.act(p, a), list(zip(blocks, idxs))))
        degs = [m.degree(len(bl), x) for bl, x in zip(blocks, idxs)]
        # slot j of s.a feeds input p^{-1}(j) of a
        new_blocks = [blocks[p[j]] for j in range(r)]
        new_idx = [idxs[p[j]] for j in range(r)]
        s = koszul_sign(degs, tuple(sorted(range(r), key=lambda j: p[j])))
        rhs = _clean_vec(vscale(m.act(r, {a: 1}, list(zip(new_blocks, new_idx))), s))
        cnt += bool(lhs or rhs)
        if lhs != rhs:
            bad = f"s{t + 1}.{o.key_name(r, a)} on {idxs}"
            break
    res.append(ModuleCheck("equivariance", not bad, bad, cnt))
    return res


def _clean_vec(v: dict) -> dict:
    return {k: c for k, c in v.items() if c}


def check_bimodule(m, samples: int = 40, seed: int = 0) -> List[ModuleCheck]:
    """Left axioms plus commutation of left and right actions."""
    res = check_left_module(m, samples, seed)
    rng = random.Random(seed + 1)
    q = m.right_operad
    bad, cnt = "", 0
    for _ in range(samples):
        r = rng.randint(1, m.max_arity)
        if not m.operad.basis(r):
            continue
        a = rng.choice(m.operad.basis(r))
        sl = _random_slots(m, r, rng, False)
        if sl is None:
            continue
        blocks, idxs = sl
        n = sum(len(b) for b in blocks)
        pr = rng.randint(1, m.max_arity - n + 1) if n < m.max_arity else 1
        if not q.basis(pr) or n + pr - 1 > m.max_arity:
            continue
        qk = rng.choice(q.basis(pr))
        i = rng.randrange(n)
        cnt += 1
        lhs = m.ract_vec(n, m.act(r, {a: 1}, list(zip(blocks, idxs))), i, pr, {qk: 1})
        # act on the slot containing i
        j = next(a2 for a2, b in enumerate(blocks) if i in b)
        blk = blocks[j]
        inner = m.ract(len(blk), idxs[j], blk.index(i), pr, {qk: 1})
        later = sum(m.degree(len(b), x) for b, x in zip(blocks[j + 1:], idxs[j + 1:]))
        s = _sgn(q.degree(pr, qk) * later)

        def shift(l):
            return l if l < i else l + pr - 1

        nb = [tuple(shift(l) for l in b) for b in blocks]
        nb[j] = tuple(sorted([shift(l) for l in blk if l != i] + list(range(i, i + pr))))
        rhs: Dict[int, Fraction] = {}
        for y, c in inner.items():
            ni = list(idxs)
            ni[j] = y
            vadd(rhs, m.act(r, {a: 1}, list(zip(nb, ni))), s * c)
        if {k: v for k, v in lhs.items() if v} != {k: v for k, v in rhs.items() if v}:
            bad = f"{m.operad.key_name(r, a)} then o_{i + 1} {q.key_name(pr, qk)}"
            break
    res.append(ModuleCheck("commuting-actions", not bad, bad, cnt))
    return res


# ---------------------------------------------------------------------------
# relative inner hom and relative composite

def box_ract(m: RightModule, seq: SymSeq, word, i: int, p: int, qvec: dict) -> Dict[tuple, Fraction]:
    """Right action on a boxtimes word: act inside the slot holding label i."""
    q = m.right_operad
    j = next(a for a, (blk, _) in enumerate(word) if i in blk)
    blk, xi = word[j]
    v = m.ract(len(blk), xi, blk.index(i), p, qvec)
    if not v:
        return {}
    qdeg = q.vec_degree(p, qvec) or 0
    later = sum(seq.component(len(b)).degrees[x] for b, x in word[j + 1:])
    sign = _sgn(qdeg * later)

    def shift(l):
        return l if l < i else l + p - 1

    nb = tuple(sorted([shift(l) for l in blk if l != i] + list(range(i, i + p))))
    head = tuple((tuple(shift(l) for l in b), x) for b, x in word[:j])
    tail = tuple((tuple(shift(l) for l in b), x) for b, x in word[j + 1:])
    return {head + ((nb, y),) + tail: sign * c for y, c in v.items() if c}


class RelativeInnerHom:
    """[M, N]_Q(n): Sigma-equivariant maps M^{boxtimes n} -> N commuting with o_i q.

    ``basis[n]`` lists elements as {output arity m: matrix}.  With Q the
    identity operad there is no constraint and this is the plain inner hom.
    """

    def __init__(self, m, n, max_n: Optional[int] = None):
        from .exact import kernel_vectors
        from .symseq import boxtimes_sequence, equivariant_homs
        self.source, self.target = m, n
        xs, ys = m.carrier, n.carrier
        self.max_arity = xs.max_arity
        self.max_n = self.max_arity if max_n is None else max_n
        self.box = {k: boxtimes_sequence(xs, k) for k in range(self.max_n + 1)}
        self.basis: Dict[int, List[Dict[int, SparseMatrix]]] = {}
        self.degrees: Dict[int, List[int]] = {}
        q = getattr(m, "right_operad", None)
        for k in range(self.max_n + 1):
            pieces = [(a, h) for a in range(self.max_arity + 1) for h in equivariant_homs(self.box[k], ys, a)]
            rows = self._linearity_rows(k, pieces, q) if q is not None else []
            if rows:
                mat = SparseMatrix.from_rows(len(rows), len(pieces), dict(enumerate(rows)))
                sols = kernel_vectors(mat)
            else:
                sols = [{j: Fraction(1)} for j in range(len(pieces))]
            elems, degs = [], []
            for s in sols:
                e: Dict[int, SparseMatrix] = {}
                for j, c in s.items():
                    a, h = pieces[j]
                    e[a] = e[a] + h.scale(c) if a in e else h.scale(c)
                elems.append(e)
                degs.append(self._degree(k, e))
            self.basis[k] = elems
            self.degrees[k] = degs

    def _degree(self, k, e) -> int:
        for a, h in sorted(e.items()):
            if h.entries:
                (r, c), _ = next(iter(sorted(h.entries.items())))
                return self.target.carrier.component(a).degrees[r] - self.box[k].component(a).degrees[c]
        return 0

    def _linearity_rows(self, k, pieces, q) -> List[dict]:
        """Rows of F(w o_i q) - F(w) o_i q = 0 over all basis words, labels and q."""
        xs, tgt = self.source.carrier, self.target
        rows: Dict[tuple, dict] = {}
        for a in range(self.max_arity + 1):
            sp = self.box[k].component(a)
            for p in range(1, self.max_arity - a + 2):
                if p == 1 or a == 0:
                    continue  # arity-one elements act by scalars on the unit level
                for qk in q.basis(p):
                    for wi, w in enumerate(sp.keys):
                        for i in range(a):
                            moved = box_ract(self.source, xs, w, i, p, {qk: 1})
                            bsp = self.box[k].component(a + p - 1)
                            for j, (aa, h) in enumerate(pieces):
                                if aa == a:
                                    col = h.transpose().row(wi)
                                    v = tgt.ract_vec(a, col, i, p, {qk: 1})
                                    for r, c in v.items():
                                        rows.setdefault((a, wi, i, qk, r), {})
                                        rows[(a, wi, i, qk, r)][j] = rows[(a, wi, i, qk, r)].get(j, 0) - c
                                elif aa == a + p - 1:
                                    vec: Dict[int, Fraction] = {}
                                    for w2, c in moved.items():
                                        vadd(vec, h.transpose().row(bsp.index[w2]), c)
                                    for r, c in vec.items():
                                        rows.setdefault((a, wi, i, qk, r), {})
                                        rows[(a, wi, i, qk, r)][j] = rows[(a, wi, i, qk, r)].get(j, 0) + c
        return [r for r in rows.values() if any(r.values())]

    def dims(self) -> Dict[int, int]:
        return {k: len(v) for k, v in self.basis.items()}

    def coordinates(self, k: int, mats: Dict[int, SparseMatrix]) -> Dict[int, Fraction]:
        """Coordinates of a per-arity matrix family in basis[k]."""
        from .exact import solve_linear
        elems = self.basis[k]
        positions = sorted({(a, pos) for e in elems for a, h in e.items() for pos in h.entries} |
                           {(a, pos) for a, h in mats.items() for pos in h.entries})
        pidx = {pos: i for i, pos in enumerate(positions)}
        if not elems:
            if positions:
                raise ValueError("not in the relative hom")
            return {}
        a = SparseMatrix.from_columns(len(positions), len(elems), {
            j: {pidx[(ar, pos)]: v for ar, h in e.items() for pos, v in h.entries.items()}
            for j, e in enumerate(elems)})
        sol = solve_linear(a, {pidx[(ar, pos)]: v for ar, h in mats.items() for pos, v in h.entries.items()})
        if sol is None:
            raise ValueError("not in the relative hom")
        return {j: v for j, v in enumerate(sol) if v}


def relative_inner_hom(m, n, max_n: Optional[int] = None) -> RelativeInnerHom:
    return RelativeInnerHom(m, n, max_n)


class RelativeEndOperad(Operad):
    """End operad of a right Q-module M: [M, M]_Q with composition by evaluation."""

    def __init__(self, m, max_n: Optional[int] = None, name: str = ""):
        self.hom = RelativeInnerHom(m, m, max_n)
        super().__init__(Truncation(self.hom.max_n))
        self.module = m
        self.name = name or f"End_Q({getattr(m, 'name', 'M')})"

    def _basis(self, k):
        return range(len(self.hom.basis[k]))

    def degree(self, k, key):
        return self.hom.degrees[k][key]

    def key_name(self, k, key):
        return f"F{k}_{key}"

    def unit(self):
        box = self.hom.box[1]
        mats = {a: SparseMatrix.identity(box.component(a).dim) for a in range(self.hom.max_arity + 1)
                if box.component(a).dim}
        (j, c), = self.hom.coordinates(1, mats).items()
        return j

    def unit_vec(self):
        box = self.hom.box[1]
        mats = {a: SparseMatrix.identity(box.component(a).dim) for a in range(self.hom.max_arity + 1)
                if box.component(a).dim}
        return self.hom.coordinates(1, mats)

    def act(self, p, key):
        from .symseq import permute_boxtimes_slots
        k = len(p)
        e = self.hom.basis[k][key]
        xs = self.module.carrier
        ginv = inverse(p)
        out = {}
        for a, h in e.items():
            sp = self.hom.box[k].component(a)
            cols = {}
            for idx, w in enumerate(sp.keys):
                s, w2 = permute_boxtimes_slots(xs, w, ginv)
                cols[idx] = {sp.index[w2]: s}
            out[a] = h @ SparseMatrix.from_columns(sp.dim, sp.dim, cols)
        return self.hom.coordinates(k, out)

    def _comp(self, m, i, n, a, b):
        f, g = self.hom.basis[m][a], self.hom.basis[n][b]
        gdeg = self.hom.degrees[n][b]
        xs = self.module.carrier
        total = m + n - 1
        out: Dict[int, SparseMatrix] = {}
        for ar in range(self.hom.max_arity + 1):
            sp = self.hom.box[total].component(ar)
            if not sp.dim:
                continue
            cols = {}
            for idx, w in enumerate(sp.keys):
                inner = w[i:i + n]
                union = tuple(sorted(l for blk, _ in inner for l in blk))
                lab = {l: r for r, l in enumerate(union)}
                w_in = tuple((tuple(lab[l] for l in blk), x) for blk, x in inner)
                gm = g.get(len(union))
                if gm is None:
                    continue
                gsp = self.hom.box[n].component(len(union))
                gv = gm.transpose().row(gsp.index[w_in])
                pre = sum(xs.component(len(blk)).degrees[x] for blk, x in w[:i])
                s = _sgn(gdeg * pre)
                col: Dict[int, Fraction] = {}
                fsp = self.hom.box[m].component(ar)
                fm = f.get(ar)
                if fm is None:
                    continue
                for y, c in gv.items():
                    w_out = w[:i] + ((union, y),) + w[i + n:]
                    vadd(col, fm.transpose().row(fsp.index[w_out]), s * c)
                if col:
                    cols[idx] = col
            out[ar] = SparseMatrix.from_columns(xs.component(ar).dim, sp.dim, cols)
        return self.hom.coordinates(total, out)


def bimodule_to_operad_map(x, max_n: Optional[int] = None) -> Tuple[OperadMap, RelativeEndOperad]:
    """The morphism A -> [X, X]_B adjoint to the left action of a bimodule X.

    Returns the map and its target; ``map.failures()`` is the exact check.
    """
    end = RelativeEndOperad(x, max_n)
    a = x.operad
    xs = x.carrier

    def image(k, key):
        mats = {}
        for ar in range(end.hom.max_arity + 1):
            sp = end.hom.box[k].component(ar)
            if not sp.dim:
                continue
            cols = {idx: x.act(k, {key: 1}, list(w)) for idx, w in enumerate(sp.keys)}
            mats[ar] = SparseMatrix.from_columns(xs.component(ar).dim, sp.dim, cols)
        return end.hom.coordinates(k, mats)

    return OperadMap(a, end, image, name=f"{a.name}->End"), end


@dataclass
class RelativeComposite:
    """M o_B N as the cokernel of (rho o id - id o lambda): M o B o N -> M o N."""

    ambient: CompositeSeq
    relations: Dict[int, List[Dict[int, Fraction]]]

    def dims(self) -> Dict[int, int]:
        return {n: self.ambient.component(n).dim - len(r) for n, r in self.relations.items()}


def relative_composition(m, n, max_weight: Optional[int] = None) -> RelativeComposite:
    """Coequaliser of M o B o N => M o N for M a right and N a left B-module."""
    from .exact import row_space_basis
    b = n.operad
    ms = m.carrier
    bn = CompositeSeq(b.carrier(), n.carrier, max_weight=max_weight)
    three = CompositeSeq(ms, bn, max_weight=max_weight)
    two = CompositeSeq(ms, n.carrier, max_weight=max_weight)
    rel: Dict[int, List[Dict[int, Fraction]]] = {}
    for ar in range(ms.max_arity + 1):
        vecs = []
        for idx in range(three.component(ar).dim):
            k, xvec, slots = three.entry(ar, idx)
            v: Dict[int, Fraction] = {}
            # id o lambda
            for xi, cx in xvec.items():
                lam_terms = [((), 1)]
                for blk, yi in slots:
                    kk, bvec, t = bn.entry(len(blk), yi)
                    lv: Dict[int, Fraction] = {}
                    for bi, cb in bvec.items():
                        vadd(lv, n.act(kk, {b.space(kk).keys[bi]: 1}, list(t)), cb)
                    lam_terms = [(s + ((blk, y),), c * cy) for s, c in lam_terms for y, cy in lv.items()]
                for s, c in lam_terms:
                    try:
                        vadd(v, two.normalize(ar, k, {xi: 1}, list(s)), -cx * c)
                    except KeyError:
                        pass
            # rho o id
            for xi, cx in xvec.items():
                cur_terms = [({xi: Fraction(cx)}, k, 0, [], 0, 0)]
                for blk, yi in slots:
                    kk, bvec, t = bn.entry(len(blk), yi)
                    lab = sorted(blk)
                    bdeg = b.space(kk).degrees[next(iter(bvec))] if bvec else 0
                    new = []
                    for cur, arity, pos, acc, passed, sexp in cur_terms:
                        nxt = m.ract_vec(arity, cur, pos, kk, {b.space(kk).keys[bi]: cb for bi, cb in bvec.items()})
                        tdeg = sum(n.carrier.component(len(bb)).degrees[q] for bb, q in t)
                        moved = acc + [(tuple(lab[l] for l in bb), q) for bb, q in t]
                        new.append((nxt, arity + kk - 1, pos + kk, moved, passed + tdeg, sexp + bdeg * passed))
                    cur_terms = new
                for cur, arity, pos, acc, passed, sexp in cur_terms:
                    if arity > ms.max_arity:
                        continue
                    try:
                        vadd(v, two.normalize(ar, arity, cur, acc), _sgn(sexp))
                    except KeyError:
                        pass
            if any(v.values()):
                vecs.append({a: c for a, c in v.items() if c})
        rel[ar] = row_space_basis(vecs)
    return RelativeComposite(two, rel)
