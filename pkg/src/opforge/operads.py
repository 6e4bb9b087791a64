"""Operads and finite cooperads given by basis-level structure maps.

An :class:`Operad` answers four questions about basis keys: which keys
span arity k, their degrees, how a permutation acts on one, and the partial
composition ``a o_i b``.  Everything else (carrier SymSeq, composition
matrices, axiom checks, full compositions) is derived from those.

Convention for equivariance: ``(s.a) o_{s(i)} b = s'.(a o_i b)`` where ``s'``
moves the block of b's inputs as one unit; parallel compositions commute up
to the Koszul sign ``(-1)^{|b||c|}``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations, product as iproduct
from typing import Callable, Dict, Hashable, List, Optional, Sequence, Tuple

from .exact import ChainComplex, HomologyReport, SparseMatrix, homology, rank
from .poisson import Mono, PoissonCalculus, mono_expression
from .symseq import GradedSpace, SymSeq, Truncation, set_partitions
from .tensor import (Perm, all_perms, inverse, koszul_sign, perm_sign, transposition, vadd, vscale)


def _sgn(e: int) -> int:
    return -1 if e % 2 else 1


# ---------------------------------------------------------------------------
# permutation helpers for the equivariance axiom

def block_perm(sigma: Perm, i: int, n: int) -> Perm:
    """s' in S_{m+n-1}: a o_i b relabelled by s, the b-block kept together."""
    m = len(sigma)
    si = sigma[i]
    out = []
    for j in range(m + n - 1):
        if j < i:
            s = sigma[j]
            out.append(s if s < si else s + n - 1)
        elif j < i + n:
            out.append(si + (j - i))
        else:
            s = sigma[j - n + 1]
            out.append(s if s < si else s + n - 1)
    return tuple(out)


def inner_perm(tau: Perm, i: int, m: int) -> Perm:
    n = len(tau)
    return tuple(j if j < i else (i + tau[j - i] if j < i + n else j) for j in range(m + n - 1))


def standardize(labels: Sequence[int]) -> Perm:
    """The permutation sending position p to the rank of labels[p]."""
    order = sorted(range(len(labels)), key=lambda p: labels[p])
    out = [0] * len(labels)
    for r, p in enumerate(order):
        out[p] = r
    return tuple(out)


# ---------------------------------------------------------------------------
# operads

class Operad:
    """Base class; subclasses implement _basis, degree, act, comp, unit."""

    name = "P"

    def __init__(self, truncation: Truncation):
        self.truncation = truncation
        self._basis_cache: Dict[int, tuple] = {}
        self._space_cache: Dict[int, GradedSpace] = {}
        self._carrier: Optional[SymSeq] = None
        self._comp_cache: Dict[tuple, dict] = {}

    @property
    def max_arity(self) -> int:
        return self.truncation.max_arity

    # hooks ------------------------------------------------------------------
    def _basis(self, k: int) -> Sequence[Hashable]:
        raise NotImplementedError

    def degree(self, k: int, key) -> int:
        raise NotImplementedError

    def key_name(self, k: int, key) -> str:
        return str(key)

    def act(self, p: Perm, key) -> dict:
        raise NotImplementedError

    def _comp(self, m: int, i: int, n: int, a, b) -> dict:
        raise NotImplementedError

    def unit(self):
        raise NotImplementedError

    def differential(self, k: int, key) -> dict:
        return {}

    # derived ----------------------------------------------------------------
    def basis(self, k: int) -> tuple:
        if k not in self._basis_cache:
            self._basis_cache[k] = tuple(self._basis(k)) if 0 <= k <= self.max_arity else ()
        return self._basis_cache[k]

    def space(self, k: int) -> GradedSpace:
        if k not in self._space_cache:
            keys = self.basis(k)
            self._space_cache[k] = GradedSpace(keys, [self.degree(k, x) for x in keys],
                                               [self.key_name(k, x) for x in keys])
        return self._space_cache[k]

    def dims(self) -> Dict[int, int]:
        return {k: len(self.basis(k)) for k in range(self.max_arity + 1)}

    def carrier(self) -> SymSeq:
        if self._carrier is None:
            comps = {k: self.space(k) for k in range(self.max_arity + 1)}
            self._carrier = SymSeq.from_action(self.truncation, comps, self.act, name=self.name)
        return self._carrier

    def comp(self, m: int, i: int, n: int, a, b) -> dict:
        key = (m, i, n, a, b)
        r = self._comp_cache.get(key)
        if r is None:
            if m + n - 1 > self.max_arity:
                raise ValueError("composition leaves the truncation")
            r = {k: v for k, v in self._comp(m, i, n, a, b).items() if v}
            self._comp_cache[key] = r
        return r

    def comp_vec(self, m: int, i: int, n: int, x: dict, y: dict) -> dict:
        out: dict = {}
        for a, ca in x.items():
            for b, cb in y.items():
                vadd(out, self.comp(m, i, n, a, b), ca * cb)
        return out

    def act_vec(self, p: Perm, x: dict) -> dict:
        out: dict = {}
        for a, c in x.items():
            vadd(out, self.act(p, a), c)
        return out

    def vec_degree(self, k: int, x: dict) -> Optional[int]:
        degs = {self.degree(k, a) for a in x}
        if len(degs) > 1:
            raise ValueError("inhomogeneous element")
        return degs.pop() if degs else None

    def d_vec(self, k: int, x: dict) -> dict:
        out: dict = {}
        for a, c in x.items():
            vadd(out, self.differential(k, a), c)
        return out

    def comp_matrix(self, m: int, i: int, n: int) -> SparseMatrix:
        """Matrix of o_i : P(m) (x) P(n) -> P(m+n-1); columns ordered (a, b)."""
        sa, sb, sc = self.space(m), self.space(n), self.space(m + n - 1)
        cols = {}
        for ia, a in enumerate(sa.keys):
            for ib, b in enumerate(sb.keys):
                v = self.comp(m, i, n, a, b)
                if v:
                    cols[ia * sb.dim + ib] = {sc.index[k]: c for k, c in v.items()}
        return SparseMatrix.from_columns(sc.dim, sa.dim * sb.dim, cols)

    def gamma(self, r: int, x: dict, children: Sequence[Tuple[int, dict]]) -> dict:
        """Full composition x(y_0, ..., y_{r-1}) without relabelling."""
        cur, arity, slot = x, r, 0
        for n, y in children:
            cur = self.comp_vec(arity, slot, n, cur, y)
            arity += n - 1
            slot += n
        return cur

    def compose_blocks(self, r: int, x: dict, children: Sequence[Tuple[Sequence[int], dict]]) -> dict:
        """x(y_0, ..., y_{r-1}) with child j feeding the output labels blocks[j].

        Each child's inputs are matched to its block in increasing order; the
        result is relabelled so that the labels form 0..N-1.
        """
        flat = [l for blk, _ in children for l in blk]
        g = self.gamma(r, x, [(len(blk), y) for blk, y in children])
        return self.act_vec(standardize(flat), g)

    def __repr__(self):
        return f"{type(self).__name__}({self.name}, max_arity={self.max_arity})"


class IdentityOperad(Operad):
    name = "I"

    def _basis(self, k):
        return ["id"] if k == 1 else []

    def degree(self, k, key):
        return 0

    def act(self, p, key):
        return {key: 1}

    def _comp(self, m, i, n, a, b):
        return {"id": 1}

    def unit(self):
        return "id"


class CommOperad(Operad):
    """Comm with Comm(k) spanned by c_k, k >= 1 (non-unitary)."""

    name = "Comm"

    def _basis(self, k):
        return [k] if k >= 1 else []

    def degree(self, k, key):
        return 0

    def key_name(self, k, key):
        return f"c{k}"

    def act(self, p, key):
        return {key: 1}

    def _comp(self, m, i, n, a, b):
        return {m + n - 1: 1}

    def unit(self):
        return 1


class AssocOperad(Operad):
    """Assoc with basis the words (orderings of the inputs)."""

    name = "Assoc"

    def _basis(self, k):
        return sorted(tuple(p) for p in permutations(range(k))) if k >= 1 else []

    def degree(self, k, key):
        return 0

    def key_name(self, k, key):
        return "x" + "".join(str(l + 1) for l in key)

    def act(self, p, key):
        return {tuple(p[l] for l in key): 1}

    def _comp(self, m, i, n, a, b):
        out = []
        for l in a:
            if l < i:
                out.append(l)
            elif l == i:
                out.extend(i + x for x in b)
            else:
                out.append(l + n - 1)
        return {tuple(out): 1}

    def unit(self):
        return (0,)


def _mono_name(m: Mono) -> str:
    return "".join("[" + ",".join(str(l + 1) for l in w) + "]" for w in m)


class PoissonOperad(Operad):
    """Operad of multilinear Poisson-type expressions (e_n, or Lie when words only)."""

    def __init__(self, truncation: Truncation, d: int, lie_only: bool = False, name: str = ""):
        super().__init__(truncation)
        self.d = d
        self.lie_only = lie_only
        self.calc = PoissonCalculus(d, commutative=not lie_only)
        self.name = name or ("Lie" if lie_only else f"e{1 - d}")

    def _basis(self, k):
        if k < 1:
            return []
        out = []
        parts = [(tuple(range(k)),)] if self.lie_only else set_partitions(range(k))
        for part in parts:
            choices = [[(blk[0],) + rest for rest in permutations(blk[1:])] for blk in part]
            for words in iproduct(*choices):
                out.append(tuple(words))
        return sorted(out)

    def degree(self, k, key):
        return self.calc.mdeg(key)

    def key_name(self, k, key):
        return _mono_name(key)

    def act(self, p, key):
        return self.calc.relabel(key, lambda l: p[l])

    def _comp(self, m, i, n, a, b):
        calc = self.calc
        inner = calc.relabel(b, lambda l: l + i)

        def subst(l):
            if l == i:
                return inner
            return calc.letter(l if l < i else l + n - 1)

        # Evaluate a as an operation tree in written order.  The inserted b
        # passes every bracket applied to blocks written after its block.
        pos = next(j for j, w in enumerate(a) if i in w)
        later = sum(calc.wdeg(w) for w in a[pos + 1:])
        sign = calc.key_sign(a) * _sgn(calc.mdeg(b) * later)
        return vscale(calc.evaluate_op(a, subst), sign)

    def unit(self):
        return ((0,),)

    # generators
    @property
    def c2(self):
        return ((0,), (1,))

    @property
    def l2(self):
        return ((0, 1),)


def en_operad(n: int, truncation: Truncation) -> PoissonOperad:
    if n < 2:
        raise ValueError("e_n needs n >= 2")
    return PoissonOperad(truncation, 1 - n, name=f"e{n}")


def lie_operad(truncation: Truncation) -> PoissonOperad:
    return PoissonOperad(truncation, 0, lie_only=True, name="Lie")


class Suspension(Operad):
    """Lambda^j = End(k[j]) restricted to arity >= 1: one generator per arity.

    Degree j(k-1), sign representation to the power j, and
    e_m o_i e_n = (-1)^{j(n-1)i} e_{m+n-1} (0-based i).
    """

    def __init__(self, truncation: Truncation, j: int):
        super().__init__(truncation)
        self.j = j
        self.name = f"L{j}"

    def _basis(self, k):
        return [0] if k >= 1 else []

    def degree(self, k, key):
        return self.j * (k - 1)

    def key_name(self, k, key):
        return f"s{k}"

    def act(self, p, key):
        return {0: perm_sign(p) if self.j % 2 else 1}

    def _comp(self, m, i, n, a, b):
        return {0: _sgn(self.j * (n - 1) * i)}

    def unit(self):
        return 0


class Hadamard(Operad):
    """Level-wise (Hadamard) tensor product P (x)lev Q with Koszul signs."""

    def __init__(self, p: Operad, q: Operad, name: str = ""):
        if p.max_arity != q.max_arity:
            raise ValueError("truncation mismatch")
        super().__init__(p.truncation)
        self.left, self.right = p, q
        self.name = name or f"({p.name}@{q.name})"

    def _basis(self, k):
        return [(a, b) for a in self.left.basis(k) for b in self.right.basis(k)]

    def degree(self, k, key):
        a, b = key
        return self.left.degree(k, a) + self.right.degree(k, b)

    def key_name(self, k, key):
        a, b = key
        return f"{self.left.key_name(k, a)}*{self.right.key_name(k, b)}"

    def act(self, p, key):
        a, b = key
        va, vb = self.left.act(p, a), self.right.act(p, b)
        return {(x, y): ca * cb for x, ca in va.items() for y, cb in vb.items()}

    def _comp(self, m, i, n, a, b):
        a1, b1 = a
        a2, b2 = b
        s = _sgn(self.right.degree(m, b1) * self.left.degree(n, a2))
        va = self.left.comp(m, i, n, a1, a2)
        vb = self.right.comp(m, i, n, b1, b2)
        return {(x, y): s * ca * cb for x, ca in va.items() for y, cb in vb.items()}

    def unit(self):
        return (self.left.unit(), self.right.unit())

    def differential(self, k, key):
        a, b = key
        out: dict = {}
        for x, c in self.left.differential(k, a).items():
            out[(x, b)] = out.get((x, b), 0) + c
        s = _sgn(self.left.degree(k, a))
        for y, c in self.right.differential(k, b).items():
            out[(a, y)] = out.get((a, y), 0) + s * c
        return {k2: v for k2, v in out.items() if v}


class Shifted(Hadamard):
    """P{j} = P (x)lev Lambda^j; keys are (p_key, 0), names those of P."""

    def __init__(self, p: Operad, j: int):
        super().__init__(p, Suspension(p.truncation, j), name=f"{p.name}{{{j}}}" if j else p.name)
        self.base, self.shift = p, j

    def key_name(self, k, key):
        return self.base.key_name(k, key[0])


class EndOperad(Operad):
    """End(V) for a finite graded V, arities >= 1.

    Key (o, ins) is the elementary map v_ins[0] (x) ... -> v_o.
    """

    def __init__(self, truncation: Truncation, v: GradedSpace, name: str = "End(V)"):
        super().__init__(truncation)
        self.v = v
        self.name = name

    def _basis(self, k):
        if k < 1:
            return []
        idx = range(self.v.dim)
        return [(o, ins) for o in idx for ins in iproduct(idx, repeat=k)]

    def degree(self, k, key):
        o, ins = key
        return self.v.degrees[o] - sum(self.v.degrees[i] for i in ins)

    def key_name(self, k, key):
        o, ins = key
        return f"{self.v.names[o]}<-" + ",".join(self.v.names[i] for i in ins)

    def act(self, p, key):
        o, ins = key
        pinv = inverse(p)
        new = tuple(ins[pinv[l]] for l in range(len(ins)))
        degs = [self.v.degrees[i] for i in new]
        return {(o, new): koszul_sign(degs, pinv)}

    def _comp(self, m, i, n, a, b):
        o1, ins1 = a
        o2, ins2 = b
        if ins1[i] != o2:
            return {}
        gdeg = self.v.degrees[o2] - sum(self.v.degrees[x] for x in ins2)
        pre = sum(self.v.degrees[x] for x in ins1[:i])
        return {(o1, ins1[:i] + ins2 + ins1[i + 1:]): _sgn(gdeg * pre)}

    def unit(self):
        raise ValueError("the unit of End(V) is a sum; use unit_vec")

    def unit_vec(self) -> dict:
        return {(o, (o,)): 1 for o in range(self.v.dim)}


class MutatedOperad(Operad):
    """Wraps an operad and flips the sign of odd permutations on one key.

    Used as a negative control: the result violates equivariance.
    """

    def __init__(self, base: Operad, arity: int, key):
        super().__init__(base.truncation)
        self.base, self.bad_arity, self.bad_key = base, arity, key
        self.name = base.name + "~"

    def _basis(self, k):
        return self.base.basis(k)

    def degree(self, k, key):
        return self.base.degree(k, key)

    def key_name(self, k, key):
        return self.base.key_name(k, key)

    def act(self, p, key):
        v = self.base.act(p, key)
        if len(p) == self.bad_arity and key == self.bad_key and perm_sign(p) < 0:
            return vscale(v, -1)
        return v

    def _comp(self, m, i, n, a, b):
        return self.base.comp(m, i, n, a, b)

    def unit(self):
        return self.base.unit()


# ---------------------------------------------------------------------------
# operad maps

class OperadMap:
    """A map of operads given by images of basis keys (computed lazily)."""

    def __init__(self, source: Operad, target: Operad, image: Callable[[int, Hashable], dict], name: str = "f"):
        self.source, self.target, self._image, self.name = source, target, image, name
        self._cache: Dict[tuple, dict] = {}

    def apply(self, k: int, key) -> dict:
        r = self._cache.get((k, key))
        if r is None:
            r = self._cache[(k, key)] = self._image(k, key)
        return r

    def apply_vec(self, k: int, x: dict) -> dict:
        out: dict = {}
        for a, c in x.items():
            vadd(out, self.apply(k, a), c)
        return out

    def matrix(self, k: int) -> SparseMatrix:
        s, t = self.source.space(k), self.target.space(k)
        cols = {j: {t.index[x]: c for x, c in self.apply(k, a).items()} for j, a in enumerate(s.keys)}
        return SparseMatrix.from_columns(t.dim, s.dim, cols)

    def failures(self, max_arity: Optional[int] = None) -> List[str]:
        """Exact morphism check: compositions, equivariance, unit, degree."""
        src, tgt = self.source, self.target
        top = max_arity or src.max_arity
        out = []
        for k in range(1, top + 1):
            for a in src.basis(k):
                img = self.apply(k, a)
                for x in img:
                    if tgt.degree(k, x) != src.degree(k, a):
                        out.append(f"degree {src.key_name(k, a)}")
                        break
                for i in range(k - 1):
                    p = transposition(k, i)
                    if self.apply_vec(k, src.act(p, a)) != {x: c for x, c in tgt.act_vec(p, img).items() if c}:
                        out.append(f"equivariance s{i + 1} on {src.key_name(k, a)}")
        for m in range(1, top + 1):
            for n in range(1, top - m + 2):
                for i in range(m):
                    for a in src.basis(m):
                        for b in src.basis(n):
                            lhs = self.apply_vec(m + n - 1, src.comp(m, i, n, a, b))
                            rhs = tgt.comp_vec(m, i, n, self.apply(m, a), self.apply(n, b))
                            if lhs != rhs:
                                out.append(f"o_{i + 1} on ({src.key_name(m, a)}, {src.key_name(n, b)})")
        return out


def evaluate_composite(target: Operad, expr, gens: Dict[str, dict]) -> Tuple[List[int], dict]:
    """Evaluate a binary composite ("c"/"l", left, right) with generator images.

    Returns (sorted leaf labels, element of target(#leaves)).
    """
    if isinstance(expr, int):
        u = target.unit_vec() if hasattr(target, "unit_vec") else {target.unit(): 1}
        return [expr], u
    op, left, right = expr
    la, x = evaluate_composite(target, left, gens)
    lb, y = evaluate_composite(target, right, gens)
    val = target.compose_blocks(2, gens[op], [(la, x), (lb, y)])
    return sorted(la + lb), val


def en_map_from_generators(source: PoissonOperad, target: Operad, c_img: dict, l_img: dict,
                           name: str = "f") -> OperadMap:
    """Extend images of c2 and l2 to a map out of e_n (or Lie) via normal forms."""
    gens = {"c": c_img, "l": l_img}

    def image(k, key):
        _, v = evaluate_composite(target, mono_expression(key), gens)
        return vscale(v, source.calc.key_sign(key))

    return OperadMap(source, target, image, name)


def hopf_diagonal(n: int, t: Truncation) -> OperadMap:
    """Delta: e_n -> e_n (x)lev e_n with c -> c(x)c, l -> l(x)c + c(x)l."""
    e = en_operad(n, t)
    h = Hadamard(e, e)
    c, l = e.c2, e.l2
    return en_map_from_generators(e, h, {(c, c): 1}, {(l, c): 1, (c, l): 1}, name="Delta")


# ---------------------------------------------------------------------------
# axiom checks

@dataclass
class AxiomResult:
    name: str
    ok: bool
    witness: str = ""
    count: int = 0


def check_operad_axioms(o: Operad, max_arity: Optional[int] = None, stop_at_first: bool = True) -> List[AxiomResult]:
    top = max_arity or o.max_arity
    res: List[AxiomResult] = []

    def run(name, gen):
        bad, cnt = "", 0
        for ok, wit in gen:
            cnt += 1
            if not ok:
                bad = wit
                if stop_at_first:
                    break
        res.append(AxiomResult(name, not bad, bad, cnt))

    def nm(k, a):
        return o.key_name(k, a)

    def unit_checks():
        u = o.unit_vec() if hasattr(o, "unit_vec") else {o.unit(): 1}
        for k in range(1, top + 1):
            for a in o.basis(k):
                e = {a: 1}
                yield o.comp_vec(1, 0, k, u, e) == e, f"id o {nm(k, a)}"
                for i in range(k):
                    yield o.comp_vec(k, i, 1, e, u) == e, f"{nm(k, a)} o_{i + 1} id"

    def action_checks():
        try:
            o.carrier()
            yield True, ""
        except ValueError as exc:
            yield False, str(exc)

    def equivariance_checks():
        for m in range(1, top + 1):
            for n in range(1, top - m + 2):
                for a in o.basis(m):
                    for b in o.basis(n):
                        for i in range(m):
                            base = o.comp(m, i, n, a, b)
                            for t in range(m - 1):
                                s = transposition(m, t)
                                lhs = o.comp_vec(m, s[i], n, o.act(s, a), {b: 1})
                                rhs = o.act_vec(block_perm(s, i, n), base)
                                yield lhs == rhs, f"outer s{t + 1}: {nm(m, a)} o_{i + 1} {nm(n, b)}"
                            for t in range(n - 1):
                                s = transposition(n, t)
                                lhs = o.comp_vec(m, i, n, {a: 1}, o.act(s, b))
                                rhs = o.act_vec(inner_perm(s, i, m), base)
                                yield lhs == rhs, f"inner s{t + 1}: {nm(m, a)} o_{i + 1} {nm(n, b)}"

    def triples():
        for m in range(1, top + 1):
            for n in range(1, top - m + 2):
                for p in range(1, top - m - n + 3):
                    if m + n + p - 2 > top:
                        continue
                    for a in o.basis(m):
                        for b in o.basis(n):
                            for c in o.basis(p):
                                yield m, n, p, a, b, c

    def sequential_checks():
        for m, n, p, a, b, c in triples():
            for i in range(m):
                ab = o.comp(m, i, n, a, b)
                for j in range(i, i + n):
                    lhs = o.comp_vec(m + n - 1, j, p, ab, {c: 1})
                    rhs = o.comp_vec(m, i, n + p - 1, {a: 1}, o.comp(n, j - i, p, b, c))
                    yield lhs == rhs, f"({nm(m, a)} o_{i + 1} {nm(n, b)}) o_{j + 1} {nm(p, c)}"

    def parallel_checks():
        for m, n, p, a, b, c in triples():
            if m < 2:
                continue
            s = _sgn(o.degree(n, b) * o.degree(p, c))
            for i in range(m):
                ab = o.comp(m, i, n, a, b)
                for j in range(m + n - 1):
                    if i <= j < i + n:
                        continue
                    lhs = o.comp_vec(m + n - 1, j, p, ab, {c: 1})
                    if j < i:
                        ac = o.comp(m, j, p, a, c)
                        rhs = o.comp_vec(m + p - 1, i + p - 1, n, ac, {b: 1})
                    else:
                        ac = o.comp(m, j - n + 1, p, a, c)
                        rhs = o.comp_vec(m + p - 1, i, n, ac, {b: 1})
                    yield lhs == vscale(rhs, s), f"({nm(m, a)} o_{i + 1} {nm(n, b)}) o_{j + 1} {nm(p, c)}"

    def derivation_checks():
        for m in range(1, top + 1):
            for n in range(1, top - m + 2):
                for a in o.basis(m):
                    for b in o.basis(n):
                        for i in range(m):
                            lhs = o.d_vec(m + n - 1, o.comp(m, i, n, a, b))
                            rhs = o.comp_vec(m, i, n, o.differential(m, a), {b: 1})
                            vadd(rhs, o.comp_vec(m, i, n, {a: 1}, o.differential(n, b)), _sgn(o.degree(m, a)))
                            yield lhs == rhs, f"d({nm(m, a)} o_{i + 1} {nm(n, b)})"

    run("action", action_checks())
    run("unit", unit_checks())
    run("equivariance", equivariance_checks())
    run("associativity-sequential", sequential_checks())
    run("associativity-parallel", parallel_checks())
    run("derivation", derivation_checks())
    return res


# ---------------------------------------------------------------------------
# cooperads

class Cooperad:
    """Finite cooperad given by partial decompositions Delta_i: C(m+n-1) -> C(m) (x) C(n)."""

    name = "C"

    def __init__(self, truncation: Truncation):
        self.truncation = truncation
        self._carrier = None
        self._space_cache: Dict[int, GradedSpace] = {}

    @property
    def max_arity(self):
        return self.truncation.max_arity

    def basis(self, k) -> tuple:
        raise NotImplementedError

    def degree(self, k, key) -> int:
        raise NotImplementedError

    def key_name(self, k, key) -> str:
        return str(key)

    def act(self, p: Perm, key) -> dict:
        raise NotImplementedError

    def decomp(self, m: int, i: int, n: int, key) -> dict:
        """Component of the decomposition of key in C(m) (x) C(n) dual to o_i."""
        raise NotImplementedError

    def counit(self):
        raise NotImplementedError

    def space(self, k: int) -> GradedSpace:
        if k not in self._space_cache:
            keys = self.basis(k)
            self._space_cache[k] = GradedSpace(keys, [self.degree(k, x) for x in keys],
                                               [self.key_name(k, x) for x in keys])
        return self._space_cache[k]

    def carrier(self) -> SymSeq:
        if self._carrier is None:
            comps = {k: self.space(k) for k in range(self.max_arity + 1)}
            self._carrier = SymSeq.from_action(self.truncation, comps, self.act, name=self.name)
        return self._carrier

    def act_vec(self, p, x):
        out: dict = {}
        for a, c in x.items():
            vadd(out, self.act(p, a), c)
        return out

    def dims(self):
        return {k: len(self.basis(k)) for k in range(self.max_arity + 1)}


class DualCooperad(Cooperad):
    """The arity-wise linear dual of an operad; keys are those of the operad.

    ``<Delta_i(a*), b* (x) c*> = (-1)^{|b||c|} <a*, b o_i c>``.
    Biaugmentation: the counit pairs with the unit of the operad; the
    coaugmentation is the dual of that unit (arity 1).
    """

    def __init__(self, p: Operad, name: str = ""):
        super().__init__(p.truncation)
        self.op = p
        self.name = name or f"{p.name}*"
        self._tables: Dict[tuple, Dict[Hashable, dict]] = {}

    def basis(self, k):
        return self.op.basis(k)

    def degree(self, k, key):
        return -self.op.degree(k, key)

    def key_name(self, k, key):
        return self.op.key_name(k, key) + "^"

    def act(self, p, key):
        # (s.f)(x) = f(s^{-1} x)
        pinv = inverse(p)
        k = len(p)
        out = {}
        for b in self.op.basis(k):
            c = self.op.act(pinv, b).get(key)
            if c:
                out[b] = c
        return out

    def table(self, m: int, i: int, n: int) -> Dict[Hashable, dict]:
        key = (m, i, n)
        t = self._tables.get(key)
        if t is None:
            t = {}
            for a in self.op.basis(m):
                for b in self.op.basis(n):
                    s = _sgn(self.op.degree(m, a) * self.op.degree(n, b))
                    for c, v in self.op.comp(m, i, n, a, b).items():
                        t.setdefault(c, {})[(a, b)] = s * v
            self._tables[key] = t
        return t

    def decomp(self, m, i, n, key):
        return self.table(m, i, n).get(key, {})

    def counit(self):
        return self.op.unit()

    def coaugmentation(self):
        return self.op.unit()


def dualize(o: Operad) -> DualCooperad:
    return DualCooperad(o)


class DualOperad(Operad):
    """The dual of a DualCooperad, realised back on the original keys."""

    def __init__(self, c: DualCooperad):
        super().__init__(c.truncation)
        self.co = c
        self.name = c.name + "*"

    def _basis(self, k):
        return self.co.basis(k)

    def degree(self, k, key):
        return -self.co.degree(k, key)

    def key_name(self, k, key):
        return self.co.op.key_name(k, key)

    def act(self, p, key):
        pinv = inverse(p)
        out = {}
        for b in self.co.basis(len(p)):
            c = self.co.act(pinv, b).get(key)
            if c:
                out[b] = c
        return out

    def _comp(self, m, i, n, a, b):
        s = _sgn(self.co.degree(m, a) * self.co.degree(n, b))
        out = {}
        for c, row in self.co.table(m, i, n).items():
            v = row.get((a, b))
            if v:
                out[c] = s * v
        return out

    def unit(self):
        return self.co.counit()


def check_cooperad_axioms(c: Cooperad, max_arity: Optional[int] = None) -> List[AxiomResult]:
    """Coassociativity via the dual operad; equivariance via the action."""
    if isinstance(c, DualCooperad):
        return check_operad_axioms(DualOperad(c), max_arity)
    raise TypeError("only dual cooperads are supported")


# ---------------------------------------------------------------------------
# presets and Koszul duals

PRESET_RE = re.compile(r"^(I|comm|assoc|lie|e(\d+))(\{(-?\d+)\})?$")


@dataclass(frozen=True)
class PresetId:
    family: str  # I, comm, assoc, lie, en
    n: int = 0
    shift: int = 0

    @classmethod
    def parse(cls, text: str) -> "PresetId":
        m = PRESET_RE.match(text.strip())
        if not m:
            raise ValueError(f"unknown preset {text!r}")
        fam = m.group(1)
        shift = int(m.group(4)) if m.group(4) else 0
        if m.group(2):
            n = int(m.group(2))
            if n < 2:
                raise ValueError("e_n needs n >= 2")
            return cls("en", n, shift)
        return cls(fam, 0, shift)

    def label(self) -> str:
        base = f"e{self.n}" if self.family == "en" else self.family
        return base + (f"{{{self.shift}}}" if self.shift else "")


def _base_preset(pid: PresetId, t: Truncation) -> Operad:
    if pid.family == "I":
        return IdentityOperad(t)
    if pid.family == "comm":
        return CommOperad(t)
    if pid.family == "assoc":
        return AssocOperad(t)
    if pid.family == "lie":
        return lie_operad(t)
    if pid.family == "en":
        return en_operad(pid.n, t)
    raise ValueError(f"unsupported preset {pid}")


def build_preset(pid, t: Truncation) -> Operad:
    if isinstance(pid, str):
        pid = PresetId.parse(pid)
    base = _base_preset(pid, t)
    op = Shifted(base, pid.shift) if pid.shift else base
    op.preset = pid
    return op


@dataclass
class KoszulData:
    """O, its Koszul dual cooperad O^! = K^* (K = O^!{1}), and kappa."""

    operad: Operad
    dual_operad: Operad          # K
    cooperad: DualCooperad       # K^*
    kappa: Dict[Hashable, dict]  # C(2) key -> element of O(2)
    pairing: List[Tuple[Hashable, Hashable]]  # (O(2) generator, C(2) key) with kappa(c) = t


def _kappa_from_reps(c: Cooperad, o: Operad, reps: List[Tuple[Hashable, Hashable]]) -> Dict[Hashable, dict]:
    kappa: Dict[Hashable, dict] = {}
    for ckey, okey in reps:
        for p in all_perms(2):
            v = c.act(p, ckey)
            if len(v) != 1:
                raise ValueError("arity-2 dual action is not monomial")
            (x, s), = v.items()
            img = vscale(o.act(p, okey), Fraction(1, 1) / s)
            if x in kappa and kappa[x] != img:
                raise ValueError("inconsistent kappa on an orbit")
            kappa[x] = img
    return kappa


def koszul_data(pid, t: Truncation) -> KoszulData:
    if isinstance(pid, str):
        pid = PresetId.parse(pid)
    base = _base_preset(pid, t)
    fam = pid.family
    if fam == "I":
        k_op: Operad = IdentityOperad(t)
        reps: List[tuple] = []
    elif fam == "comm":
        lie = lie_operad(t)
        k_op = Shifted(lie, 1)
        reps = [((lie.l2, 0), 2)]
    elif fam == "lie":
        k_op = Shifted(CommOperad(t), 1)
        reps = [((2, 0), base.l2)]
    elif fam == "assoc":
        k_op = Shifted(AssocOperad(t), 1)
        reps = [(((0, 1), 0), (0, 1))]
    elif fam == "en":
        k_op = Shifted(en_operad(pid.n, t), pid.n)
        e = base
        reps = [((e.l2, 0), e.c2), ((e.c2, 0), e.l2)]
    else:
        raise ValueError(f"unsupported preset {pid}")
    op = base
    if pid.shift:
        k_op = Shifted(k_op, -pid.shift)
        op = Shifted(base, pid.shift)
        reps = [((ck, 0), {(ok, 0): 1}) for ck, ok in reps]
    else:
        reps = [(ck, {ok: 1}) for ck, ok in reps]
    op.preset = pid
    coop = DualCooperad(k_op, name=f"{pid.label()}^!")
    kappa: Dict[Hashable, dict] = {}
    for ckey, img in reps:
        (okey, _), = img.items()
        kappa.update(_kappa_from_reps(coop, op, [(ckey, okey)]))
    return KoszulData(op, k_op, coop, kappa, [(ok, ck) for ck, ok in
                                              [(c, next(iter(v))) for c, v in reps]])


def koszul_dual_preset(pid, t: Truncation) -> DualCooperad:
    return koszul_data(pid, t).cooperad


# ---------------------------------------------------------------------------
# operadic cobar resolution Cobar_Op(O^!) -> O

def _tree_leaves(tree) -> List[int]:
    if isinstance(tree, int):
        return [tree]
    out = []
    for ch in tree[2]:
        out += _tree_leaves(ch)
    return out


def _tree_min(tree) -> int:
    return tree if isinstance(tree, int) else min(_tree_leaves(tree))


class CobarOperad:
    """Free operad on s^{-1} C(>=2) with the cobar differential, per arity.

    A tree is ``(arity, ckey, children)`` with children sorted by minimal
    leaf; leaves are labels.  Vertex degree is |c| + 1.  Vertices are
    ordered for Koszul signs by a preorder traversal.
    """

    def __init__(self, c: Cooperad):
        self.c = c

    def vdeg(self, r, key) -> int:
        return self.c.degree(r, key) + 1

    def tdeg(self, tree) -> int:
        if isinstance(tree, int):
            return 0
        r, key, ch = tree
        return self.vdeg(r, key) + sum(self.tdeg(x) for x in ch)

    def normalize_vertex(self, r, vec: dict, children: Sequence) -> dict:
        """c(children) for c a vector of C(r); sorts children (Koszul signs)."""
        order = sorted(range(r), key=lambda j: _tree_min(children[j]))
        p = [0] * r
        for new, old in enumerate(order):
            p[old] = new
        p = tuple(p)
        sign = koszul_sign([self.tdeg(x) for x in children], p)
        sorted_ch = tuple(children[j] for j in order)
        # c(T_0..T_{r-1}) = (p.c)(T_{p^{-1}(0)}, ...) up to Koszul sign
        out = {}
        for key, v in self.c.act_vec(p, vec).items():
            out[(r, key, sorted_ch)] = out.get((r, key, sorted_ch), 0) + sign * v
        return {k: v for k, v in out.items() if v}

    def basis(self, leaves: Sequence[int]) -> List:
        leaves = tuple(sorted(leaves))
        if len(leaves) == 1:
            return [leaves[0]]
        out = []
        for part in set_partitions(leaves):
            r = len(part)
            if r < 2 or r > self.c.max_arity:
                continue
            subs = [self.basis(blk) for blk in part]
            for key in self.c.basis(r):
                for ch in iproduct(*subs):
                    out.append((r, key, tuple(ch)))
        return out

    def differential(self, tree) -> dict:
        if isinstance(tree, int):
            return {}
        r, key, ch = tree
        out: dict = {}
        # the vertex itself
        for q in range(2, r):
            m = r - q + 1
            for S in _subsets(r, q):
                rest = [j for j in range(r) if j not in S]
                sigma = tuple(_shuffle_perm(S, rest, r))
                vec = self.c.act(inverse(sigma), key)
                for k2, cv in vec.items():
                    for (a, b), coef in self.c.decomp(m, 0, q, k2).items():
                        sign = -_sgn(self.c.degree(m, a))
                        new_ch = [ch[j] for j in S] + [ch[j] for j in rest]
                        perm = [0] * r
                        for pos, j in enumerate(S + rest):
                            perm[j] = pos
                        ks = koszul_sign([self.tdeg(x) for x in ch], tuple(perm))
                        inner_ch = new_ch[:q]
                        inner = self.normalize_vertex(q, {b: 1}, inner_ch)
                        for itree, iv in inner.items():
                            outer_children = [itree] + new_ch[q:]
                            for t2, v2 in self.normalize_vertex(m, {a: 1}, outer_children).items():
                                out[t2] = out.get(t2, 0) + sign * ks * cv * coef * iv * v2
        # children, with the sign of passing the vertex and earlier subtrees
        pre = self.vdeg(r, key)
        for j, x in enumerate(ch):
            dx = self.differential(x)
            s = _sgn(pre)
            for y, v in dx.items():
                new = list(ch)
                new[j] = y
                out[(r, key, tuple(new))] = out.get((r, key, tuple(new)), 0) + s * v
            pre += self.tdeg(x)
        return {k: v for k, v in out.items() if v}

    def complex(self, k: int) -> ChainComplex:
        trees = sorted(self.basis(range(k)), key=repr)
        by_deg: Dict[int, list] = {}
        for tr in trees:
            by_deg.setdefault(self.tdeg(tr), []).append(tr)
        lo, hi = min(by_deg), max(by_deg)
        degrees = list(range(lo, hi + 1))
        bases = {d: by_deg.get(d, []) for d in degrees}
        idx = {d: {tr: i for i, tr in enumerate(bases[d])} for d in degrees}
        diffs = {}
        for d in degrees[:-1]:
            cols = {}
            for j, tr in enumerate(bases[d]):
                cols[j] = {idx[d + 1][y]: v for y, v in self.differential(tr).items()}
            diffs[d] = SparseMatrix.from_columns(len(bases[d + 1]), len(bases[d]), cols)
        names = {d: [repr(tr) for tr in bases[d]] for d in degrees}
        return ChainComplex(degrees, {d: len(bases[d]) for d in degrees}, diffs, names), bases


def _subsets(r, q):
    from itertools import combinations
    return [list(s) for s in combinations(range(r), q)]


def _shuffle_perm(S, rest, r):
    """Permutation of a o_0 b's inputs: b's inputs -> S, a's others -> rest."""
    out = [0] * r
    for pos, j in enumerate(S):
        out[pos] = j
    for pos, j in enumerate(rest):
        out[len(S) + pos] = j
    return out


@dataclass
class CobarResolution:
    arity: int
    complex: ChainComplex
    report: HomologyReport
    target_dims: Dict[int, int]
    comparison_rank: int
    chain_map: bool = True

    @property
    def quasi_iso(self) -> bool:
        h = {d: b for d, b in self.report.betti.items() if b}
        return (self.chain_map and h == {d: v for d, v in self.target_dims.items() if v}
                and self.comparison_rank == sum(self.target_dims.values()))


def operadic_cobar_resolution(kd: KoszulData, max_arity: Optional[int] = None) -> List[CobarResolution]:
    """Per arity, the complex Cobar(O^!)(k), its homology and the map to O(k)."""
    cob = CobarOperad(kd.cooperad)
    o = kd.operad
    top = max_arity or o.max_arity
    out = []
    for k in range(1, top + 1):
        cx, bases = cob.complex(k)
        rep = homology(cx)
        target_dims: Dict[int, int] = {}
        for a in o.basis(k):
            d = o.degree(k, a)
            target_dims[d] = target_dims.get(d, 0) + 1
        # comparison: binary trees -> composites of kappa; other trees -> 0
        rk, chain_map = 0, True
        for d in cx.degrees:
            imgs = []
            for tr in bases[d]:
                imgs.append(_tree_to_operad(o, kd.kappa, tr))
            okeys = o.space(k)
            m = SparseMatrix.from_columns(okeys.dim, len(imgs),
                                          {j: {okeys.index[x]: v for x, v in img.items()} for j, img in enumerate(imgs)})
            # the map kills boundaries; its rank on cycles detects homology
            if d - 1 in cx.differentials and not (m @ cx.differentials[d - 1]).is_zero():
                chain_map = False
            kern = _kernel_cols(cx, d)
            rk += rank(m @ kern) if kern.cols else 0
        out.append(CobarResolution(k, cx, rep, target_dims, rk, chain_map))
    return out


def _kernel_cols(cx: ChainComplex, d: int) -> SparseMatrix:
    from .exact import kernel_vectors
    dim = cx.dims[d]
    if d in cx.differentials:
        ks = kernel_vectors(cx.differentials[d])
    else:
        ks = [{i: 1} for i in range(dim)]
    return SparseMatrix.from_columns(dim, len(ks), {j: v for j, v in enumerate(ks)})


def _tree_to_operad(o: Operad, kappa, tree) -> dict:
    if isinstance(tree, int):
        return {o.unit(): 1}
    r, key, ch = tree
    if r != 2:
        return {}
    img = kappa.get(key, {})
    if not img:
        return {}
    children = []
    for x in ch:
        if isinstance(x, int):
            children.append(([x], {o.unit(): 1}))
        else:
            v = _tree_to_operad(o, kappa, x)
            if not v:
                return {}
            children.append((sorted(_tree_leaves(x)), v))
    return o.compose_blocks(2, img, children)
