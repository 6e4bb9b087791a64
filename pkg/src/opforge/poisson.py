"""Normal forms in free multilinear Poisson-type algebras.

The bracket has degree ``d`` (``d = 1 - n`` for e_n, ``d = 0`` for Lie) and
the product has degree 0.  Variables are integer labels of degree 0.

A *word* is a tuple of labels read as the left-normed bracket
``[[..[w0, w1], ..], wr]`` with ``w0 = min(word)``.  A *monomial* is a tuple of
words sorted by first letter, read as their product in that order.  An
element is a dict monomial -> coefficient.  Words with minimal letter first
and blocks sorted by minimum form a basis of the multilinear part, which is
how e_n(k) gets its k! basis.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Dict, Tuple, Union

from .tensor import koszul_sign, vadd, vscale

Word = Tuple[int, ...]
Mono = Tuple[Word, ...]


def _sgn(e: int) -> int:
    return -1 if e % 2 else 1


class PoissonCalculus:
    """Free multilinear algebra with commutative product and a degree-d bracket."""

    def __init__(self, d: int, commutative: bool = True):
        self.d = d
        self.commutative = commutative  # False: Lie words only (no products)

    # -- degrees
    def wdeg(self, w: Word) -> int:
        return self.d * (len(w) - 1)

    def mdeg(self, m: Mono) -> int:
        return sum(self.d * (len(w) - 1) for w in m)

    # -- words
    def word_bracket(self, u: Word, v: Word) -> Dict[Word, int]:
        return _word_bracket(self.d, u, v)

    # -- monomials
    def mono_mul(self, a: Mono, b: Mono) -> Tuple[int, Mono]:
        blocks = a + b
        degs = [self.wdeg(w) for w in blocks]
        order = sorted(range(len(blocks)), key=lambda j: blocks[j][0])
        p = [0] * len(blocks)
        for new, old in enumerate(order):
            p[old] = new
        return koszul_sign(degs, tuple(p)), tuple(blocks[j] for j in order)

    def mul(self, x: dict, y: dict) -> dict:
        if not self.commutative:
            raise ValueError("product unavailable in the Lie-only calculus")
        out: dict = {}
        for a, ca in x.items():
            for b, cb in y.items():
                s, m = self.mono_mul(a, b)
                out[m] = out.get(m, 0) + s * ca * cb
        return {k: v for k, v in out.items() if v}

    def mono_bracket(self, a: Mono, b: Mono) -> dict:
        d = self.d
        if len(b) >= 2:
            head, rest = b[:1], b[1:]
            out: dict = {}
            for m, c in self.mono_bracket(a, head).items():
                s, mm = self.mono_mul(m, rest)
                out[mm] = out.get(mm, 0) + s * c
            sign = _sgn((self.mdeg(a) + d) * self.mdeg(head))
            for m, c in self.mono_bracket(a, rest).items():
                s, mm = self.mono_mul(head, m)
                out[mm] = out.get(mm, 0) + sign * s * c
            return {k: v for k, v in out.items() if v}
        if len(a) >= 2:
            sign = -_sgn((self.mdeg(a) + d) * (self.mdeg(b) + d))
            return vscale(self.mono_bracket(b, a), sign)
        u, v = a[0], b[0]
        return {(w,): c for w, c in _word_bracket(d, u, v).items()}

    def bracket(self, x: dict, y: dict) -> dict:
        out: dict = {}
        for a, ca in x.items():
            for b, cb in y.items():
                vadd(out, self.mono_bracket(a, b), ca * cb)
        return out

    # -- evaluation
    def letter(self, label: int) -> dict:
        return {((label,),): 1}

    def evaluate(self, m: Mono, subst) -> dict:
        """Evaluate monomial m with each label l replaced by the element subst(l)."""
        result = None
        for w in m:
            e = subst(w[0])
            for l in w[1:]:
                e = self.bracket(e, subst(l))
            result = e if result is None else self.mul(result, e)
        return result if result is not None else {}

    def elem_degree(self, x: dict) -> int:
        return self.mdeg(next(iter(x))) if x else 0

    def op_bracket(self, x: dict, y: dict) -> dict:
        """The bracket as an operation: B(u, v) = (-1)^{d|u|} [u, v]."""
        return vscale(self.bracket(x, y), _sgn(self.d * self.elem_degree(x)))

    def key_sign(self, m: Mono) -> int:
        """Basis monomial m equals key_sign(m) times its left-normed B-tree."""
        return _sgn(self.d * sum((len(w) - 1) * (len(w) - 2) // 2 for w in m))

    def evaluate_op(self, m: Mono, subst) -> dict:
        """Apply the written-order operation tree of m (B-brackets, products)."""
        result = None
        for w in m:
            e = subst(w[0])
            for l in w[1:]:
                e = self.op_bracket(e, subst(l))
            result = e if result is None else self.mul(result, e)
        return result if result is not None else {}

    def relabel(self, m: Mono, f) -> dict:
        """Relabel variables by f and return the normal form."""
        return self.evaluate(m, lambda l: self.letter(f(l)))


@lru_cache(maxsize=None)
def _word_bracket_cached(d: int, u: Word, v: Word) -> Tuple[Tuple[Word, int], ...]:
    if u[0] > v[0]:
        s = -_sgn((d * len(u)) * (d * len(v)))
        return tuple((w, s * c) for w, c in _word_bracket_cached(d, v, u))
    if len(v) == 1:
        return ((u + v, 1),)
    vp, z = v[:-1], v[-1:]
    out: Dict[Word, int] = {}
    # [u,[vp,z]] = [[u,vp],z] + (-1)^{|u||vp|} [vp,[u,z]]   (shifted degrees)
    for w, c in _word_bracket_cached(d, u, vp):
        out[w + z] = out.get(w + z, 0) + c
    uz = u + z
    s = _sgn((d * len(u)) * (d * len(vp))) * -_sgn((d * len(vp)) * (d * len(uz)))
    for w, c in _word_bracket_cached(d, uz, vp):
        out[w] = out.get(w, 0) + s * c
    return tuple(sorted((w, c) for w, c in out.items() if c))


def _word_bracket(d: int, u: Word, v: Word) -> Dict[Word, int]:
    return dict(_word_bracket_cached(d, tuple(u), tuple(v)))


# ---------------------------------------------------------------------------
# formal composites of the generators c2 and l2

Expr = Union[int, Tuple[str, "Expr", "Expr"]]


def _labels(expr) -> list:
    if isinstance(expr, int):
        return [expr]
    if not (isinstance(expr, tuple) and len(expr) == 3 and expr[0] in ("c", "l")):
        raise ValueError(f"malformed composite: {expr!r}")
    return _labels(expr[1]) + _labels(expr[2])


def normal_form_en(expr: Expr, n: int) -> dict:
    """Normal form of a formal composite of c2 ("c") and l2 ("l") in e_n.

    Leaves are distinct integers 0..k-1, e.g. ``("l", ("c", 0, 1), 2)``.
    """
    if n < 2:
        raise ValueError("e_n needs n >= 2")
    labels = _labels(expr)
    if sorted(labels) != list(range(len(labels))):
        raise ValueError("leaves must be exactly 0..k-1, each used once")
    calc = PoissonCalculus(1 - n)

    def ev(e):
        if isinstance(e, int):
            return calc.letter(e)
        op, a, b = e
        x, y = ev(a), ev(b)
        return calc.mul(x, y) if op == "c" else calc.op_bracket(x, y)

    return ev(expr)


def mono_expression(m: Mono) -> Expr:
    """The written-order composite of m; its normal form is key_sign(m) * m."""
    blocks = []
    for w in m:
        e: Expr = w[0]
        for l in w[1:]:
            e = ("l", e, l)
        blocks.append(e)
    out = blocks[0]
    for b in blocks[1:]:
        out = ("c", out, b)
    return out
