"""Sparse vectors over basis keys, permutations and Koszul signs.

A vector is a plain ``dict`` mapping hashable basis keys to nonzero
coefficients (``int`` or ``Fraction``).  Permutations of ``{0..k-1}`` are
tuples ``p`` with ``p[j]`` the image of ``j``; they act on the left on tensor
words by sending the factor in slot ``j`` to slot ``p[j]``.
"""
from __future__ import annotations

from fractions import Fraction
from itertools import permutations
from math import factorial
from typing import Dict, Hashable, Iterable, List, Mapping, Sequence, Tuple

Vec = Dict[Hashable, object]
Perm = Tuple[int, ...]


# -- vectors -----------------------------------------------------------------

def vadd(acc: Vec, v: Mapping, s=1) -> Vec:
    """acc += s*v, in place; returns acc."""
    if not s:
        return acc
    for k, c in v.items():
        x = acc.get(k, 0) + s * c
        if x:
            acc[k] = x
        else:
            acc.pop(k, None)
    return acc


def vsum(vs: Iterable[Mapping], coeffs: Iterable = None) -> Vec:
    out: Vec = {}
    if coeffs is None:
        for v in vs:
            vadd(out, v)
    else:
        for v, s in zip(vs, coeffs):
            vadd(out, v, s)
    return out


def vscale(v: Mapping, s) -> Vec:
    if not s:
        return {}
    return {k: s * c for k, c in v.items()}


def vsub(a: Mapping, b: Mapping) -> Vec:
    return vadd(dict(a), b, -1)


def vclean(v: Mapping) -> Vec:
    return {k: c for k, c in v.items() if c}


def vequal(a: Mapping, b: Mapping) -> bool:
    return vclean(a) == vclean(b)


def vlinear(f, v: Mapping) -> Vec:
    """Extend a basis-level map ``f(key) -> Vec`` linearly."""
    out: Vec = {}
    for k, c in v.items():
        vadd(out, f(k), c)
    return out


def vfrac(v: Mapping) -> Dict[Hashable, Fraction]:
    return {k: Fraction(c) for k, c in v.items() if c}


# -- permutations ------------------------------------------------------------

def identity_perm(k: int) -> Perm:
    return tuple(range(k))


def compose(p: Perm, q: Perm) -> Perm:
    """(p o q)(j) = p(q(j))."""
    return tuple(p[j] for j in q)


def inverse(p: Perm) -> Perm:
    out = [0] * len(p)
    for j, pj in enumerate(p):
        out[pj] = j
    return tuple(out)


def transposition(k: int, i: int) -> Perm:
    """Adjacent transposition swapping i and i+1 (0-based)."""
    p = list(range(k))
    p[i], p[i + 1] = p[i + 1], p[i]
    return tuple(p)


def perm_sign(p: Perm) -> int:
    s = 1
    seen = [False] * len(p)
    for i in range(len(p)):
        if seen[i]:
            continue
        j, n = i, 0
        while not seen[j]:
            seen[j] = True
            j = p[j]
            n += 1
        if n % 2 == 0:
            s = -s
    return s


def as_transpositions(p: Perm) -> List[int]:
    """Indices i of adjacent transpositions with p = s_{i_1} o ... o s_{i_r}."""
    word = []
    arr = list(inverse(p))  # bubble sort arr; record swaps
    # p = s_{w1} ... s_{wr} where sorting inverse(p) by swaps gives the word
    n = len(arr)
    for a in range(n):
        for b in range(n - 1 - a):
            if arr[b] > arr[b + 1]:
                arr[b], arr[b + 1] = arr[b + 1], arr[b]
                word.append(b)
    return word


def all_perms(k: int) -> List[Perm]:
    return [tuple(p) for p in permutations(range(k))]


def koszul_sign(degrees: Sequence[int], p: Perm) -> int:
    """Sign of moving factor j (of the given degree) to slot p[j]."""
    s = 0
    k = len(degrees)
    for i in range(k):
        di = degrees[i]
        if di % 2 == 0:
            continue
        pi = p[i]
        for j in range(i + 1, k):
            if p[j] < pi and degrees[j] % 2:
                s += 1
    return -1 if s % 2 else 1


def permute_word(word: Sequence, degrees: Sequence[int], p: Perm):
    """Apply p to a tensor word; returns (sign, new word)."""
    out = [None] * len(word)
    for j, w in enumerate(word):
        out[p[j]] = w
    return koszul_sign(degrees, p), tuple(out)


def sort_word(word: Sequence, degrees: Sequence[int], key=None):
    """Sort a tensor word stably by ``key``; returns (sign, sorted word, p)
    where p is the permutation that was applied (slot j -> p[j])."""
    idx = sorted(range(len(word)), key=(lambda j: key(word[j])) if key else (lambda j: word[j]))
    p = [0] * len(word)
    for new, old in enumerate(idx):
        p[old] = new
    p = tuple(p)
    return koszul_sign(degrees, p), tuple(word[j] for j in idx), p


def shuffles(a: int, b: int) -> List[Tuple[Tuple[int, ...], Tuple[int, ...]]]:
    """(a,b)-unshuffles of range(a+b) as pairs of increasing index tuples."""
    from itertools import combinations
    n = a + b
    out = []
    for first in combinations(range(n), a):
        rest = tuple(j for j in range(n) if j not in first)
        out.append((first, rest))
    return out


def fact(n: int) -> int:
    return factorial(n)
