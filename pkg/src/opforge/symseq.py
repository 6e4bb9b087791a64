"""Symmetric sequences with explicit signed symmetric-group actions.

A :class:`SymSeq` stores, for every arity ``k`` up to the truncation, a based
graded vector space and the matrices of the adjacent transpositions
``s_1 .. s_{k-1}`` acting on it.  Composite objects (composition products,
level-wise products, inner homs, shifts) are built as new explicit SymSeqs.

Conventions: a permutation ``p`` acts on the left and sends input/slot ``j``
to ``p[j]``; moving graded factors past each other costs the Koszul sign.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product as iproduct
from math import factorial
from typing import Callable, Dict, Hashable, List, Optional, Sequence, Tuple

from .exact import SparseMatrix, frac_str, kernel_vectors, row_space_basis
from .tensor import Perm, all_perms, as_transpositions, inverse, koszul_sign, transposition, vadd


@dataclass(frozen=True)
class Truncation:
    max_arity: int
    max_weight: int = 1

    def __post_init__(self):
        if self.max_arity < 1 or self.max_weight < 1:
            raise ValueError("truncation bounds must be >= 1")


class GradedSpace:
    """Finite ordered basis of (key, degree) pairs with printable names."""

    __slots__ = ("keys", "degrees", "names", "index")

    def __init__(self, keys: Sequence[Hashable], degrees: Sequence[int], names: Optional[Sequence[str]] = None):
        self.keys = tuple(keys)
        self.degrees = tuple(int(d) for d in degrees)
        if len(self.keys) != len(self.degrees):
            raise ValueError("keys and degrees differ in length")
        self.index = {k: i for i, k in enumerate(self.keys)}
        if len(self.index) != len(self.keys):
            raise ValueError("basis keys must be unique")
        self.names = tuple(names) if names is not None else tuple(str(k) for k in self.keys)
        if len(set(self.names)) != len(self.names):
            raise ValueError("basis names must be unique")

    @classmethod
    def from_pairs(cls, pairs: Sequence[Tuple[str, int]]):
        return cls([n for n, _ in pairs], [d for _, d in pairs], [n for n, _ in pairs])

    def __len__(self):
        return len(self.keys)

    @property
    def dim(self) -> int:
        return len(self.keys)

    def degree(self, key) -> int:
        return self.degrees[self.index[key]]

    def degree_dims(self) -> Dict[int, int]:
        out: Dict[int, int] = {}
        for d in self.degrees:
            out[d] = out.get(d, 0) + 1
        return out

    def to_indices(self, vec) -> Dict[int, Fraction]:
        return {self.index[k]: Fraction(c) for k, c in vec.items() if c}

    def from_indices(self, vec) -> Dict[Hashable, Fraction]:
        return {self.keys[i]: c for i, c in vec.items() if c}

    def __eq__(self, other):
        return isinstance(other, GradedSpace) and self.keys == other.keys and self.degrees == other.degrees

    def __hash__(self):
        return hash((self.keys, self.degrees))

    def __repr__(self):
        return f"GradedSpace(dim={self.dim})"


def matrix_of(src: GradedSpace, tgt: GradedSpace, f: Callable[[Hashable], dict]) -> SparseMatrix:
    cols = {}
    for j, k in enumerate(src.keys):
        v = f(k)
        if v:
            cols[j] = {tgt.index[kk]: c for kk, c in v.items() if c}
    return SparseMatrix.from_columns(tgt.dim, src.dim, cols)


class SymSeq:
    """Arity-indexed based graded spaces with Sigma_k actions."""

    def __init__(self, truncation: Truncation, components: Dict[int, GradedSpace],
                 transpositions: Dict[int, List[SparseMatrix]], check: bool = True, name: str = ""):
        self.truncation = truncation
        self.name = name
        self.components = {k: components.get(k, GradedSpace([], [])) for k in range(truncation.max_arity + 1)}
        self.transpositions = {}
        for k in range(truncation.max_arity + 1):
            mats = list(transpositions.get(k, []))
            dim = self.components[k].dim
            if not mats and k >= 2:
                mats = [SparseMatrix.identity(dim) if dim else SparseMatrix(0, 0) for _ in range(k - 1)]
            if len(mats) != max(k - 1, 0):
                raise ValueError(f"arity {k}: expected {max(k - 1, 0)} transpositions")
            self.transpositions[k] = mats
        self._perm_cache: Dict[Tuple[int, Perm], SparseMatrix] = {}
        self.weights: Dict[int, Tuple[int, ...]] = {}
        if check:
            self.check_coxeter()
            self.check_degree_preserving()

    def weight(self, k: int, i: int) -> int:
        """Number of algebra-generator slots carried by basis element i of arity k."""
        w = self.weights.get(k)
        return w[i] if w else 0

    @property
    def max_arity(self) -> int:
        return self.truncation.max_arity

    def dims(self) -> Dict[int, int]:
        return {k: c.dim for k, c in self.components.items()}

    def component(self, k: int) -> GradedSpace:
        return self.components.get(k, GradedSpace([], []))

    @classmethod
    def from_action(cls, truncation: Truncation, components: Dict[int, GradedSpace],
                    act: Callable[[Perm, Hashable], dict], check: bool = True, name: str = ""):
        """Build from a function ``act(perm, key) -> vector`` (left action)."""
        trans = {}
        for k, sp in components.items():
            if k < 2:
                continue
            trans[k] = [matrix_of(sp, sp, lambda key, p=transposition(k, i): act(p, key)) for i in range(k - 1)]
        return cls(truncation, components, trans, check=check, name=name)

    def perm_matrix(self, k: int, p: Perm) -> SparseMatrix:
        key = (k, tuple(p))
        m = self._perm_cache.get(key)
        if m is None:
            dim = self.component(k).dim
            m = SparseMatrix.identity(dim)
            for i in reversed(as_transpositions(p)):
                m = self.transpositions[k][i] @ m
            self._perm_cache[key] = m
        return m

    def act(self, p: Perm, key) -> dict:
        k = len(p)
        sp = self.component(k)
        col = self.perm_matrix(k, p).transpose().row(sp.index[key])
        return {sp.keys[i]: c for i, c in col.items()}

    def act_vec(self, p: Perm, vec: dict) -> dict:
        out: dict = {}
        for key, c in vec.items():
            vadd(out, self.act(p, key), c)
        return out

    def check_coxeter(self) -> None:
        for k in range(self.max_arity + 1):
            mats = self.transpositions[k]
            dim = self.component(k).dim
            ident = SparseMatrix.identity(dim)
            for i, s in enumerate(mats):
                if s.shape != (dim, dim):
                    raise ValueError(f"arity {k}: transposition {i + 1} has wrong shape")
                if s @ s != ident:
                    raise ValueError(f"arity {k}: s_{i + 1}^2 != 1")
                if i + 1 < len(mats):
                    t = mats[i + 1]
                    if s @ t @ s != t @ s @ t:
                        raise ValueError(f"arity {k}: braid relation fails at s_{i + 1}")
                for j in range(i + 2, len(mats)):
                    t = mats[j]
                    if s @ t != t @ s:
                        raise ValueError(f"arity {k}: s_{i + 1} and s_{j + 1} do not commute")

    def check_degree_preserving(self) -> None:
        for k in range(self.max_arity + 1):
            mats = self.transpositions[k]
            degs = self.component(k).degrees
            for s in mats:
                for (r, c), _ in s.entries.items():
                    if degs[r] != degs[c]:
                        raise ValueError(f"arity {k}: action does not preserve degree")

    def to_json(self) -> dict:
        comps = []
        for k in range(self.max_arity + 1):
            sp = self.component(k)
            comps.append({
                "arity": k,
                "basis": [{"name": n, "degree": d} for n, d in zip(sp.names, sp.degrees)],
                "transpositions": [[[frac_str(x) for x in row] for row in m.to_dense()] for m in self.transpositions[k]],
            })
        return {"max_arity": self.max_arity, "components": comps}

    @classmethod
    def from_json(cls, obj: dict, max_weight: int = 1) -> "SymSeq":
        t = Truncation(obj["max_arity"], max_weight)
        comps, trans = {}, {}
        for c in obj["components"]:
            k = c["arity"]
            comps[k] = GradedSpace.from_pairs([(b["name"], b["degree"]) for b in c["basis"]])
            trans[k] = [SparseMatrix.from_dense([[Fraction(x) for x in row] for row in m]) if m else
                        SparseMatrix(comps[k].dim, comps[k].dim) for m in c["transpositions"]]
        return cls(t, comps, trans)

    def same_as(self, other: "SymSeq") -> bool:
        """Equal bases (names and degrees) and equal action matrices."""
        if self.max_arity != other.max_arity:
            return False
        for k in range(self.max_arity + 1):
            a, b = self.component(k), other.component(k)
            if a.names != b.names or a.degrees != b.degrees:
                return False
            if self.transpositions[k] != other.transpositions[k]:
                return False
        return True

    def character(self, k: int) -> Dict[Tuple[int, ...], Tuple[Tuple[int, int], ...]]:
        """Graded character of the arity-k component per cycle type.

        Returns {cycle type: ((degree, trace), ...)}.
        """
        sp = self.component(k)
        out = {}
        for p in all_perms(k):
            ct = _cycle_type(p)
            if ct in out:
                continue
            m = self.perm_matrix(k, p)
            tr: Dict[int, Fraction] = {}
            for i, d in enumerate(sp.degrees):
                x = m.get(i, i)
                if x:
                    tr[d] = tr.get(d, 0) + x
            out[ct] = tuple(sorted((d, int(x)) for d, x in tr.items() if x))
        return out

    def __repr__(self):
        return f"SymSeq({self.name or '?'}, dims={self.dims()})"


def _cycle_type(p: Perm) -> Tuple[int, ...]:
    seen = [False] * len(p)
    out = []
    for i in range(len(p)):
        if seen[i]:
            continue
        j, n = i, 0
        while not seen[j]:
            seen[j] = True
            j = p[j]
            n += 1
        out.append(n)
    return tuple(sorted(out, reverse=True))


def isomorphic(a: SymSeq, b: SymSeq) -> bool:
    """Isomorphism test for SymSeqs by graded characters (exact, char 0)."""
    if a.max_arity != b.max_arity:
        return False
    return all(a.character(k) == b.character(k) for k in range(a.max_arity + 1))


@dataclass
class DgSymSeq:
    underlying: SymSeq
    differential: Dict[int, SparseMatrix] = field(default_factory=dict)

    def __post_init__(self):
        for k, sp in self.underlying.components.items():
            d = self.differential.get(k)
            if d is None:
                self.differential[k] = SparseMatrix(sp.dim, sp.dim)
                continue
            if not (d @ d).is_zero():
                raise ValueError(f"arity {k}: d^2 != 0")
            for (r, c), _ in d.entries.items():
                if sp.degrees[r] != sp.degrees[c] + 1:
                    raise ValueError(f"arity {k}: differential is not of degree +1")
            for s in self.underlying.transpositions[k]:
                if s @ d != d @ s:
                    raise ValueError(f"arity {k}: differential is not equivariant")


@dataclass
class SeqMap:
    """Arity-wise matrices between two SymSeqs, homogeneous of ``degree``."""

    source: SymSeq
    target: SymSeq
    matrices: Dict[int, SparseMatrix]
    degree: int = 0

    def __post_init__(self):
        for k in range(self.source.max_arity + 1):
            m = self.matrices.get(k)
            shape = (self.target.component(k).dim, self.source.component(k).dim)
            if m is None:
                self.matrices[k] = SparseMatrix(*shape)
            elif m.shape != shape:
                raise ValueError(f"arity {k}: matrix shape {m.shape} != {shape}")

    def is_equivariant(self) -> bool:
        for k, m in self.matrices.items():
            for s, t in zip(self.source.transpositions[k], self.target.transpositions[k]):
                if t @ m != m @ s:
                    return False
        return True

    def is_homogeneous(self) -> bool:
        for k, m in self.matrices.items():
            sd, td = self.source.component(k).degrees, self.target.component(k).degrees
            for (r, c), _ in m.entries.items():
                if td[r] != sd[c] + self.degree:
                    return False
        return True

    def then(self, other: "SeqMap") -> "SeqMap":
        return SeqMap(self.source, other.target, {k: other.matrices[k] @ self.matrices[k] for k in self.matrices},
                      self.degree + other.degree)

    def __eq__(self, other):
        return isinstance(other, SeqMap) and self.degree == other.degree and self.matrices == other.matrices


def identity_map(x: SymSeq) -> SeqMap:
    return SeqMap(x, x, {k: SparseMatrix.identity(x.component(k).dim) for k in range(x.max_arity + 1)}, 0)


# ---------------------------------------------------------------------------
# basic sequences

def unit_sequence(t: Truncation) -> SymSeq:
    """The unit I of the composition product: k in arity 1."""
    return SymSeq(t, {1: GradedSpace(["id"], [0])}, {}, name="I")


def comm_sequence(t: Truncation, start: int = 1) -> SymSeq:
    comps = {k: GradedSpace([f"c{k}"], [0]) for k in range(start, t.max_arity + 1)}
    return SymSeq(t, comps, {}, name="Comm")


def arity_zero(t: Truncation, space: GradedSpace, name: str = "V") -> SymSeq:
    """A graded vector space viewed as a SymSeq concentrated in arity 0.

    Each basis vector counts as one generator for weight truncations.
    """
    out = SymSeq(t, {0: space}, {}, name=name)
    out.weights[0] = (1,) * space.dim
    return out


def sign_rep_sequence(t: Truncation, degree_per_arity: Callable[[int], int], start: int = 0) -> SymSeq:
    comps, trans = {}, {}
    for k in range(start, t.max_arity + 1):
        comps[k] = GradedSpace([f"s{k}"], [degree_per_arity(k)])
        trans[k] = [SparseMatrix.from_dense([[-1]]) for _ in range(k - 1)]
    return SymSeq(t, comps, trans, name="sgn")


# ---------------------------------------------------------------------------
# level-wise product and homs

def _kron(a: SparseMatrix, b: SparseMatrix) -> SparseMatrix:
    ent = {}
    for (r1, c1), x in a.entries.items():
        for (r2, c2), y in b.entries.items():
            ent[(r1 * b.rows + r2, c1 * b.cols + c2)] = x * y
    return SparseMatrix(a.rows * b.rows, a.cols * b.cols, ent)


def levelwise_product(x: SymSeq, y: SymSeq) -> SymSeq:
    if x.max_arity != y.max_arity:
        raise ValueError("truncation mismatch")
    comps, trans = {}, {}
    for k in range(x.max_arity + 1):
        a, b = x.component(k), y.component(k)
        keys, degs, names = [], [], []
        for i, j in iproduct(range(a.dim), range(b.dim)):
            keys.append((a.keys[i], b.keys[j]))
            degs.append(a.degrees[i] + b.degrees[j])
            names.append(f"{a.names[i]}*{b.names[j]}")
        comps[k] = GradedSpace(keys, degs, names)
        trans[k] = [_kron(s, t) for s, t in zip(x.transpositions[k], y.transpositions[k])]
    return SymSeq(x.truncation, comps, trans, name=f"({x.name}@{y.name})")


def _inverse_transpose(m: SparseMatrix) -> SparseMatrix:
    # transposition matrices are involutions, so the inverse is the matrix itself
    return m.transpose()


def hom_lev(x: SymSeq, y: SymSeq) -> SymSeq:
    """Hom_lev(X,Y)(n) = Hom(X(n), Y(n)); (s.f) = s f s^{-1}.

    Basis element ``(xk, yk)`` is the elementary map sending xk to yk.
    """
    if x.max_arity != y.max_arity:
        raise ValueError("truncation mismatch")
    comps, trans = {}, {}
    for k in range(x.max_arity + 1):
        a, b = x.component(k), y.component(k)
        keys, degs, names = [], [], []
        for i, j in iproduct(range(a.dim), range(b.dim)):
            keys.append((a.keys[i], b.keys[j]))
            degs.append(b.degrees[j] - a.degrees[i])
            names.append(f"[{a.names[i]}->{b.names[j]}]")
        comps[k] = GradedSpace(keys, degs, names)
        trans[k] = [_kron(_inverse_transpose(s), t) for s, t in zip(x.transpositions[k], y.transpositions[k])]
    return SymSeq(x.truncation, comps, trans, name=f"Hom({x.name},{y.name})")


def hom_lev_element(x: SymSeq, y: SymSeq, maps: Dict[int, SparseMatrix]) -> Dict[int, dict]:
    """Coordinates in hom_lev(x, y) of per-arity matrices."""
    out = {}
    for k, m in maps.items():
        a, b = x.component(k), y.component(k)
        out[k] = {(a.keys[c], b.keys[r]): v for (r, c), v in m.entries.items()}
    return out


def hom_lev_matrix(x: SymSeq, y: SymSeq, k: int, elem: dict) -> SparseMatrix:
    a, b = x.component(k), y.component(k)
    return SparseMatrix(b.dim, a.dim, {(b.index[yk], a.index[xk]): v for (xk, yk), v in elem.items()})


def equivariant_homs(x: SymSeq, y: SymSeq, k: int, degree: Optional[int] = None) -> List[SparseMatrix]:
    """Basis of Hom_{Sigma_k}(X(k), Y(k)) (optionally of fixed degree)."""
    a, b = x.component(k), y.component(k)
    cols = [(i, j) for i in range(a.dim) for j in range(b.dim)
            if degree is None or b.degrees[j] - a.degrees[i] == degree]
    index = {c: n for n, c in enumerate(cols)}
    eqs = []
    for s, t in zip(x.transpositions[k], y.transpositions[k]):
        # (t f - f s)[r, c] = sum_j t[r,j] f[j,c] - sum_i f[r,i] s[i,c]
        rows: Dict[Tuple[int, int], dict] = {}
        for (r, j), v in t.entries.items():
            for c in range(a.dim):
                n = index.get((c, j))
                if n is not None:
                    rows.setdefault((r, c), {})
                    rows[(r, c)][n] = rows[(r, c)].get(n, 0) + v
        for (i, c), v in s.entries.items():
            for r in range(b.dim):
                n = index.get((i, r))
                if n is not None:
                    rows.setdefault((r, c), {})
                    rows[(r, c)][n] = rows[(r, c)].get(n, 0) - v
        eqs.extend(row for row in rows.values() if any(row.values()))
    m = SparseMatrix.from_rows(len(eqs), len(cols), {i: r for i, r in enumerate(eqs)})
    out = []
    for vec in kernel_vectors(m):
        ent = {}
        for n, v in vec.items():
            i, j = cols[n]
            ent[(j, i)] = v
        out.append(SparseMatrix(b.dim, a.dim, ent))
    return out


# ---------------------------------------------------------------------------
# operadic shift

def operadic_shift(x: SymSeq, j: int) -> SymSeq:
    """X{j}: arity n shifted up in degree by j(n-1), action twisted by sgn^j.

    Realised as the level-wise product with a one-dimensional suspension
    sequence, so the sign twist is just the Kronecker product with (-1).
    """
    if j == 0:
        return x
    comps, trans = {}, {}
    for k in range(x.max_arity + 1):
        sp = x.component(k)
        comps[k] = GradedSpace(sp.keys, [d + j * (k - 1) for d in sp.degrees], sp.names)
        trans[k] = [s.scale(-1) if j % 2 else s for s in x.transpositions[k]]
    return SymSeq(x.truncation, comps, trans, name=f"{x.name}{{{j}}}")


# ---------------------------------------------------------------------------
# composition products

def set_partitions(labels: Sequence[int]):
    """Set partitions of ``labels`` as tuples of blocks sorted by minimum."""
    labels = list(labels)
    if not labels:
        yield ()
        return
    first, rest = labels[0], labels[1:]
    for part in set_partitions(rest):
        # put first into a new block or into an existing one
        yield tuple(sorted(((first,),) + part))
        for i in range(len(part)):
            blk = tuple(sorted((first,) + part[i]))
            yield tuple(sorted(part[:i] + (blk,) + part[i + 1:]))


def _slot_sort_key(slot):
    block, q = slot
    if block:
        return (0, block[0], 0)
    return (1, 0, q)


class CompositeBasis:
    """Canonical basis of a composite (P o Q)(n) or its invariant variant.

    ``reps[k]`` lists canonical slot tuples ``t``; for each one we keep the
    stabiliser-projector image basis inside P(k).
    """

    def __init__(self, p: SymSeq, q: SymSeq, n: int, max_k: Optional[int] = None,
                 max_weight: Optional[int] = None):
        self.p, self.q, self.n = p, q, n
        self.entries: List[Tuple[int, tuple, int]] = []  # (k, t, j)
        self.image_bases: Dict[Tuple[int, tuple], List[dict]] = {}
        self.stabilisers: Dict[Tuple[int, tuple], List[Tuple[Perm, int]]] = {}
        qidx = {m: list(range(q.component(m).dim)) for m in range(q.max_arity + 1)}
        top = p.max_arity if max_k is None else min(max_k, p.max_arity)
        for k in range(top + 1):
            if p.component(k).dim == 0:
                continue
            for t in _canonical_slot_tuples(n, k, q, qidx, max_weight):
                stab = _stabiliser(t, q)
                self.stabilisers[(k, t)] = stab
                basis = _projector_image(p, k, stab)
                self.image_bases[(k, t)] = basis
                for j in range(len(basis)):
                    self.entries.append((k, t, j))
        self.index = {e: i for i, e in enumerate(self.entries)}

    def weight(self, entry) -> int:
        return sum(self.q.weight(len(b), qi) for b, qi in entry[1])

    def slot_degrees(self, t) -> List[int]:
        return [self.q.component(len(b)).degrees[qi] for b, qi in t]

    def degree(self, entry) -> int:
        k, t, j = entry
        b = self.image_bases[(k, t)][j]
        pk = next(iter(b))
        return self.p.component(k).degrees[pk] + sum(self.slot_degrees(t))

    def name(self, entry) -> str:
        k, t, j = entry
        pc = self.p.component(k)
        b = self.image_bases[(k, t)][j]
        if len(b) == 1 and next(iter(b.values())) == 1:
            head = pc.names[next(iter(b))]
        else:
            head = "+".join(f"{frac_str(c)}{pc.names[i]}" for i, c in sorted(b.items()))
        slots = ",".join(f"{''.join(map(str, blk)) or '0'}:{self.q.component(len(blk)).names[qi]}" for blk, qi in t)
        return f"{head}({slots})"

    def normalize(self, k: int, pvec: Dict[int, object], slots: Sequence) -> Dict[int, Fraction]:
        """Class of p (x) slots in the canonical basis, as {entry index: coeff}.

        ``pvec`` is over indices of P(k); ``slots`` is any ordering.
        """
        degs = [self.q.component(len(b)).degrees[qi] for b, qi in slots]
        order = sorted(range(len(slots)), key=lambda j: _slot_sort_key(slots[j]))
        rho = [0] * len(slots)
        for new, old in enumerate(order):
            rho[old] = new
        rho = tuple(rho)
        eps = koszul_sign(degs, rho)
        t = tuple(slots[j] for j in order)
        key = (k, t)
        if key not in self.image_bases:
            raise KeyError("slot tuple outside the truncated composite")
        m = self.p.perm_matrix(k, rho)
        v = m.apply(pvec)
        stab = self.stabilisers[key]
        if len(stab) > 1:
            acc: Dict[int, Fraction] = {}
            for h, chi in stab:
                vadd(acc, self.p.perm_matrix(k, h).apply(v), Fraction(chi, len(stab)))
            v = acc
        out = {}
        for j, b in enumerate(self.image_bases[key]):
            piv = min(b)
            c = v.get(piv)
            if c:
                out[self.index[(k, t, j)]] = eps * c
        return out


def _canonical_slot_tuples(n: int, k: int, q: SymSeq, qidx, max_weight: Optional[int] = None):
    out = []
    zero = qidx.get(0, [])
    wt = (lambda b, qi: q.weight(len(b), qi)) if max_weight is not None else None
    for part in set_partitions(range(n)):
        r = len(part)
        if r > k:
            continue
        if any(len(b) > q.max_arity or not qidx.get(len(b)) for b in part):
            continue
        empties = k - r
        if empties and not zero:
            continue
        for qs in iproduct(*[qidx[len(b)] for b in part]):
            base = tuple(zip(part, qs))
            if wt is None:
                for ez in _multisets(zero, empties):
                    out.append(base + tuple(((), z) for z in ez))
                continue
            budget = max_weight - sum(wt(b, qi) for b, qi in base)
            if budget < 0:
                continue
            zw = [(z, wt((), z)) for z in zero]
            for ez in _bounded_multisets(zw, empties, budget):
                out.append(base + tuple(((), z) for z in ez))
    return out


def _bounded_multisets(items, size, budget):
    """Sorted multisets of ``size`` items (value, weight) with total weight <= budget."""
    out = []

    def rec(start, left, room, acc):
        if left == 0:
            out.append(tuple(acc))
            return
        for j in range(start, len(items)):
            z, w = items[j]
            if w <= room:
                acc.append(z)
                rec(j, left - 1, room - w, acc)
                acc.pop()

    rec(0, size, budget, [])
    return out


def _multisets(items, size):
    from itertools import combinations_with_replacement
    return list(combinations_with_replacement(items, size))


def _stabiliser(t, q: SymSeq) -> List[Tuple[Perm, int]]:
    k = len(t)
    degs = [q.component(len(b)).degrees[qi] for b, qi in t]
    runs: Dict[tuple, List[int]] = {}
    for j, s in enumerate(t):
        if not s[0]:
            runs.setdefault(s, []).append(j)
    groups = [g for g in runs.values() if len(g) > 1]
    if not groups:
        return [(tuple(range(k)), 1)]
    out = []
    for choice in iproduct(*[all_perms(len(g)) for g in groups]):
        p = list(range(k))
        for g, sub in zip(groups, choice):
            for a, b in enumerate(sub):
                p[g[a]] = g[b]
        p = tuple(p)
        out.append((p, koszul_sign(degs, p)))
    return out


def _projector_image(p: SymSeq, k: int, stab) -> List[dict]:
    dim = p.component(k).dim
    if len(stab) == 1:
        return [{i: Fraction(1)} for i in range(dim)]
    cols = []
    for i in range(dim):
        acc: Dict[int, Fraction] = {}
        for h, chi in stab:
            vadd(acc, p.perm_matrix(k, h).apply({i: 1}), Fraction(chi, len(stab)))
        cols.append(acc)
    return row_space_basis(cols)


class _LazyTranspositions(dict):
    def __init__(self, build):
        super().__init__()
        self._build = build

    def __missing__(self, k):
        v = self[k] = self._build(k)
        return v


class CompositeSeq(SymSeq):
    """A composite P o Q (coinvariants) or P o_1 Q (invariants).

    Both share the same canonical basis and the same action matrices; they
    differ in how elements are realised inside the full tensor space.
    ``max_k`` caps the arity of the outer factor and ``max_weight`` the total
    generator weight of the slots.  Action matrices are built on demand.
    """

    def __init__(self, p: SymSeq, q: SymSeq, invariant: bool = False, max_k: Optional[int] = None,
                 max_weight: Optional[int] = None, check: bool = False):
        if p.max_arity != q.max_arity:
            raise ValueError("truncation mismatch")
        self.left, self.right, self.invariant = p, q, invariant
        self.max_k, self.max_weight = max_k, max_weight
        self.truncation = p.truncation
        self.bases = {n: CompositeBasis(p, q, n, max_k, max_weight) for n in range(p.max_arity + 1)}
        self.components = {}
        self.weights = {}
        for n, cb in self.bases.items():
            self.components[n] = GradedSpace(list(range(len(cb.entries))), [cb.degree(e) for e in cb.entries],
                                             [cb.name(e) for e in cb.entries])
            self.weights[n] = tuple(cb.weight(e) for e in cb.entries)
        self.transpositions = _LazyTranspositions(self._build_transpositions)
        self._perm_cache = {}
        sym = "o1" if invariant else "o"
        self.name = f"({p.name}{sym}{q.name})"
        if check:
            self.check_coxeter()
            self.check_degree_preserving()

    def _build_transpositions(self, n: int) -> List[SparseMatrix]:
        cb = self.bases.get(n)
        if cb is None:
            return []
        mats = []
        for i in range(n - 1):
            cols = {}
            for idx, (k, t, j) in enumerate(cb.entries):
                cols[idx] = _act_on_composite(cb, i, k, t, cb.image_bases[(k, t)][j])
            mats.append(SparseMatrix.from_columns(len(cb.entries), len(cb.entries), cols))
        return mats

    def entry(self, n: int, idx: int):
        """(k, P-vector over P(k) indices, slots) representing basis element idx."""
        cb = self.bases[n]
        k, t, j = cb.entries[idx]
        return k, cb.image_bases[(k, t)][j], t

    def normalize(self, n: int, k: int, pvec: Dict[int, object], slots: Sequence) -> Dict[int, Fraction]:
        return self.bases[n].normalize(k, pvec, slots)

    def full_vector(self, n: int, idx: int) -> Dict[tuple, Fraction]:
        """Realise a basis element inside the full space P(k) (x) slots.

        Keys are (k, p_index, slot tuple).  For the invariant model this is
        the orbit sum; for coinvariants it is the canonical representative.
        """
        cb = self.bases[n]
        k, t, j = cb.entries[idx]
        b = cb.image_bases[(k, t)][j]
        if not self.invariant:
            return {(k, i, t): c for i, c in b.items()}
        out: Dict[tuple, Fraction] = {}
        degs = cb.slot_degrees(t)
        seen = set()
        for g in all_perms(k):
            sign, word = _perm_slots(t, degs, g)
            if word in seen:
                continue
            seen.add(word)
            pv = self.left.perm_matrix(k, g).apply(b)
            for i, c in pv.items():
                key = (k, i, word)
                out[key] = out.get(key, 0) + sign * c
        return {kk: v for kk, v in out.items() if v}

    def orbit_factor(self, n: int, idx: int) -> Fraction:
        """k!/|H| for the basis element: canonical_iso scales by this."""
        cb = self.bases[n]
        k, t, _ = cb.entries[idx]
        return Fraction(factorial(k), len(cb.stabilisers[(k, t)]))


def _perm_slots(t, degs, g):
    out = [None] * len(t)
    for j, s in enumerate(t):
        out[g[j]] = s
    return koszul_sign(degs, g), tuple(out)


def _act_on_composite(cb: CompositeBasis, i: int, k: int, t: tuple, b: dict) -> Dict[int, Fraction]:
    """Apply the transposition (i, i+1) of output labels to b (x) t."""
    a, c = i, i + 1
    terms = [(1, [])]
    for blk, qi in t:
        if a in blk and c in blk:
            pos = blk.index(a)
            qv = cb.q.act(transposition(len(blk), pos), cb.q.component(len(blk)).keys[qi])
            qsp = cb.q.component(len(blk))
            new_terms = []
            for coeff, sl in terms:
                for qk, v in qv.items():
                    new_terms.append((coeff * v, sl + [(blk, qsp.index[qk])]))
            terms = new_terms
        else:
            nb = tuple(sorted(c if x == a else a if x == c else x for x in blk))
            terms = [(coeff, sl + [(nb, qi)]) for coeff, sl in terms]
    out: Dict[int, Fraction] = {}
    for coeff, sl in terms:
        vadd(out, cb.normalize(k, b, sl), coeff)
    return out


def compose_product(p: SymSeq, q: SymSeq) -> CompositeSeq:
    return CompositeSeq(p, q, invariant=False)


def compose_invariant(p: SymSeq, q: SymSeq) -> CompositeSeq:
    return CompositeSeq(p, q, invariant=True)


def canonical_iso(inv: CompositeSeq, coinv: CompositeSeq) -> SeqMap:
    """Invariants -> coinvariants, x |-> [x]; diagonal with factor k!/|H|."""
    if not inv.invariant or coinv.invariant:
        raise ValueError("expected (invariant, coinvariant) composites")
    mats = {}
    for n in range(inv.max_arity + 1):
        dim = inv.component(n).dim
        mats[n] = SparseMatrix(dim, dim, {(i, i): inv.orbit_factor(n, i) for i in range(dim)})
    return SeqMap(inv, coinv, mats, 0)


def norm_inverse(coinv: CompositeSeq, inv: CompositeSeq) -> SeqMap:
    """Coinvariants -> invariants by the averaged norm (1/#G) sum g."""
    mats = {}
    for n in range(inv.max_arity + 1):
        dim = inv.component(n).dim
        mats[n] = SparseMatrix(dim, dim, {(i, i): 1 / inv.orbit_factor(n, i) for i in range(dim)})
    return SeqMap(coinv, inv, mats, 0)


def coinvariant_class(coinv: CompositeSeq, n: int, full: Dict[tuple, object]) -> Dict[int, Fraction]:
    """Project a full-space vector {(k, p_index, slots): c} to coinvariants."""
    cb = coinv.bases[n]
    out: Dict[int, Fraction] = {}
    for (k, i, slots), c in full.items():
        vadd(out, cb.normalize(k, {i: 1}, list(slots)), c)
    return out


def invariant_coordinates(inv: CompositeSeq, n: int, full: Dict[tuple, object]) -> Dict[int, Fraction]:
    """Coordinates of an invariant full-space vector in the orbit-sum basis."""
    cb = inv.bases[n]
    out: Dict[int, Fraction] = {}
    by_rep: Dict[Tuple[int, tuple], Dict[int, object]] = {}
    for (k, i, slots), c in full.items():
        if (k, slots) in cb.image_bases:
            by_rep.setdefault((k, slots), {})[i] = c
    for (k, t), pv in by_rep.items():
        for j, b in enumerate(cb.image_bases[(k, t)]):
            piv = min(b)
            c = pv.get(piv)
            if c:
                out[cb.index[(k, t, j)]] = Fraction(c)
    return out


# ---------------------------------------------------------------------------
# inner hom  [X, Y](n) = Hom_Sigma(X^{boxtimes n}, Y)

def boxtimes_basis(x: SymSeq, n: int, m: int) -> List[tuple]:
    """Basis of X^{boxtimes n}(m): n ordered slots (block, x index)."""
    out = []
    for f in iproduct(range(n), repeat=m):
        blocks = [tuple(l for l in range(m) if f[l] == j) for j in range(n)]
        if any(len(b) > x.max_arity or x.component(len(b)).dim == 0 for b in blocks):
            continue
        for xs in iproduct(*[range(x.component(len(b)).dim) for b in blocks]):
            out.append(tuple(zip(blocks, xs)))
    return out


def boxtimes_sequence(x: SymSeq, n: int) -> SymSeq:
    """X^{boxtimes n} as a SymSeq in the output arity m (Sigma_m relabels)."""
    comps, trans = {}, {}
    for m in range(x.max_arity + 1):
        basis = boxtimes_basis(x, n, m)
        sp = GradedSpace(basis, [sum(x.component(len(b)).degrees[i] for b, i in w) for w in basis],
                         ["|".join(f"{''.join(map(str, b)) or '0'}:{x.component(len(b)).names[i]}" for b, i in w)
                          for w in basis])
        comps[m] = sp
        mats = []
        for i in range(m - 1):
            cols = {}
            for idx, w in enumerate(basis):
                cols[idx] = {sp.index[kk]: v for kk, v in relabel_boxtimes(x, w, transposition(m, i)).items()}
            mats.append(SparseMatrix.from_columns(sp.dim, sp.dim, cols))
        trans[m] = mats
    return SymSeq(x.truncation, comps, trans, name=f"{x.name}^[{n}]")


def relabel_boxtimes(x: SymSeq, word, p: Perm) -> Dict[tuple, object]:
    """Relabel the output labels of a boxtimes word by p (l -> p[l])."""
    terms = [(1, ())]
    for blk, xi in word:
        nb = [p[l] for l in blk]
        order = sorted(range(len(nb)), key=lambda a: nb[a])
        # inner permutation: position a of blk goes to position rank(nb[a])
        inner = [0] * len(nb)
        for new, old in enumerate(order):
            inner[old] = new
        sblk = tuple(sorted(nb))
        comp = x.component(len(blk))
        xv = x.act(tuple(inner), comp.keys[xi]) if len(blk) > 1 else {comp.keys[xi]: 1}
        new_terms = []
        for c, w in terms:
            for kk, v in xv.items():
                new_terms.append((c * v, w + ((sblk, comp.index[kk]),)))
        terms = new_terms
    out: Dict[tuple, object] = {}
    for c, w in terms:
        out[w] = out.get(w, 0) + c
    return {k: v for k, v in out.items() if v}


def permute_boxtimes_slots(x: SymSeq, word, g: Perm) -> Tuple[int, tuple]:
    degs = [x.component(len(b)).degrees[i] for b, i in word]
    return _perm_slots(word, degs, g)


class InnerHom(SymSeq):
    """[X,Y](n) = prod_m Hom_{Sigma_m}(X^{boxtimes n}(m), Y(m)), truncated."""

    def __init__(self, x: SymSeq, y: SymSeq, arities: Optional[Sequence[int]] = None):
        if x.max_arity != y.max_arity:
            raise ValueError("truncation mismatch")
        self.x, self.y = x, y
        self.box = {n: boxtimes_sequence(x, n) for n in range(x.max_arity + 1)}
        self.pieces: Dict[int, List[Tuple[int, SparseMatrix]]] = {}
        comps, trans = {}, {}
        ms = list(arities) if arities is not None else list(range(x.max_arity + 1))
        for n in range(x.max_arity + 1):
            pieces = []
            for m in ms:
                for h in equivariant_homs(self.box[n], y, m):
                    pieces.append((m, h))
            self.pieces[n] = pieces
            degs = []
            for m, h in pieces:
                (r, c), _ = next(iter(sorted(h.entries.items())))
                degs.append(y.component(m).degrees[r] - self.box[n].component(m).degrees[c])
            comps[n] = GradedSpace(list(range(len(pieces))), degs, [f"h{n}_{m}_{i}" for i, (m, _) in enumerate(pieces)])
        for n in range(x.max_arity + 1):
            mats = []
            for i in range(n - 1):
                g = transposition(n, i)
                cols = {}
                for idx, (m, h) in enumerate(self.pieces[n]):
                    cols[idx] = self._coords(n, m, h @ self._slot_perm_matrix(n, m, g))
                mats.append(SparseMatrix.from_columns(len(self.pieces[n]), len(self.pieces[n]), cols))
            trans[n] = mats
        super().__init__(x.truncation, comps, trans, check=True, name=f"[{x.name},{y.name}]")

    def _slot_perm_matrix(self, n: int, m: int, g: Perm) -> SparseMatrix:
        """Matrix of the slot permutation g^{-1} on X^{boxtimes n}(m)."""
        sp = self.box[n].component(m)
        ginv = inverse(g)
        cols = {}
        for idx, w in enumerate(sp.keys):
            s, w2 = permute_boxtimes_slots(self.x, w, ginv)
            cols[idx] = {sp.index[w2]: s}
        return SparseMatrix.from_columns(sp.dim, sp.dim, cols)

    def _coords(self, n: int, m: int, mat: SparseMatrix) -> Dict[int, Fraction]:
        basis = [(i, h) for i, (mm, h) in enumerate(self.pieces[n]) if mm == m]
        return _express(mat, basis)

    def element_matrix(self, n: int, vec: Dict[int, object]) -> Dict[int, SparseMatrix]:
        """Per output-arity matrices of an element of [X,Y](n)."""
        out: Dict[int, SparseMatrix] = {}
        for idx, c in vec.items():
            m, h = self.pieces[n][idx]
            out[m] = out[m] + h.scale(c) if m in out else h.scale(c)
        return out

    def coordinates(self, n: int, mats: Dict[int, SparseMatrix]) -> Dict[int, Fraction]:
        out: Dict[int, Fraction] = {}
        for m, mat in mats.items():
            vadd(out, self._coords(n, m, mat))
        return out


def _express(mat: SparseMatrix, basis: List[Tuple[int, SparseMatrix]]) -> Dict[int, Fraction]:
    """Coordinates of ``mat`` in a list of linearly independent matrices."""
    from .exact import solve_linear
    if not basis:
        if not mat.is_zero():
            raise ValueError("matrix outside the span")
        return {}
    positions = sorted({pos for _, h in basis for pos in h.entries} | set(mat.entries))
    pidx = {pos: i for i, pos in enumerate(positions)}
    a = SparseMatrix.from_columns(len(positions), len(basis),
                                  {j: {pidx[pos]: v for pos, v in h.entries.items()} for j, (_, h) in enumerate(basis)})
    sol = solve_linear(a, {pidx[pos]: v for pos, v in mat.entries.items()})
    if sol is None:
        raise ValueError("matrix outside the span")
    return {basis[j][0]: v for j, v in enumerate(sol) if v}


def inner_hom(x: SymSeq, y: SymSeq) -> InnerHom:
    return InnerHom(x, y)


# ---------------------------------------------------------------------------
# interchange maps and hom_lev_compose

def interchange_eta(x1: SymSeq, x2: SymSeq, y1: SymSeq, y2: SymSeq):
    """eta: (X1 (x)lev X2) o (Y1 (x)lev Y2) -> (X1 o Y1) (x)lev (X2 o Y2).

    Returns (source, target, SeqMap).
    """
    src = compose_product(levelwise_product(x1, x2), levelwise_product(y1, y2))
    a, b = compose_product(x1, y1), compose_product(x2, y2)
    tgt = levelwise_product(a, b)
    mats = {}
    for n in range(src.max_arity + 1):
        cb = src.bases[n]
        tsp = tgt.component(n)
        cols = {}
        for idx, (k, t, j) in enumerate(cb.entries):
            cols[idx] = {tsp.index[kk]: v for kk, v in _eta_on(src, a, b, n, k, t, cb.image_bases[(k, t)][j]).items()}
        mats[n] = SparseMatrix.from_columns(tsp.dim, cb and len(cb.entries), cols)
    return src, tgt, SeqMap(src, tgt, mats, 0)


def _split_pair_slots(lev_q: SymSeq, q1: SymSeq, q2: SymSeq, t):
    s1, s2, d1, d2 = [], [], [], []
    for blk, qi in t:
        k1, k2 = lev_q.component(len(blk)).keys[qi]
        i1, i2 = q1.component(len(blk)).index[k1], q2.component(len(blk)).index[k2]
        s1.append((blk, i1))
        s2.append((blk, i2))
        d1.append(q1.component(len(blk)).degrees[i1])
        d2.append(q2.component(len(blk)).degrees[i2])
    return s1, s2, d1, d2


def _eta_on(src, a, b, n, k, t, pvec):
    lev_p, lev_q = src.left, src.right
    x1, y1 = a.left, a.right
    x2, y2 = b.left, b.right
    s1, s2, d1, d2 = _split_pair_slots(lev_q, y1, y2, t)
    out: Dict[tuple, Fraction] = {}
    for pi, c in pvec.items():
        k1, k2 = lev_p.component(k).keys[pi]
        i1, i2 = x1.component(k).index[k1], x2.component(k).index[k2]
        # (p1 p2)(q1 r1)(q2 r2)... -> p1 q1 q2 .. (x) p2 r1 r2 ..: Koszul sign
        degs = [x1.component(k).degrees[i1], x2.component(k).degrees[i2]]
        for u, v in zip(d1, d2):
            degs += [u, v]
        # target order: p1, q's, p2, r's
        L = len(t)
        perm = [0] * (2 + 2 * L)
        perm[0] = 0
        perm[1] = 1 + L
        for j in range(L):
            perm[2 + 2 * j] = 1 + j
            perm[3 + 2 * j] = 2 + L + j
        sign = koszul_sign(degs, tuple(perm))
        va = a.bases[n].normalize(k, {i1: 1}, s1)
        vb = b.bases[n].normalize(k, {i2: 1}, s2)
        for ia, ca in va.items():
            for ib, cb_ in vb.items():
                key = (ia, ib)
                out[key] = out.get(key, 0) + sign * c * ca * cb_
    return {kk: v for kk, v in out.items() if v}


def interchange_mu(x1: SymSeq, x2: SymSeq, y1: SymSeq, y2: SymSeq):
    """mu: (X1 o1 Y1) (x)lev (X2 o1 Y2) -> (X1 (x)lev X2) o1 (Y1 (x)lev Y2).

    Invariants are realised as orbit sums; the map keeps the terms whose
    two block structures agree slot by slot.
    """
    a, b = compose_invariant(x1, y1), compose_invariant(x2, y2)
    src = levelwise_product(a, b)
    tgt = compose_invariant(levelwise_product(x1, x2), levelwise_product(y1, y2))
    lev_p, lev_q = tgt.left, tgt.right
    mats = {}
    for n in range(src.max_arity + 1):
        ssp = src.component(n)
        cols = {}
        for idx, (ia, ib) in enumerate(ssp.keys):
            fa, fb = a.full_vector(n, ia), b.full_vector(n, ib)
            full: Dict[tuple, Fraction] = {}
            for (k, p1, s1), c1 in fa.items():
                for (k2, p2, s2), c2 in fb.items():
                    if k != k2 or [bl for bl, _ in s1] != [bl for bl, _ in s2]:
                        continue
                    d1 = [y1.component(len(bl)).degrees[q] for bl, q in s1]
                    d2 = [y2.component(len(bl)).degrees[q] for bl, q in s2]
                    L = len(s1)
                    degs = [x1.component(k).degrees[p1]] + d1 + [x2.component(k).degrees[p2]] + d2
                    perm = [0] * (2 + 2 * L)
                    perm[0] = 0
                    for j in range(L):
                        perm[1 + j] = 2 + 2 * j
                    perm[1 + L] = 1
                    for j in range(L):
                        perm[2 + L + j] = 3 + 2 * j
                    sign = koszul_sign(degs, tuple(perm))
                    pk = (x1.component(k).keys[p1], x2.component(k).keys[p2])
                    slots = []
                    for (bl, q1), (_, q2) in zip(s1, s2):
                        qk = (y1.component(len(bl)).keys[q1], y2.component(len(bl)).keys[q2])
                        slots.append((bl, lev_q.component(len(bl)).index[qk]))
                    key = (k, lev_p.component(k).index[pk], tuple(slots))
                    full[key] = full.get(key, 0) + sign * c1 * c2
            cols[idx] = invariant_coordinates(tgt, n, {kk: v for kk, v in full.items() if v})
        mats[n] = SparseMatrix.from_columns(tgt.component(n).dim, ssp.dim, cols)
    return src, tgt, SeqMap(src, tgt, mats, 0)


def hom_lev_compose(f: SeqMap, g: SeqMap):
    """The level-wise map f o g : X o X1 -> Y o Y1, x; x1..xk |-> f(x); g(x1)..g(xk).

    ``g`` must have degree 0: otherwise the k-slot summand moves by k|g|
    and the composite is not homogeneous.  With |g| = 0 no Koszul signs
    arise, since only g passes the x's.
    """
    src = compose_product(f.source, g.source)
    tgt = compose_product(f.target, g.target)
    if g.degree:
        raise ValueError("the inner map must have degree 0")
    mats = {}
    for n in range(src.max_arity + 1):
        cb, tb = src.bases[n], tgt.bases[n]
        cols = {}
        for idx, (k, t, j) in enumerate(cb.entries):
            slot_terms = [(1, [])]
            for blk, qi in t:
                col = g.matrices[len(blk)].transpose().row(qi)
                slot_terms = [(c * v, sl + [(blk, r)]) for c, sl in slot_terms for r, v in col.items()]
            acc: Dict[int, Fraction] = {}
            for pi, pc in cb.image_bases[(k, t)][j].items():
                fx = f.matrices[k].apply({pi: 1})
                for c, sl in slot_terms:
                    vadd(acc, tb.normalize(k, fx, sl), c * pc)
            cols[idx] = acc
        mats[n] = SparseMatrix.from_columns(len(tb.entries), len(cb.entries), cols)
    return SeqMap(src, tgt, mats, f.degree)


# ---------------------------------------------------------------------------
# adjunctions

def curry_lev(f: SeqMap, x: SymSeq, y: SymSeq, z: SymSeq) -> SeqMap:
    """Hom(X (x)lev Y, Z) -> Hom(X, Hom_lev(Y, Z)), with f'(x)(y) = f(x (x) y)."""
    h = hom_lev(y, z)
    mats = {}
    for k in range(x.max_arity + 1):
        dy, dz = y.component(k).dim, z.component(k).dim
        ent = {}
        for (l, col), v in f.matrices[k].entries.items():
            i, j = divmod(col, dy)
            ent[(j * dz + l, i)] = v
        mats[k] = SparseMatrix(h.component(k).dim, x.component(k).dim, ent)
    return SeqMap(x, h, mats, f.degree)


def uncurry_lev(g: SeqMap, y: SymSeq, z: SymSeq) -> SeqMap:
    """Inverse of curry_lev."""
    x = g.source
    src = levelwise_product(x, y)
    mats = {}
    for k in range(x.max_arity + 1):
        dy, dz = y.component(k).dim, z.component(k).dim
        ent = {}
        for (row, i), v in g.matrices[k].entries.items():
            j, l = divmod(row, dz)
            ent[(l, i * dy + j)] = v
        mats[k] = SparseMatrix(dz, src.component(k).dim, ent)
    return SeqMap(src, z, mats, g.degree)


def curry_compose(f: SeqMap, p: SymSeq, q: SymSeq, r: SymSeq, inner: Optional[InnerHom] = None) -> SeqMap:
    """Hom(P o Q, R) -> Hom(P, [Q, R]), with F(p)(w) = f([p; w])."""
    comp = f.source
    ih = inner or inner_hom(q, r)
    mats = {}
    for n in range(p.max_arity + 1):
        box = ih.box[n]
        cols = {}
        for i in range(p.component(n).dim):
            per_m = {}
            for m in range(r.max_arity + 1):
                words = box.component(m).keys
                if not words:
                    continue
                mcols = {}
                for wi, w in enumerate(words):
                    cls = comp.normalize(m, n, {i: 1}, list(w))
                    v = f.matrices[m].apply(cls)
                    if v:
                        mcols[wi] = v
                if mcols:
                    per_m[m] = SparseMatrix.from_columns(r.component(m).dim, len(words), mcols)
            cols[i] = ih.coordinates(n, per_m)
        mats[n] = SparseMatrix.from_columns(ih.component(n).dim, p.component(n).dim, cols)
    return SeqMap(p, ih, mats, f.degree)


def uncurry_compose(g: SeqMap, q: SymSeq, r: SymSeq) -> SeqMap:
    """Inverse of curry_compose: f([b; t]) = sum_i b_i G(p_i)(t)."""
    ih = g.target
    p = g.source
    comp = compose_product(p, q)
    mats = {}
    for m in range(p.max_arity + 1):
        cb = comp.bases[m]
        cols = {}
        for idx, (k, t, j) in enumerate(cb.entries):
            box = ih.box[k].component(m)
            wi = box.index[t]
            acc: Dict[int, Fraction] = {}
            for pi, pc in cb.image_bases[(k, t)][j].items():
                mats_k = ih.element_matrix(k, g.matrices[k].transpose().row(pi))
                h = mats_k.get(m)
                if h is not None:
                    vadd(acc, h.transpose().row(wi), pc)
            cols[idx] = acc
        mats[m] = SparseMatrix.from_columns(r.component(m).dim, len(cb.entries), cols)
    return SeqMap(comp, r, mats, g.degree)
