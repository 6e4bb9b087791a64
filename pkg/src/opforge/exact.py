"""Exact rational linear algebra and cochain complexes.

Everything here works over ``fractions.Fraction``; no floats are involved.
Matrices are sparse (row -> {col: value}) and elimination is done on
integer-scaled rows with content (gcd) reduction after every step, which keeps
coefficient growth in check on the integer-seeded matrices the rest of the
package produces.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

Rational = Fraction


def frac_str(x) -> str:
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def parse_frac(s: str) -> Fraction:
    return Fraction(s)


class SparseMatrix:
    """Immutable sparse matrix with exact entries.

    Stored row-wise; zero entries are never kept.
    """

    __slots__ = ("rows", "cols", "_rows")

    def __init__(self, rows: int, cols: int, entries: Optional[Mapping] = None):
        self.rows = int(rows)
        self.cols = int(cols)
        data: Dict[int, Dict[int, Fraction]] = {}
        if entries:
            for (r, c), v in entries.items():
                if not (0 <= r < self.rows and 0 <= c < self.cols):
                    raise IndexError(f"entry ({r},{c}) outside {self.rows}x{self.cols}")
                if v:
                    data.setdefault(r, {})[c] = data.get(r, {}).get(c, 0) + Fraction(v)
            data = {r: {c: v for c, v in row.items() if v} for r, row in data.items()}
            data = {r: row for r, row in data.items() if row}
        self._rows = data

    @classmethod
    def from_rows(cls, rows: int, cols: int, row_dicts: Mapping[int, Mapping[int, object]]):
        m = cls(rows, cols)
        for r, row in row_dicts.items():
            if not 0 <= r < rows:
                raise IndexError(f"row {r} outside {rows}")
            clean = {}
            for c, v in row.items():
                if not 0 <= c < cols:
                    raise IndexError(f"col {c} outside {cols}")
                if v:
                    clean[c] = Fraction(v)
            if clean:
                m._rows[r] = clean
        return m

    @classmethod
    def from_columns(cls, rows: int, cols: int, col_dicts: Mapping[int, Mapping[int, object]]):
        data: Dict[int, Dict[int, object]] = {}
        for c, col in col_dicts.items():
            for r, v in col.items():
                if v:
                    data.setdefault(r, {})[c] = v
        return cls.from_rows(rows, cols, data)

    @classmethod
    def from_dense(cls, dense: Sequence[Sequence[object]]):
        rows = len(dense)
        cols = len(dense[0]) if rows else 0
        return cls.from_rows(rows, cols, {r: dict(enumerate(row)) for r, row in enumerate(dense)})

    @classmethod
    def identity(cls, n: int):
        return cls.from_rows(n, n, {i: {i: 1} for i in range(n)})

    @classmethod
    def zero(cls, rows: int, cols: int):
        return cls(rows, cols)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def entries(self) -> Dict[Tuple[int, int], Fraction]:
        return {(r, c): v for r, row in self._rows.items() for c, v in row.items()}

    def row(self, r: int) -> Dict[int, Fraction]:
        return dict(self._rows.get(r, {}))

    def row_items(self):
        return ((r, row) for r, row in sorted(self._rows.items()))

    def nnz(self) -> int:
        return sum(len(row) for row in self._rows.values())

    def is_zero(self) -> bool:
        return not self._rows

    def get(self, r: int, c: int) -> Fraction:
        return self._rows.get(r, {}).get(c, Fraction(0))

    def to_dense(self) -> List[List[Fraction]]:
        out = [[Fraction(0)] * self.cols for _ in range(self.rows)]
        for r, row in self._rows.items():
            for c, v in row.items():
                out[r][c] = v
        return out

    def transpose(self) -> "SparseMatrix":
        t: Dict[int, Dict[int, Fraction]] = {}
        for r, row in self._rows.items():
            for c, v in row.items():
                t.setdefault(c, {})[r] = v
        m = SparseMatrix(self.cols, self.rows)
        m._rows = t
        return m

    def apply(self, vec) -> Dict[int, Fraction]:
        """Multiply by a sparse column vector given as {index: value} or a list."""
        if not isinstance(vec, Mapping):
            if len(vec) != self.cols:
                raise ValueError("shape")
            vec = {i: v for i, v in enumerate(vec) if v}
        out: Dict[int, Fraction] = {}
        for r, row in self._rows.items():
            s = 0
            if len(row) < len(vec):
                for c, v in row.items():
                    w = vec.get(c)
                    if w:
                        s += v * w
            else:
                for c, w in vec.items():
                    v = row.get(c)
                    if v:
                        s += v * w
            if s:
                out[r] = Fraction(s)
        return out

    def __matmul__(self, other: "SparseMatrix") -> "SparseMatrix":
        if self.cols != other.rows:
            raise ValueError(f"shape mismatch {self.shape} @ {other.shape}")
        out: Dict[int, Dict[int, Fraction]] = {}
        orows = other._rows
        for r, row in self._rows.items():
            acc: Dict[int, Fraction] = {}
            for k, v in row.items():
                orow = orows.get(k)
                if not orow:
                    continue
                for c, w in orow.items():
                    acc[c] = acc.get(c, 0) + v * w
            acc = {c: x for c, x in acc.items() if x}
            if acc:
                out[r] = acc
        m = SparseMatrix(self.rows, other.cols)
        m._rows = out
        return m

    def __add__(self, other: "SparseMatrix") -> "SparseMatrix":
        if self.shape != other.shape:
            raise ValueError("shape")
        out = {r: dict(row) for r, row in self._rows.items()}
        for r, row in other._rows.items():
            tgt = out.setdefault(r, {})
            for c, v in row.items():
                x = tgt.get(c, 0) + v
                if x:
                    tgt[c] = x
                else:
                    tgt.pop(c, None)
        m = SparseMatrix(self.rows, self.cols)
        m._rows = {r: row for r, row in out.items() if row}
        return m

    def scale(self, s) -> "SparseMatrix":
        s = Fraction(s)
        m = SparseMatrix(self.rows, self.cols)
        if s:
            m._rows = {r: {c: v * s for c, v in row.items()} for r, row in self._rows.items()}
        return m

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return self.shape == other.shape and self._rows == other._rows

    def __hash__(self):
        return hash((self.rows, self.cols, frozenset(self.entries.items())))

    def __repr__(self) -> str:
        return f"SparseMatrix({self.rows}x{self.cols}, nnz={self.nnz()})"

    def to_json(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "entries": [[r, c, frac_str(v)] for (r, c), v in sorted(self.entries.items())],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "SparseMatrix":
        return cls(obj["rows"], obj["cols"], {(r, c): Fraction(v) for r, c, v in obj["entries"]})


def block_matrix(blocks: Mapping[Tuple[int, int], SparseMatrix], row_sizes: Sequence[int],
                 col_sizes: Sequence[int]) -> SparseMatrix:
    """Assemble a matrix from blocks indexed by (block_row, block_col)."""
    roff = [0]
    for s in row_sizes:
        roff.append(roff[-1] + s)
    coff = [0]
    for s in col_sizes:
        coff.append(coff[-1] + s)
    data: Dict[int, Dict[int, Fraction]] = {}
    for (bi, bj), blk in blocks.items():
        if blk.shape != (row_sizes[bi], col_sizes[bj]):
            raise ValueError(f"block {(bi, bj)} has shape {blk.shape}")
        for r, row in blk._rows.items():
            tgt = data.setdefault(roff[bi] + r, {})
            for c, v in row.items():
                tgt[coff[bj] + c] = tgt.get(coff[bj] + c, 0) + v
    return SparseMatrix.from_rows(roff[-1], coff[-1], data)


# ---------------------------------------------------------------------------
# elimination

def _integer_row(row: Mapping[int, object]) -> Dict[int, int]:
    den = 1
    for v in row.values():
        d = Fraction(v).denominator
        den = den * d // gcd(den, d)
    out = {c: int(Fraction(v) * den) for c, v in row.items() if v}
    return _primitive(out)


def _primitive(row: Dict[int, int]) -> Dict[int, int]:
    g = 0
    for v in row.values():
        g = gcd(g, v)
        if g == 1:
            return row
    if g > 1:
        return {c: v // g for c, v in row.items()}
    return row


def _reduce_by(row: Dict[int, int], piv_col: int, prow: Dict[int, int]) -> Dict[int, int]:
    """Clear ``piv_col`` from ``row`` using pivot row ``prow`` (fraction-free)."""
    a = prow[piv_col]
    b = row[piv_col]
    g = gcd(a, b)
    fa, fb = a // g, b // g
    out = {c: fa * v for c, v in row.items()}
    for c, v in prow.items():
        x = out.get(c, 0) - fb * v
        if x:
            out[c] = x
        else:
            out.pop(c, None)
    return _primitive(out)


class _RREF:
    """Incremental fraction-free Gauss-Jordan form.

    ``pivots`` maps pivot column -> integer row in which that column is the
    only pivot column with a nonzero entry.
    """

    def __init__(self):
        self.pivots: Dict[int, Dict[int, int]] = {}

    def add(self, row: Mapping[int, object], forbid_pivot_at: Optional[int] = None) -> Optional[int]:
        r = _integer_row(row)
        for c in sorted(set(r) & set(self.pivots)):
            if c in r:
                r = _reduce_by(r, c, self.pivots[c])
        if not r:
            return None
        p = min(r)
        if r[p] < 0:
            r = {c: -v for c, v in r.items()}
        for c, prow in list(self.pivots.items()):
            if p in prow:
                self.pivots[c] = _reduce_by(prow, p, r)
        self.pivots[p] = r
        return p


def rank(m: SparseMatrix) -> int:
    e = _RREF()
    n = 0
    for _, row in m.row_items():
        if e.add(row) is not None:
            n += 1
    return n


def rank_kernel_image(m: SparseMatrix):
    """Return (rank, kernel basis, image basis).

    Kernel vectors have length ``m.cols``; image vectors (independent columns
    of ``m``) have length ``m.rows``.  Both are tuples of Fractions.
    """
    e = _RREF()
    for _, row in m.row_items():
        e.add(row)
    piv = sorted(e.pivots)
    free = [c for c in range(m.cols) if c not in e.pivots]
    kernel = []
    for f in free:
        v = [Fraction(0)] * m.cols
        v[f] = Fraction(1)
        for p in piv:
            prow = e.pivots[p]
            if f in prow:
                v[p] = Fraction(-prow[f], prow[p])
        kernel.append(tuple(v))
    mt = m.transpose()
    image = []
    for p in piv:
        col = mt.row(p)
        image.append(tuple(col.get(r, Fraction(0)) for r in range(m.rows)))
    return len(piv), kernel, image


def kernel_vectors(m: SparseMatrix) -> List[Dict[int, Fraction]]:
    """Sparse kernel basis (same vectors as rank_kernel_image, as dicts)."""
    e = _RREF()
    for _, row in m.row_items():
        e.add(row)
    out = []
    cols_in = {}
    for p, prow in e.pivots.items():
        for c in prow:
            if c != p:
                cols_in.setdefault(c, []).append(p)
    for f in range(m.cols):
        if f in e.pivots:
            continue
        v = {f: Fraction(1)}
        for p in cols_in.get(f, ()):
            prow = e.pivots[p]
            v[p] = Fraction(-prow[f], prow[p])
        out.append(v)
    return out


def row_space_basis(vectors: Iterable[Mapping[int, object]]) -> List[Dict[int, Fraction]]:
    """Reduced basis (RREF rows, pivot entry 1) of the span of sparse vectors."""
    e = _RREF()
    for v in vectors:
        e.add(v)
    out = []
    for p in sorted(e.pivots):
        prow = e.pivots[p]
        out.append({c: Fraction(v, prow[p]) for c, v in prow.items()})
    return out


def solve_linear(m: SparseMatrix, b) -> Optional[Tuple[Fraction, ...]]:
    """Solve ``m x = b`` exactly; return None when b is outside the column span."""
    if isinstance(b, Mapping):
        bd = {int(k): Fraction(v) for k, v in b.items() if v}
        if any(not 0 <= k < m.rows for k in bd):
            raise ValueError("shape")
    else:
        if len(b) != m.rows:
            raise ValueError("shape")
        bd = {i: Fraction(v) for i, v in enumerate(b) if v}
    n = m.cols
    e = _RREF()
    rows = {r: dict(row) for r, row in m.row_items()}
    for r, v in bd.items():
        rows.setdefault(r, {})[n] = v
    for r in sorted(rows):
        p = e.add(rows[r])
        if p == n:
            return None
    x = [Fraction(0)] * n
    for p, prow in e.pivots.items():
        if p == n:
            return None
        x[p] = Fraction(prow.get(n, 0), prow[p])
    return tuple(x)


# ---------------------------------------------------------------------------
# cochain complexes

@dataclass
class ChainComplex:
    """Cochain complex: ``differentials[i]`` maps degree i to degree i+1."""

    degrees: List[int]
    dims: Dict[int, int]
    differentials: Dict[int, SparseMatrix] = field(default_factory=dict)
    basis: Dict[int, List[str]] = field(default_factory=dict)

    def __post_init__(self):
        self.degrees = sorted(int(d) for d in self.degrees)
        if self.degrees and self.degrees != list(range(self.degrees[0], self.degrees[-1] + 1)):
            raise ValueError("degrees must form a contiguous range")
        for d in self.degrees:
            self.dims.setdefault(d, 0)
        for d, m in self.differentials.items():
            src = self.dims.get(d, 0)
            tgt = self.dims.get(d + 1, 0)
            if m.shape != (tgt, src):
                raise ValueError(f"differential in degree {d} has shape {m.shape}, expected {(tgt, src)}")

    def dim(self, d: int) -> int:
        return self.dims.get(d, 0)

    def d(self, i: int) -> SparseMatrix:
        m = self.differentials.get(i)
        if m is None:
            return SparseMatrix(self.dim(i + 1), self.dim(i))
        return m

    def square_zero_defect(self) -> Optional[int]:
        """First degree i with d_{i+1} d_i != 0, or None."""
        for i in self.degrees:
            if self.dim(i) == 0 or self.dim(i + 2) == 0:
                continue
            if not (self.d(i + 1) @ self.d(i)).is_zero():
                return i
        return None

    def euler_characteristic(self) -> int:
        return sum((-1) ** (d % 2) * self.dim(d) for d in self.degrees)

    def to_json(self) -> dict:
        rep = homology(self)
        out = rep.to_json()
        out["differentials"] = {str(i): self.differentials[i].to_json()
                                for i in sorted(self.differentials) if not self.differentials[i].is_zero()}
        return out


@dataclass
class HomologyReport:
    degrees: List[int]
    dims: Dict[int, int]
    kernel_rank: Dict[int, int]
    image_rank: Dict[int, int]
    betti: Dict[int, int]
    representatives: Dict[int, List[Tuple[Fraction, ...]]] = field(default_factory=dict)

    def euler_characteristic(self) -> int:
        return sum((-1) ** (d % 2) * self.betti[d] for d in self.degrees)

    def total(self) -> int:
        return sum(self.betti.values())

    def to_json(self) -> dict:
        return {
            "degrees": list(self.degrees),
            "dims": {str(d): self.dims[d] for d in self.degrees},
            "betti": {str(d): self.betti[d] for d in self.degrees},
        }


class NotAComplex(ValueError):
    def __init__(self, degree: int):
        super().__init__(f"not a complex: d^2 != 0 starting in degree {degree}")
        self.degree = degree


def homology(c: ChainComplex, representatives: bool = False) -> HomologyReport:
    bad = c.square_zero_defect()
    if bad is not None:
        raise NotAComplex(bad)
    ranks = {i: rank(c.d(i)) for i in c.degrees}
    ranks[c.degrees[0] - 1 if c.degrees else -1] = 0
    betti, ker, img = {}, {}, {}
    reps = {}
    for i in c.degrees:
        ker[i] = c.dim(i) - ranks[i]
        img[i] = ranks.get(i - 1, 0)
        betti[i] = ker[i] - img[i]
        if betti[i] < 0:
            raise AssertionError("negative Betti number")
        if representatives and betti[i]:
            reps[i] = _cohomology_representatives(c, i)
    rep = HomologyReport(list(c.degrees), {i: c.dim(i) for i in c.degrees}, ker, img, betti, reps)
    if rep.euler_characteristic() != c.euler_characteristic():
        raise AssertionError("Euler characteristic mismatch")
    return rep


def _cohomology_representatives(c: ChainComplex, i: int) -> List[Tuple[Fraction, ...]]:
    cycles = kernel_vectors(c.d(i))
    prev = c.d(i - 1)
    e = _RREF()
    for _, row in prev.transpose().row_items():
        e.add(row)
    out = []
    for z in cycles:
        if e.add(z) is not None:
            out.append(tuple(z.get(k, Fraction(0)) for k in range(c.dim(i))))
    return out
