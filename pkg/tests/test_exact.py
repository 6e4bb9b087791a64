import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from opforge.exact import (ChainComplex, NotAComplex, SparseMatrix, frac_str, homology, kernel_vectors,
                           parse_frac, rank, rank_kernel_image, row_space_basis, solve_linear)


def small_matrices(max_rows=5, max_cols=5):
    return st.integers(1, max_rows).flatmap(
        lambda r: st.integers(1, max_cols).flatmap(
            lambda c: st.lists(st.lists(st.integers(-3, 3), min_size=c, max_size=c), min_size=r, max_size=r)))


def mul(m, v):
    return tuple(sum((m.get(i, j) * v[j] for j in range(m.cols)), Fraction(0)) for i in range(m.rows))


# --- SparseMatrix plumbing -------------------------------------------------

def test_zero_entries_are_not_stored():
    m = SparseMatrix.from_dense([[0, 1], [0, 0]])
    assert m.nnz() == 1
    assert (m - m).is_zero() and (m - m).nnz() == 0


def test_json_roundtrip_uses_fraction_strings():
    m = SparseMatrix.from_dense([[Fraction(1, 2), 0], [0, -3]])
    obj = m.to_json()
    assert "1/2" in json.dumps(obj)
    assert SparseMatrix.from_json(obj) == m


def test_frac_strings():
    assert frac_str(Fraction(-3, 6)) == "-1/2"
    assert frac_str(Fraction(4)) == "4"
    assert parse_frac("6/4") == Fraction(3, 2)


def test_product_and_transpose():
    a = SparseMatrix.from_dense([[1, 2], [3, 4]])
    b = SparseMatrix.from_dense([[0, 1], [1, 0]])
    assert (a @ b).to_dense() == [[2, 1], [4, 3]]
    assert a.transpose().to_dense() == [[1, 3], [2, 4]]


# --- rank / kernel / image ------------------------------------------------

def test_rank_of_empty_matrix():
    r, ker, img = rank_kernel_image(SparseMatrix(0, 0))
    assert (r, ker, img) == (0, [], [])


def test_rank_of_identity():
    r, ker, _ = rank_kernel_image(SparseMatrix.identity(3))
    assert r == 3 and ker == []


def test_rank_one_example_kernel():
    m = SparseMatrix.from_dense([[1, 2], [2, 4]])
    r, ker, img = rank_kernel_image(m)
    assert r == 1
    assert len(ker) == 1
    v = ker[0]
    # spanned by (2, -1)
    assert v[0] * -1 == v[1] * 2
    assert mul(m, v) == (0, 0)
    assert len(img) == 1


@given(small_matrices())
def test_rank_plus_nullity(rows):
    m = SparseMatrix.from_dense(rows)
    r, ker, img = rank_kernel_image(m)
    assert r + len(ker) == m.cols
    assert len(img) == r
    for v in ker:
        assert all(x == 0 for x in mul(m, v))


@given(small_matrices())
def test_kernel_vectors_agree_with_dense_kernel(rows):
    m = SparseMatrix.from_dense(rows)
    _, ker, _ = rank_kernel_image(m)
    sparse = kernel_vectors(m)
    assert [tuple(v.get(j, Fraction(0)) for j in range(m.cols)) for v in sparse] == ker


@given(small_matrices())
def test_rank_is_transpose_invariant(rows):
    m = SparseMatrix.from_dense(rows)
    assert rank(m) == rank(m.transpose())


@given(small_matrices())
def test_row_space_basis_is_reduced(rows):
    basis = row_space_basis({j: v for j, v in enumerate(r) if v} for r in rows)
    assert len(basis) == rank(SparseMatrix.from_dense(rows))
    pivots = [min(v) for v in basis]
    assert pivots == sorted(set(pivots))
    for v, p in zip(basis, pivots):
        assert v[p] == 1
        for w in basis:
            if w is not v:
                assert p not in w


# --- solve_linear --------------------------------------------------------

def test_solve_identity_returns_b():
    b = (Fraction(1), Fraction(-2), Fraction(5, 3))
    assert solve_linear(SparseMatrix.identity(3), b) == b


def test_solve_zero_matrix_nonzero_rhs():
    assert solve_linear(SparseMatrix(2, 2), (1, 0)) is None


def test_solve_scalar():
    assert solve_linear(SparseMatrix.from_dense([[2]]), (3,)) == (Fraction(3, 2),)


def test_solve_shape_error():
    with pytest.raises(ValueError, match="shape"):
        solve_linear(SparseMatrix.identity(2), (1, 2, 3))


@given(small_matrices(), st.randoms(use_true_random=False))
def test_solve_verifies_exactly(rows, rnd):
    m = SparseMatrix.from_dense(rows)
    x0 = tuple(Fraction(rnd.randint(-4, 4), rnd.randint(1, 3)) for _ in range(m.cols))
    b = mul(m, x0)
    x = solve_linear(m, b)
    assert x is not None
    assert mul(m, x) == b


@given(small_matrices(), st.lists(st.integers(-3, 3), min_size=5, max_size=5))
def test_solve_absent_iff_outside_span(rows, raw):
    m = SparseMatrix.from_dense(rows)
    b = tuple(raw[:m.rows])
    x = solve_linear(m, b)
    augmented = SparseMatrix.from_dense([list(r) + [bi] for r, bi in zip(rows, b)])
    in_span = rank(augmented) == rank(m)
    assert (x is not None) == in_span
    if x is not None:
        assert mul(m, x) == b


# --- homology -------------------------------------------------------------

def test_zero_differentials_give_dimensions():
    c = ChainComplex([0, 1, 2], {0: 2, 1: 3, 2: 1}, {})
    rep = homology(c)
    assert rep.betti == {0: 2, 1: 3, 2: 1}
    assert rep.euler_characteristic() == 2 - 3 + 1


def test_identity_differential_is_acyclic():
    c = ChainComplex([0, 1], {0: 1, 1: 1}, {0: SparseMatrix.identity(1)})
    assert homology(c).betti == {0: 0, 1: 0}


def test_koszul_type_complex_is_acyclic():
    d0 = SparseMatrix.from_dense([[1], [1]])
    d1 = SparseMatrix.from_dense([[1, -1]])
    c = ChainComplex([0, 1, 2], {0: 1, 1: 2, 2: 1}, {0: d0, 1: d1})
    assert homology(c).betti == {0: 0, 1: 0, 2: 0}


def test_not_a_complex_names_degree():
    d0 = SparseMatrix.from_dense([[1], [1]])
    d1 = SparseMatrix.from_dense([[1, 1]])
    c = ChainComplex([3, 4, 5], {3: 1, 4: 2, 5: 1}, {3: d0, 4: d1})
    with pytest.raises(NotAComplex, match="not a complex") as err:
        homology(c)
    assert err.value.degree == 3


def test_homology_json_shape():
    c = ChainComplex([0, 1], {0: 1, 1: 1}, {})
    obj = homology(c).to_json()
    assert obj == {"degrees": [0, 1], "dims": {"0": 1, "1": 1}, "betti": {"0": 1, "1": 1}}
    assert set(c.to_json()) >= {"degrees", "dims"}


def test_representatives_span_cohomology():
    # d: k -> k^2, x |-> (x, x); H^1 is spanned by one class off the diagonal
    c = ChainComplex([0, 1], {0: 1, 1: 2}, {0: SparseMatrix.from_dense([[1], [1]])})
    rep = homology(c, representatives=True)
    assert rep.betti == {0: 0, 1: 1}
    (z,) = rep.representatives[1]
    assert z[0] != z[1]


def _annihilator(prev, n):
    """A square n x n matrix whose kernel contains the image of ``prev``."""
    _, _, img = rank_kernel_image(prev)
    if not img:
        return SparseMatrix.identity(n)
    perp = kernel_vectors(SparseMatrix.from_dense([list(v) for v in img]))
    rows = [[v.get(j, Fraction(0)) for j in range(n)] for v in perp]
    rows += [[Fraction(0)] * n] * (n - len(rows))
    return SparseMatrix.from_dense(rows) if n else SparseMatrix(0, 0)


def random_complex(rnd, dims):
    """d_i = (random) o (projection killing im d_{i-1}), so d^2 = 0 by construction."""
    diffs, prev = {}, None
    for i in range(len(dims) - 1):
        m = SparseMatrix.from_dense([[rnd.randint(-2, 2) for _ in range(dims[i])] for _ in range(dims[i + 1])]) \
            if dims[i] and dims[i + 1] else SparseMatrix(dims[i + 1], dims[i])
        if prev is not None and dims[i]:
            m = m @ _annihilator(prev, dims[i])
        diffs[i] = m
        prev = m
    return ChainComplex(list(range(len(dims))), dict(enumerate(dims)), diffs)


@given(st.lists(st.integers(0, 4), min_size=2, max_size=4), st.randoms(use_true_random=False))
def test_homology_invariant_under_basis_permutation(dims, rnd):
    c = random_complex(rnd, dims)
    assert c.square_zero_defect() is None
    base = homology(c)
    perms = {i: list(range(n)) for i, n in enumerate(dims)}
    for p in perms.values():
        rnd.shuffle(p)

    def pmat(p):
        return SparseMatrix(len(p), len(p), {(p[j], j): Fraction(1) for j in range(len(p))})

    def pinv(p):
        return SparseMatrix(len(p), len(p), {(j, p[j]): Fraction(1) for j in range(len(p))})

    diffs = {i: pmat(perms[i + 1]) @ m @ pinv(perms[i]) for i, m in c.differentials.items()}
    permuted = ChainComplex(c.degrees, dict(c.dims), diffs)
    assert homology(permuted).betti == base.betti
    assert base.euler_characteristic() == sum((-1) ** i * n for i, n in enumerate(dims))
