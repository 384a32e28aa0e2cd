from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logrank.matrix import (
    CapError,
    EntryDistribution,
    IntMatrix,
    MatrixError,
    ParseError,
    Rectangle,
    RectangleDistribution,
    SignMatrix,
    average,
    dedupe,
    gen_inner_product,
    gen_random_low_rank,
    gen_rigidity_example,
    independent_rows,
    load_int_matrix,
    load_matrix,
    rank_exact,
    restrict,
    weight_vectors,
)

sign_arrays = st.integers(1, 7).flatmap(
    lambda n: st.integers(1, 7).flatmap(
        lambda m: st.lists(st.lists(st.sampled_from([-1, 1]), min_size=m, max_size=m), min_size=n, max_size=n)))


def test_parse_both_formats():
    a = load_matrix("# comment\n+-+\n\n-++\n")
    b = load_matrix("1 -1 1\n- + +\n")
    assert a == b
    assert a.shape == (2, 3)


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ParseError) as exc:
        load_matrix("++\n+\n")
    assert exc.value.line == 2
    with pytest.raises(ParseError):
        load_matrix("+ 0\n")
    with pytest.raises(ParseError):
        load_matrix("# nothing\n")
    with pytest.raises(ParseError):
        load_int_matrix("1 2\nx 3\n")


def test_json_round_trip():
    f = gen_random_low_rank(5, 4, 2, seed=3)
    assert SignMatrix.from_json(f.to_json()) == f
    M = IntMatrix([[1, 0], [Fraction(1, 2), -3]])
    assert IntMatrix.from_json(M.to_json()) == M


@given(sign_arrays)
@settings(max_examples=150, deadline=None)
def test_rank_matches_float_rank(rows):
    f = SignMatrix(rows)
    assert rank_exact(f) == np.linalg.matrix_rank(np.array(rows, dtype=float))


def test_rank_known_values():
    assert rank_exact(gen_inner_product(1)) == 2
    assert rank_exact(gen_inner_product(2)) == 4
    assert rank_exact(gen_inner_product(3)) == 8
    assert rank_exact(SignMatrix(np.ones((4, 5), dtype=int))) == 1
    assert rank_exact(IntMatrix([[0, 0], [0, 0]])) == 0
    assert rank_exact(IntMatrix([[1, 2], [2, 4]])) == 1


def test_inner_product_layout():
    f = gen_inner_product(2)
    # rows/cols in binary order with x_1 the high bit
    x = [(0, 0), (0, 1), (1, 0), (1, 1)]
    for i, a in enumerate(x):
        for j, b in enumerate(x):
            assert f.entries[i, j] == (-1) ** (a[0] * b[0] + a[1] * b[1])
    with pytest.raises(CapError):
        gen_inner_product(7)


def test_independent_rows_greedy():
    rows = [[1, 1, 0], [2, 2, 0], [0, 1, 1], [1, 2, 1], [0, 0, 1]]
    assert independent_rows(rows) == [0, 2, 4]


@given(sign_arrays)
@settings(max_examples=100, deadline=None)
def test_dedupe_preserves_rank_and_cells(rows):
    f = SignMatrix(rows)
    fd, rmap, cmap = dedupe(f)
    assert rank_exact(fd) == rank_exact(f)
    for i in range(f.n_rows):
        for j in range(f.n_cols):
            assert fd.entries[rmap[i], cmap[j]] == f.entries[i, j]
    assert len({fd.entries[i].tobytes() for i in range(fd.n_rows)}) == fd.n_rows
    assert len({fd.entries[:, j].tobytes() for j in range(fd.n_cols)}) == fd.n_cols


def test_random_low_rank_modes():
    for mode in ("pattern", "bool-product"):
        for r in range(1, 6):
            f = gen_random_low_rank(8, 7, r, seed=r, mode=mode)
            assert f.shape == (8, 7)
            assert rank_exact(f) <= r
    assert gen_random_low_rank(6, 6, 3, seed=5) == gen_random_low_rank(6, 6, 3, seed=5)
    with pytest.raises(MatrixError):
        gen_random_low_rank(3, 3, 4, seed=0)


def test_rectangle_ops():
    R = Rectangle([2, 0, 2], [1])
    assert R.rows == (0, 2)
    assert R.area == 2
    assert (2, 1) in R and (1, 1) not in R
    assert Rectangle.from_masks(R.row_mask, R.col_mask) == R
    assert R.intersect(Rectangle([0], [1, 3])) == Rectangle([0], [1])
    assert Rectangle([], [1]).is_empty()
    with pytest.raises(MatrixError):
        restrict(gen_inner_product(1), Rectangle([], [0]))


def test_average_exact_and_null_event():
    f = gen_inner_product(1)
    mu = EntryDistribution.uniform(2, 2)
    assert average(f, mu, Rectangle.full(2, 2)) == Fraction(1, 2)
    point = EntryDistribution.point(2, 2, 0, 0)
    with pytest.raises(MatrixError, match="null event"):
        average(f, point, Rectangle([1], [1]))


def test_entry_distribution_normalizes_exactly():
    mu = EntryDistribution.from_floats([[0.1, 0.2], [0.3, 0.4]])
    assert sum(mu.weights.flat) == 1
    with pytest.raises(MatrixError):
        EntryDistribution(np.array([[Fraction(1, 2), Fraction(1, 3)]], dtype=object), exact=True)


def test_rectangle_distribution_validates():
    R = Rectangle([0], [0])
    rho = RectangleDistribution([(R, Fraction(1, 2)), (Rectangle([1], [1]), Fraction(1, 2)), (R, 0)])
    assert len(rho) == 2
    assert rho.inclusion(0, 0) == Fraction(1, 2)
    with pytest.raises(MatrixError):
        RectangleDistribution([(R, Fraction(1, 3))])


def test_rigidity_example_structure():
    M = gen_rigidity_example(6, 2)
    assert M.shape == (15, 15)
    vecs = weight_vectors(6, 2)
    for i, j in itertools.product(range(15), repeat=2):
        assert M[i, j] == sum(a * b for a, b in zip(vecs[i], vecs[j]))
    assert rank_exact(M) == 6
    big = gen_rigidity_example(16, 2)
    assert big.shape == (math.comb(16, 2),) * 2
    assert rank_exact(big) == 16
