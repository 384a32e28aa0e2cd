from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
import pytest

from logrank.corpus import planted_mono_cases
from logrank.matrix import CapError, Rectangle, SignMatrix, gen_random_low_rank, rank_exact, restrict
from logrank.monochromatic import PreconditionError, brute_force_max_mono, extract_mono, is_monochromatic


def exhaustive_max_mono(f: SignMatrix) -> int:
    n, m = f.shape
    best = 0
    for rs in range(1, 1 << n):
        rows = [i for i in range(n) if rs >> i & 1]
        for cs in range(1, 1 << m):
            cols = [j for j in range(m) if cs >> j & 1]
            block = f.entries[np.ix_(rows, cols)]
            if (block == block.flat[0]).all():
                best = max(best, len(rows) * len(cols))
    return best


def test_brute_examples():
    R, c = brute_force_max_mono(SignMatrix(np.ones((3, 4), dtype=int)))
    assert R == Rectangle.full(3, 4) and c == 1
    ident = SignMatrix(np.where(np.eye(3, dtype=bool), 1, -1))
    R, c = brute_force_max_mono(ident)
    assert R.area == 2 and c == -1 and is_monochromatic(ident, R)


@pytest.mark.parametrize("seed", range(12))
def test_brute_matches_exhaustive(seed, backend):
    rng = np.random.default_rng(seed)
    n, m = (int(x) for x in rng.integers(1, 6, size=2))
    f = SignMatrix(np.where(rng.random((n, m)) < 0.5, 1, -1))
    R, c = brute_force_max_mono(f)
    assert is_monochromatic(f, R) and f.entries[R.rows[0], R.cols[0]] == c
    assert R.area == exhaustive_max_mono(f) >= 1


def test_brute_cap():
    with pytest.raises(CapError):
        brute_force_max_mono(SignMatrix(np.ones((21, 21), dtype=int)))


def test_monochromatic_input_is_returned_whole():
    f = SignMatrix(np.ones((4, 5), dtype=int))
    R = Rectangle([0, 2, 3], [1, 4])
    ex = extract_mono(f, R)
    assert ex.output_rect == R and ex.size_ratio == 1 and ex.color == 1


def test_single_minority_entry():
    a = np.ones((4, 4), dtype=int)
    a[1, 2] = -1
    f = SignMatrix(a)
    assert rank_exact(f) == 2
    ex = extract_mono(f, Rectangle.full(4, 4))
    assert ex.average == Fraction(7, 8)
    assert is_monochromatic(f, ex.output_rect) and ex.output_rect.area >= 2
    assert ex.output_rect.area <= brute_force_max_mono(f)[0].area


def test_precondition_error():
    f = SignMatrix([[1, -1], [1, 1]])
    with pytest.raises(PreconditionError, match="average below"):
        extract_mono(f, Rectangle.full(2, 2))


def check(f, R, r):
    ex = extract_mono(f, R, r)
    out = ex.output_rect
    assert set(ex.basis_rows) <= set(ex.a_prime)
    assert len(ex.basis_rows) <= ex.restricted_rank
    assert set(out.rows) <= set(ex.a_prime) and tuple(out.cols) == ex.b_prime
    assert all(f.entries[i, j] == ex.color for i in out.rows for j in out.cols)
    assert 8 * out.area >= R.area
    # Markov accounting: minority fraction <= 1/(4r) forces both halves
    assert ex.minority_fraction <= Fraction(1, 4 * r)
    assert ex.rows_markov_ok and ex.cols_markov_ok
    return ex


@pytest.mark.parametrize("case", range(40))
def test_planted_cases(case):
    f, R, r = planted_mono_cases(40, seed=11)[case]
    check(f, R, r)


def test_larger_r_still_holds():
    for f, R, r in planted_mono_cases(20, seed=5):
        avg = abs(Fraction(int(restrict(f, R).entries.sum()), R.area))
        for r2 in range(r, r + 3):
            if avg >= 1 - Fraction(1, 2 * r2):
                check(f, R, r2)


def test_extract_dominated_by_brute():
    for f, R, r in planted_mono_cases(30, seed=2, max_dim=7):
        if max(f.shape) > 9:
            continue
        ex = extract_mono(f, R, r)
        assert ex.output_rect.area <= brute_force_max_mono(f)[0].area


def test_minority_row_is_filtered():
    a = np.ones((16, 16), dtype=int)
    a[3] = -1
    f = SignMatrix(a)
    ex = extract_mono(f, Rectangle.full(16, 16))
    # the all -1 row fails the minority filter
    assert ex.restricted_rank == 1 and ex.output_rect.area == 15 * 16 and ex.color == 1


def test_low_rank_embedding():
    f = gen_random_low_rank(10, 10, 3, seed=4)
    for R in (Rectangle([0], list(range(10))), Rectangle(list(range(10)), [0])):
        g = restrict(f, R)
        avg = abs(Fraction(int(g.entries.sum()), R.area))
        r = max(rank_exact(g), 1)
        if avg >= 1 - Fraction(1, 2 * r):
            check(f, R, r)
