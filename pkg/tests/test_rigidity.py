from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
import pytest

from logrank.matrix import CapError, IntMatrix, MatrixError, gen_rigidity_example, rank_exact, weight_vectors
from logrank.rigidity import (
    RigidityDecomposition,
    brute_force_zero_rectangle,
    conjecture_check,
    intersecting_pair_fraction,
    sparsity,
    verify_rigidity_decomposition,
    zero_rectangle,
)


def enumerate_best(M: IntMatrix, target: str) -> int:
    """Independent oracle: best value over all (row subset, column subset) pairs."""
    Z = np.array(M.rows) == 0
    n, m = Z.shape
    best = 0
    for k in range(1, n + 1):
        for rows in itertools.combinations(range(n), k):
            b = int(Z[list(rows)].all(axis=0).sum())
            if b:
                best = max(best, min(k, b) if target == "max-min-side" else k * b)
    return best


def random_sparse(rng, n, m, density):
    return IntMatrix(np.where(rng.random((n, m)) < density, rng.integers(1, 4, (n, m)), 0))


def test_zero_matrix_gives_full_rectangle():
    rep = zero_rectangle(IntMatrix(np.zeros((3, 5), dtype=int)))
    assert rep.rect.area == 15 and rep.sparsity == 0
    assert rep.bound_ratio == pytest.approx(3 / 3)


def test_identity_support():
    rep = zero_rectangle(IntMatrix(np.eye(4, dtype=int)))
    assert rep.min_side == 2 and rep.certified
    assert enumerate_best(IntMatrix(np.eye(4, dtype=int)), "max-min-side") == 2


def test_all_ones_has_no_zero_rectangle():
    rep = zero_rectangle(IntMatrix(np.ones((4, 6), dtype=int)))
    assert rep.min_side == 0 and rep.rect.is_empty()
    assert conjecture_check(IntMatrix(np.ones((4, 6), dtype=int)))["min_side"] == 0


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("target", ["max-min-side", "max-area"])
def test_exact_matches_enumeration(seed, target, backend):
    rng = np.random.default_rng(seed)
    n, m = (int(x) for x in rng.integers(2, 11, size=2))
    M = random_sparse(rng, n, m, float(rng.uniform(0.2, 0.7)))
    rep = zero_rectangle(M, target=target)
    assert rep.value == enumerate_best(M, target) == brute_force_zero_rectangle(M, target)
    assert all(M.rows[i][j] == 0 for i in rep.rect.rows for j in rep.rect.cols)


def test_heuristic_is_valid_and_not_certified():
    M = gen_rigidity_example(8, 2)
    h = zero_rectangle(M, mode="heuristic")
    e = zero_rectangle(M)
    assert not h.certified and e.certified and h.value <= e.value
    assert all(M.rows[i][j] == 0 for i in h.rect.rows for j in h.rect.cols)


def test_pair_fraction_is_a_count():
    for r, w in [(6, 2), (8, 3), (16, 2)]:
        vecs = weight_vectors(r, w)
        hits = sum(1 for u in vecs for v in vecs if any(a and b for a, b in zip(u, v)))
        assert intersecting_pair_fraction(r, w) == Fraction(hits, len(vecs) ** 2)
        assert sparsity(gen_rigidity_example(r, w)) == Fraction(hits, len(vecs) ** 2)


def test_half_split_rectangle_16_2():
    M = gen_rigidity_example(16, 2)
    vecs = weight_vectors(16, 2)
    first = [i for i, v in enumerate(vecs) if not any(v[8:])]
    second = [i for i, v in enumerate(vecs) if not any(v[:8])]
    assert len(first) == len(second) == 28
    assert all(M.rows[i][j] == 0 for i in first for j in second)
    assert sparsity(M) == Fraction(29, 120) == intersecting_pair_fraction(16, 2)
    rep = zero_rectangle(M)
    assert rep.certified and rep.min_side == 28 and M.shape == (120, 120)


def test_node_budget_cap():
    with pytest.raises(CapError):
        zero_rectangle(gen_rigidity_example(10, 2), node_limit=3)


def test_node_budget_env(monkeypatch):
    monkeypatch.setenv("LOGRANK_NODE_BUDGET", "2")
    with pytest.raises(CapError):
        zero_rectangle(gen_rigidity_example(10, 2))


def test_brute_cap():
    with pytest.raises(CapError):
        brute_force_zero_rectangle(IntMatrix(np.zeros((17, 2), dtype=int)))


def test_decomposition_zero_s():
    L = IntMatrix([[1, 2], [3, 4]])
    S = IntMatrix([[0, 0], [0, 0]])
    rep = verify_rigidity_decomposition(RigidityDecomposition(L, L, S), r=2)
    assert rep["M_equals_L_on_rect"] and rep["zero_rect"]["min_side"] == 2 and rep["s"] == 0
    assert rep["rect_rank_M"] == 2 == rep["rank_L"]


def test_decomposition_identity_flags_singular_minor():
    eye = IntMatrix(np.eye(4, dtype=int))
    rep = verify_rigidity_decomposition(RigidityDecomposition(eye, IntMatrix(np.zeros((4, 4), dtype=int)), eye), r=1)
    assert rep["zero_rect"]["min_side"] == 2 and rep["rank_L"] == 0
    assert rep["triggered"] and rep["rank_L_below_r"] and rep["rect_rank_M"] == 0
    assert rep["singular_minor_found"] and not rep["minor_full_rank"]


def test_decomposition_rejects_mismatch():
    a = IntMatrix([[1, 0]])
    with pytest.raises(MatrixError):
        verify_rigidity_decomposition(RigidityDecomposition(a, a, a), r=1)


@pytest.mark.parametrize("seed", range(5))
def test_random_low_rank_plus_sparse(seed):
    rng = np.random.default_rng(seed)
    n, r = 9, 3
    L = IntMatrix(rng.integers(-2, 3, (n, r - 1)) @ rng.integers(-2, 3, (r - 1, n)))
    S = random_sparse(rng, n, n, 0.15)
    M = L + S
    rep = verify_rigidity_decomposition(RigidityDecomposition(M, L, S), r)
    assert rep["rank_L"] == rank_exact(L) <= r - 1
    assert rep["s"] == int((np.array(S.rows) != 0).sum())
    assert rep["subadditive"] and rep["M_equals_L_on_rect"]
    assert rep["rect_rank_M"] <= rep["rank_L"]
    assert rep["triggered"] == (rep["zero_rect"]["min_side"] >= r)


def test_json_round_trip():
    M = gen_rigidity_example(6, 2)
    dec = RigidityDecomposition(M, M, IntMatrix(np.zeros(M.shape, dtype=int)))
    assert RigidityDecomposition.from_json(dec.to_json()).to_json() == dec.to_json()
