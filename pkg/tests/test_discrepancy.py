from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
import pytest

from logrank.discrepancy import (
    SignedRectangle,
    best_rectangle,
    check_rank_disc_bound,
    disc_exact,
    disc_game,
    disc_under,
    heuristic_best_rectangle,
)
from logrank.matrix import CapError, EntryDistribution, Rectangle, SignMatrix, gen_inner_product, gen_random_low_rank


def brute_disc_under(f: SignMatrix, mu: EntryDistribution) -> Fraction:
    n, m = f.shape
    w = mu.weights * f.entries.astype(object)
    best = Fraction(0)
    for rm in range(1, 1 << n):
        rows = [i for i in range(n) if rm >> i & 1]
        for cm in range(1, 1 << m):
            cols = [j for j in range(m) if cm >> j & 1]
            best = max(best, abs(sum(w[i, j] for i in rows for j in cols)))
    return best


def random_mu(rng, n, m) -> EntryDistribution:
    raw = rng.integers(0, 6, size=(n, m))
    if raw.sum() == 0:
        raw[0, 0] = 1
    return EntryDistribution(np.array([[Fraction(int(v), int(raw.sum())) for v in row] for row in raw], dtype=object),
                             exact=True)


def test_disc_under_matches_enumeration(backend):
    rng = np.random.default_rng(7)
    for _ in range(40):
        n, m = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        f = SignMatrix(rng.choice([-1, 1], size=(n, m)))
        mu = random_mu(rng, n, m)
        value, witness = disc_under(f, mu)
        assert value == brute_disc_under(f, mu)
        # the witness achieves the value
        w = mu.weights * f.entries.astype(object)
        assert witness.sign * sum(w[i, j] for i in witness.rect.rows for j in witness.rect.cols) == value


def test_disc_under_uniform_ip1():
    f = gen_inner_product(1)
    value, _ = disc_under(f, EntryDistribution.uniform(2, 2))
    assert value == Fraction(1, 2)


def test_best_rectangle_transposes_wide_inputs():
    g = np.array([[1.0, -2.0, 3.0, 0.5, -1.0]])
    rect, value = best_rectangle(g)
    assert value == Fraction(4.5)
    assert rect == Rectangle([0], [0, 2, 3])


def test_heuristic_never_beats_exact():
    rng = np.random.default_rng(8)
    for _ in range(20):
        g = rng.normal(size=(6, 7))
        _, exact = best_rectangle(g)
        _, approx = heuristic_best_rectangle(g, restarts=5, seed=1)
        assert approx <= exact + Fraction(1, 10 ** 9)


@pytest.mark.parametrize("k,expected", [(1, Fraction(1, 3)), (2, Fraction(1, 6))])
def test_inner_product_values(k, expected):
    cert = disc_game(gen_inner_product(k))
    assert cert.converged
    assert cert.lower <= expected <= cert.upper
    assert cert.gap <= Fraction(1, 10 ** 4)


def test_exact_game_oracle_contains_ip1():
    assert disc_exact(gen_inner_product(1)) == Fraction(1, 3)
    assert disc_exact(SignMatrix([[1, 1], [1, 1]])) == 1
    with pytest.raises(CapError):
        disc_exact(gen_inner_product(3))


def test_interval_contains_exact_value_on_random_small():
    rng = np.random.default_rng(9)
    for _ in range(12):
        n, m = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        f = SignMatrix(rng.choice([-1, 1], size=(n, m)))
        cert = disc_game(f)
        exact = disc_exact(f)
        assert cert.lower <= exact <= cert.upper


def test_certificate_is_self_consistent():
    f = gen_random_low_rank(7, 6, 3, seed=2)
    cert = disc_game(f)
    # upper is the exact disc of the returned distribution
    assert disc_under(f, cert.argmin_mu)[0] == cert.upper
    # lower is the worst cell payoff of the dual mixture
    payoff = sum((w * SignedRectangle(r.rect, r.sign).payoff_vector(f).astype(object)
                  for r, w in cert.dual.items() and zip(cert.dual.items(), cert.dual.weights())),
                 np.zeros(f.n_rows * f.n_cols, dtype=object))
    assert min(payoff) == cert.lower
    assert cert.history and cert.iterations == len(cert.history)


def test_duplicated_rows_do_not_change_disc():
    f = gen_random_low_rank(5, 5, 3, seed=4)
    g = SignMatrix(np.vstack([f.entries, f.entries[:2]]))
    a, b = disc_game(f), disc_game(g)
    assert max(a.lower, b.lower) <= min(a.upper, b.upper)


def test_constant_matrix_has_disc_one():
    cert = disc_game(SignMatrix(np.ones((3, 4), dtype=int)))
    assert cert.lower == cert.upper == 1


def test_rank_bound_report():
    rep = check_rank_disc_bound(gen_inner_product(2))
    assert rep["rank"] == 4 and rep["passed"] and rep["converged"]
    assert rep["margin"] > 0


def test_cap_enforced(monkeypatch):
    monkeypatch.setenv("LOGRANK_ENUM_CAP", "3")
    with pytest.raises(CapError):
        disc_game(gen_inner_product(2))


def test_exact_selection_with_large_denominators():
    # denominators too large for the float route exercise the integer enumeration
    rng = np.random.default_rng(11)
    primes = [1000003, 1000033, 1000037, 1000039, 1000081, 1000099, 1000117, 1000121, 1000133]
    for _ in range(5):
        f = SignMatrix(rng.choice([-1, 1], size=(3, 3)))
        raw = [Fraction(int(rng.integers(1, 50)), p) for p in primes]
        total = sum(raw)
        mu = EntryDistribution(np.array([v / total for v in raw], dtype=object).reshape(3, 3), exact=True)
        assert disc_under(f, mu)[0] == brute_disc_under(f, mu)


def test_near_ties_resolve_exactly():
    # two rectangles whose biases differ by far less than float resolution
    tiny = Fraction(1, 10 ** 30)
    w = [[Fraction(1, 4) + tiny, Fraction(1, 4) - tiny], [Fraction(1, 4) - tiny, Fraction(1, 4) + tiny]]
    f = SignMatrix([[1, -1], [-1, 1]])
    mu = EntryDistribution(np.array(w, dtype=object), exact=True)
    assert disc_under(f, mu)[0] == brute_disc_under(f, mu)


def test_interval_is_ordered_on_corpus_sample(corpus):
    for name, f in corpus[:20]:
        cert = disc_game(f)
        assert cert.lower <= cert.upper, name
