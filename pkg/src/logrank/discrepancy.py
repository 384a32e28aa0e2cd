"""Discrepancy of sign matrices.

``disc_under`` computes the maximal rectangle bias under a fixed cell
distribution by exhaustive enumeration of the smaller side with the
column-closure rule. ``disc_game`` computes min over distributions by a
double-oracle game solver and returns a certified interval.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _kernels
from .lp import solve_game_exact, solve_game_float
from .matrix import (
    CapError,
    EntryDistribution,
    MatrixError,
    Rectangle,
    RectangleDistribution,
    SignMatrix,
    exact_simplex_point,
    rank_exact,
)

log = logging.getLogger(__name__)

__all__ = [
    "SignedRectangle",
    "DiscrepancyCertificate",
    "best_rectangle",
    "best_rectangle_signed",
    "heuristic_best_rectangle",
    "disc_under",
    "disc_game",
    "disc_exact",
    "check_rank_disc_bound",
    "enum_cap",
]

DEFAULT_TOL = 1e-4
DEFAULT_MAX_ITERS = 500
_ENUM_CAP = 24


def enum_cap() -> int:
    return int(os.environ.get("LOGRANK_ENUM_CAP", _ENUM_CAP))


@dataclass(frozen=True)
class SignedRectangle:
    rect: Rectangle
    sign: int

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise MatrixError("sign must be +1 or -1")

    def payoff_vector(self, f: SignMatrix) -> np.ndarray:
        """sign * f(x,y) * [(x,y) in rect], flattened row-major."""
        v = np.zeros(f.shape, dtype=np.int64)
        if not self.rect.is_empty():
            idx = np.ix_(self.rect.rows, self.rect.cols)
            v[idx] = self.sign * f.entries[idx]
        return v.ravel()

    def to_json(self) -> dict:
        return {**self.rect.to_json(), "sign": self.sign}


@dataclass
class DiscrepancyCertificate:
    lower: Fraction
    upper: Fraction
    argmin_mu: EntryDistribution
    witness_rect: SignedRectangle
    dual: RectangleDistribution
    converged: bool = True
    iterations: int = 0
    tol: float = DEFAULT_TOL
    history: list = field(default_factory=list, repr=False)

    @property
    def gap(self) -> Fraction:
        return self.upper - self.lower

    def to_json(self) -> dict:
        return {
            "lower": _fmt(self.lower),
            "upper": _fmt(self.upper),
            "lower_float": float(self.lower),
            "upper_float": float(self.upper),
            "gap": float(self.gap),
            "converged": self.converged,
            "iterations": self.iterations,
            "witness": self.witness_rect.to_json(),
            "mu": self.argmin_mu.to_json(),
            "dual": self.dual.to_json(),
        }


def _fmt(v):
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    return float(f"{v:.12g}")


# ------------------------------------------------------------ best response

def _exact_weights(g) -> np.ndarray:
    g = np.asarray(g)
    if g.dtype == object:
        return np.vectorize(Fraction, otypes=[object])(g)
    return np.vectorize(lambda v: Fraction(float(v)), otypes=[object])(g)


# integer sums below this are exact in float64 and the scan's tie
# tolerance (1e-12 * total) stays below one unit
_EXACT_FLOAT_TOTAL = 1 << 39


def _exact_scan(gx: np.ndarray) -> tuple[int, int]:
    """Same contract as the kernel scan, exact for rational weights.

    Scales to integers by the common denominator. Small totals go through
    the float kernel, which is then exact; larger ones use big-integer
    Gray-code enumeration.
    """
    den = math.lcm(*(v.denominator for v in gx.flat))
    W = [[int(v * den) for v in row] for row in gx]
    total = sum(abs(v) for row in W for v in row)
    if total < _EXACT_FLOAT_TOTAL:
        pos_mask, _, neg_mask, _ = _kernels.signed_subset_scan(np.array(W, dtype=np.float64))
        return pos_mask, neg_mask
    k, m = gx.shape
    cs = [0] * m
    best = [(0, 0), (0, 0)]  # (value, mask) per sign; smallest mask wins ties
    prev = 0
    for step in range(1, 1 << k):
        mask = step ^ (step >> 1)
        bit = (mask ^ prev).bit_length() - 1
        row = W[bit]
        if mask >> bit & 1:
            cs = [c + w for c, w in zip(cs, row)]
        else:
            cs = [c - w for c, w in zip(cs, row)]
        prev = mask
        vp = sum(c for c in cs if c > 0)
        vn = -sum(c for c in cs if c < 0)
        for s, v in ((0, vp), (1, vn)):
            if v > best[s][0] or (v == best[s][0] and v > 0 and mask < best[s][1]):
                best[s] = (v, mask)
    return best[0][1], best[1][1]


def best_rectangle_signed(g, cap: int | None = None):
    """Best rectangle for each sign: maximize sign * sum_{R} g.

    Returns ``{+1: (Rectangle, value), -1: (Rectangle, value)}``; values are
    exact Fractions (float input is converted exactly). A value of 0 comes
    with the empty rectangle.
    """
    g = np.asarray(g)
    if g.ndim != 2:
        raise MatrixError("weights must be a 2-d array")
    cap = enum_cap() if cap is None else cap
    n, m = g.shape
    if min(n, m) > cap:
        raise CapError(
            f"exact rectangle search needs min dimension <= {cap}, got {n}x{m}; "
            "use the heuristic mode"
        )
    transposed = m < n
    exact_input = g.dtype == object
    gx = _exact_weights(g.T if transposed else g)
    if exact_input:
        pos_mask, neg_mask = _exact_scan(gx)
    else:
        pos_mask, _, neg_mask, _ = _kernels.signed_subset_scan(gx.astype(np.float64))
    out = {}
    for sign, mask in ((1, pos_mask), (-1, neg_mask)):
        rows = [i for i in range(gx.shape[0]) if (mask >> i) & 1]
        if rows:
            colsum = [sign * sum(gx[rows, j], Fraction(0)) for j in range(gx.shape[1])]
            cols = [j for j, c in enumerate(colsum) if c > 0]
            value = sum((colsum[j] for j in cols), Fraction(0))
        else:
            cols, value = [], Fraction(0)
        if not cols:
            rows, value = [], Fraction(0)
        rect = Rectangle(cols, rows) if transposed else Rectangle(rows, cols)
        out[sign] = (rect, value)
    return out


def _pick(candidates):
    """Best (rect, value, sign): largest value, then smaller row mask, col mask, then sign +1."""
    return min(candidates, key=lambda c: (-c[1], c[0].row_mask, c[0].col_mask, -c[2]))


def best_rectangle(g, cap: int | None = None):
    """Rectangle maximizing |sum of g over R|, with that maximum.

    Enumerates all subsets of the smaller side (at most ``cap``, default
    24); the other side is closed optimally. Ties go to the smallest row
    mask, then column mask, on the enumerated side.
    """
    exact = np.asarray(g).dtype == object
    res = best_rectangle_signed(g, cap)
    rect, value, _ = _pick([(r, v, s) for s, (r, v) in res.items()])
    return rect, (value if exact else float(value))


def heuristic_best_rectangle(g, restarts: int = 20, seed: int = 0):
    """Alternating row/column closure from random starts. Not certified."""
    g = np.asarray(g, dtype=np.float64)
    n, m = g.shape
    rng = np.random.default_rng(seed)
    best = (Rectangle((), ()), 0.0)
    for _ in range(restarts):
        rows = rng.random(n) < 0.5
        if not rows.any():
            rows[rng.integers(n)] = True
        for sign in (1, -1):
            r = rows.copy()
            prev = None
            val = 0.0
            for _ in range(100):
                cols = sign * g[r].sum(axis=0) > 0
                if not cols.any():
                    break
                r = sign * g[:, cols].sum(axis=1) > 0
                if not r.any():
                    break
                cols = sign * g[r].sum(axis=0) > 0
                val = float(sign * g[np.ix_(r, cols)].sum())
                key = (r.tobytes(), cols.tobytes())
                if key == prev:
                    break
                prev = key
            if r.any() and val > best[1]:
                cols = sign * g[r].sum(axis=0) > 0
                best = (Rectangle(np.flatnonzero(r), np.flatnonzero(cols)), val)
    return best


def disc_under(f: SignMatrix, mu: EntryDistribution, cap: int | None = None):
    """Exact disc_mu(f) and a witnessing signed rectangle."""
    if mu.shape != f.shape:
        raise MatrixError("distribution shape does not match matrix")
    g = mu.weights * f.entries.astype(object) if mu.exact else mu.as_float() * f.entries
    res = best_rectangle_signed(g, cap)
    rect, value, sign = _pick([(r, v, s) for s, (r, v) in res.items()])
    if not mu.exact:
        value = float(value)
    return value, SignedRectangle(rect, sign)


# ------------------------------------------------------------ game solving

def _lower_bound(f: SignMatrix, strategies, weights: list[Fraction]) -> Fraction:
    """min over cells of the dual mixture's payoff, exactly."""
    den = math.lcm(*(w.denominator for w in weights))
    nums = [int(w * den) for w in weights]
    payoff = [0] * (f.n_rows * f.n_cols)
    for sr, c in zip(strategies, nums):
        if c == 0:
            continue
        vec = sr.payoff_vector(f)
        for idx in np.flatnonzero(vec):
            payoff[idx] += c * int(vec[idx])
    return Fraction(min(payoff), den)


def _snap(values) -> list[Fraction]:
    """Coarse rounding; often lands exactly on a rational optimum."""
    return exact_simplex_point(values, bits=12)


def _lift_rect(rect: Rectangle, row_groups, col_groups) -> Rectangle:
    return Rectangle([i for r in rect.rows for i in row_groups[r]],
                     [j for c in rect.cols for j in col_groups[c]])


def disc_game(f: SignMatrix, tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS,
              cap: int | None = None, smoothing: float = 0.8) -> DiscrepancyCertificate:
    """Certified interval for disc(f) = min_mu disc_mu(f) by double oracle.

    Runs on the matrix with repeated rows/columns removed (disc is
    unchanged by duplication) and lifts the result back. The rectangle
    player's strategy set grows by exact best responses of both signs,
    priced at a smoothed point between the best distribution so far and
    the restricted game's solution. ``upper`` is the exact disc of the
    returned distribution, ``lower`` the exact guarantee of the returned
    mixture of signed rectangles.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    from .matrix import dedupe

    fd, row_map, col_map = dedupe(f)
    n, m = fd.shape
    N = n * m
    if min(f.shape) > (enum_cap() if cap is None else cap):
        raise CapError(f"exact rectangle search needs min dimension <= {cap or enum_cap()}")
    entries = fd.entries.astype(np.float64)

    strategies: list[SignedRectangle] = []
    rows: list[np.ndarray] = []

    def add(res) -> bool:
        added = False
        for sign, (rect, _) in res.items():
            sr = SignedRectangle(rect, sign)
            if not rect.is_empty() and sr not in strategies:
                strategies.append(sr)
                rows.append(sr.payoff_vector(fd))
                added = True
        return added

    def price(mu_flat):
        res = best_rectangle_signed(mu_flat.reshape(n, m) * entries, cap)
        return max(float(v) for _, v in res.values()), res

    mu_best = np.full(N, 1.0 / N)
    up_float, res = price(mu_best)
    add(res)
    lam = None
    converged = False
    history = []
    it = 0
    for it in range(1, max_iters + 1):
        sol = solve_game_float(np.array(rows, dtype=np.float64))
        lo_float = sol.value
        lam = sol.row_strategy
        mu_k = np.asarray(sol.col_strategy)
        mu_eval = smoothing * mu_best + (1.0 - smoothing) * mu_k
        v, res = price(mu_eval)
        if v < up_float:
            up_float, mu_best = v, mu_eval
        added = add(res)
        if not added:
            v, res = price(mu_k)
            if v < up_float:
                up_float, mu_best = v, mu_k
            added = add(res)
        history.append((lo_float, up_float))
        if up_float - lo_float <= tol or not added:
            exact_lower, exact_upper = _certify(fd, strategies, lam, mu_best)
            if exact_upper - exact_lower <= Fraction(tol):
                converged = True
                break
            if not added:
                break

    return _lift_certificate(f, fd, row_map, col_map, strategies, lam, mu_best,
                             converged, it, tol, history, cap)


def _certify(fd, strategies, lam, mu_flat):
    n, m = fd.shape
    lower = max(_lower_bound(fd, strategies, exact_simplex_point(lam)),
                _lower_bound(fd, strategies, _snap(lam)))
    uppers = []
    for mu in (exact_simplex_point(mu_flat), _snap(mu_flat)):
        d = EntryDistribution(np.array(mu, dtype=object).reshape(n, m), exact=True)
        uppers.append(disc_under(fd, d)[0])
    return lower, min(uppers)


def _lift_certificate(f, fd, row_map, col_map, strategies, lam, mu_flat,
                      converged, it, tol, history, cap) -> DiscrepancyCertificate:
    n, m = fd.shape
    row_groups = [[] for _ in range(n)]
    col_groups = [[] for _ in range(m)]
    for i, r in enumerate(row_map):
        row_groups[r].append(i)
    for j, c in enumerate(col_map):
        col_groups[c].append(j)

    lifted = [SignedRectangle(_lift_rect(sr.rect, row_groups, col_groups), sr.sign)
              for sr in strategies]
    best_lower = None
    for weights in (exact_simplex_point(lam), _snap(lam)):
        lo = _lower_bound(f, lifted, weights)
        if best_lower is None or lo > best_lower[0]:
            best_lower = (lo, weights)

    best_upper = None
    for mu in (exact_simplex_point(mu_flat), _snap(mu_flat)):
        w = np.empty(f.shape, dtype=object)
        for i in range(f.n_rows):
            for j in range(f.n_cols):
                r, c = row_map[i], col_map[j]
                w[i, j] = mu[r * m + c] / (len(row_groups[r]) * len(col_groups[c]))
        dist = EntryDistribution(w, exact=True)
        value, witness = disc_under(f, dist, cap)
        if best_upper is None or value < best_upper[0]:
            best_upper = (value, dist, witness)

    lower, upper = best_lower[0], best_upper[0]
    return DiscrepancyCertificate(
        lower=lower,
        upper=upper,
        argmin_mu=best_upper[1],
        witness_rect=best_upper[2],
        dual=RectangleDistribution(zip(lifted, best_lower[1])),
        converged=converged and upper - lower <= Fraction(tol),
        iterations=it,
        tol=tol,
        history=history,
    )


def all_signed_rectangles(n: int, m: int):
    for rm in range(1, 1 << n):
        for cm in range(1, 1 << m):
            rect = Rectangle.from_masks(rm, cm)
            yield SignedRectangle(rect, 1)
            yield SignedRectangle(rect, -1)


def disc_exact(f: SignMatrix, max_cells: int = 16) -> Fraction:
    """disc(f) from the full game over all signed rectangles, exact simplex.

    Ground truth for tiny matrices only.
    """
    n, m = f.shape
    if n * m > max_cells:
        raise CapError(f"exact game needs at most {max_cells} cells")
    vecs = [sr.payoff_vector(f).tolist() for sr in all_signed_rectangles(n, m)]
    # cells as the maximizing rows of -A^T: value(-A^T) = -value(A)
    neg_t = [[-vecs[k][c] for k in range(len(vecs))] for c in range(n * m)]
    return -solve_game_exact(neg_t).value


def check_rank_disc_bound(f: SignMatrix, tol: float = DEFAULT_TOL,
                          max_iters: int = DEFAULT_MAX_ITERS,
                          certificate: DiscrepancyCertificate | None = None) -> dict:
    """Compare the certified discrepancy interval with 1/(8 sqrt(rank))."""
    r = rank_exact(f)
    cert = certificate or disc_game(f, tol, max_iters)
    # upper >= 1/(8 sqrt r)  <=>  64 r upper^2 >= 1, exact
    passed = cert.upper > 0 and 64 * r * cert.upper ** 2 >= 1
    return {
        "rank": r,
        "lower": float(cert.lower),
        "upper": float(cert.upper),
        "lower_exact": _fmt(cert.lower),
        "upper_exact": _fmt(cert.upper),
        "bound": 1.0 / (8.0 * math.sqrt(r)),
        "margin": float(cert.upper) - 1.0 / (8.0 * math.sqrt(r)),
        "passed": bool(passed),
        "converged": cert.converged,
        "iterations": cert.iterations,
        "witness": cert.witness_rect.to_json(),
        "mu": cert.argmin_mu.to_json(),
    }
