"""Zero rectangles in sparse low-rank matrices and rigidity bookkeeping.

A zero rectangle is a biclique in the bipartite graph whose edges are
the zero entries. Exact search runs a branch and bound over closed row
sets; the heuristic grows rectangles greedily and is never certified.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels
from .matrix import CapError, IntMatrix, MatrixError, Rectangle, rank_exact, restrict

__all__ = [
    "ZeroRectReport",
    "RigidityDecomposition",
    "zero_rectangle",
    "brute_force_zero_rectangle",
    "conjecture_check",
    "verify_rigidity_decomposition",
    "sparsity",
    "intersecting_pair_fraction",
    "node_budget",
    "TARGETS",
]

TARGETS = {"max-min-side": _kernels.TARGET_MINSIDE, "max-area": _kernels.TARGET_AREA}
_NODE_BUDGET = 20_000_000


def node_budget() -> int:
    return int(os.environ.get("LOGRANK_NODE_BUDGET", _NODE_BUDGET))


def _value(target: str, a: int, b: int) -> int:
    return min(a, b) if target == "max-min-side" else a * b


def sparsity(M: IntMatrix) -> Fraction:
    return Fraction(M.nonzero_count(), M.n_rows * M.n_cols)


def intersecting_pair_fraction(r: int, w: int) -> Fraction:
    """Fraction of ordered pairs of weight-w supports in [r] that intersect."""
    total = math.comb(r, w)
    return 1 - Fraction(math.comb(r - w, w), total)


@dataclass
class ZeroRectReport:
    rect: Rectangle
    sparsity: Fraction
    rank: int
    n: int
    mode: str
    target: str
    certified: bool
    nodes: int | None = None

    @property
    def min_side(self) -> int:
        return min(len(self.rect.rows), len(self.rect.cols))

    @property
    def value(self) -> int:
        return _value(self.target, len(self.rect.rows), len(self.rect.cols))

    @property
    def bound_ratio(self) -> float:
        """min(|A|, |B|) / (n * exp(-sqrt(eps * r))), hidden constant set to 1."""
        return self.min_side / (self.n * math.exp(-math.sqrt(float(self.sparsity) * self.rank)))

    def to_json(self) -> dict:
        return {
            "rect": self.rect.to_json(),
            "rows": len(self.rect.rows),
            "cols": len(self.rect.cols),
            "min_side": self.min_side,
            "value": self.value,
            "sparsity": f"{self.sparsity.numerator}/{self.sparsity.denominator}",
            "sparsity_float": float(self.sparsity),
            "rank": self.rank,
            "n": self.n,
            "bound_ratio": self.bound_ratio,
            "mode": self.mode,
            "target": self.target,
            "certified": self.certified,
            "nodes": self.nodes,
        }


def _zero_pattern(M: IntMatrix) -> np.ndarray:
    return np.array([[v == 0 for v in row] for row in M.rows], dtype=bool)


def _bits(Z: np.ndarray) -> list[int]:
    return [sum(1 << int(j) for j in np.flatnonzero(row)) for row in Z]


def _greedy(Z: np.ndarray, target: str) -> tuple[int, np.ndarray, np.ndarray]:
    """Greedy row addition from every seed row, then one drop-and-regrow pass."""
    k, m = Z.shape
    best = (0, np.zeros(k, bool), np.zeros(m, bool))

    def grow(rows: np.ndarray, cols: np.ndarray):
        cur = _value(target, int(rows.sum()), int(cols.sum()))
        while True:
            counts = Z[:, cols].sum(axis=1)
            counts[rows] = -1
            # value after adding each row
            vals = np.minimum(rows.sum() + 1, counts) if target == "max-min-side" else (rows.sum() + 1) * counts
            vals[rows] = -1
            i = int(np.argmax(vals))
            if vals[i] <= cur:
                return cur, rows, cols
            rows = rows.copy()
            rows[i] = True
            cols = cols & Z[i]
            cur = int(vals[i])

    for seed in range(k):
        if not Z[seed].any():
            continue
        rows = np.zeros(k, bool)
        rows[seed] = True
        v, rows, cols = grow(rows, Z[seed].copy())
        if v > best[0]:
            best = (v, rows, cols)
    v0, rows0, cols0 = best
    for drop in np.flatnonzero(rows0):
        rows = rows0.copy()
        rows[drop] = False
        if not rows.any():
            continue
        cols = Z[rows].all(axis=0)
        v, rows, cols = grow(rows, cols)
        if v > best[0]:
            best = (v, rows, cols)
    v, rows, cols = best
    if v > 0:
        # close both sides so the rectangle is maximal
        cols = Z[rows].all(axis=0)
        rows = Z[:, cols].all(axis=1)
    return v, rows, cols


def zero_rectangle(M: IntMatrix, mode: str = "exact", target: str = "max-min-side",
                   node_limit: int | None = None) -> ZeroRectReport:
    """Best all-zero rectangle of M for the chosen target.

    ``exact`` certifies optimality by branch and bound warm-started with the
    heuristic incumbent; it raises CapError when the node budget runs out.
    """
    if target not in TARGETS:
        raise ValueError(f"unknown target {target!r}")
    if mode not in ("exact", "heuristic"):
        raise ValueError(f"unknown mode {mode!r}")
    Z = _zero_pattern(M)
    transpose = Z.shape[0] > Z.shape[1]
    Zs = Z.T if transpose else Z
    v, rows, cols = _greedy(Zs, target)
    rm = sum(1 << int(i) for i in np.flatnonzero(rows)) if v else 0
    cm = sum(1 << int(j) for j in np.flatnonzero(cols)) if v else 0
    nodes = None
    if mode == "exact":
        limit = node_budget() if node_limit is None else node_limit
        brm, bcm, bv, nodes = _kernels.max_biclique_bnb(_bits(Zs), Zs.shape[1], TARGETS[target],
                                                        lower_bound=v, node_limit=limit)
        if nodes < 0:
            raise CapError(f"exact zero-rectangle search exceeded {limit} nodes; use heuristic mode")
        if bv > v:
            rm, cm = brm, bcm
    rect = Rectangle.from_masks(rm, cm)
    if transpose:
        rect = Rectangle(rect.cols, rect.rows)
    if not rect.is_empty() and any(M.rows[i][j] != 0 for i in rect.rows for j in rect.cols):
        raise RuntimeError("zero rectangle re-scan found a nonzero entry")
    return ZeroRectReport(rect=rect, sparsity=sparsity(M), rank=rank_exact(M),
                          n=min(M.shape), mode=mode, target=target,
                          certified=mode == "exact", nodes=nodes)


def brute_force_zero_rectangle(M: IntMatrix, target: str = "max-min-side") -> int:
    """Optimal target value over every row subset (reference for small M)."""
    Z = _zero_pattern(M)
    k = Z.shape[0]
    if k > 16:
        raise CapError("brute force limited to 16 rows")
    best = 0
    for mask in range(1, 1 << k):
        rows = [i for i in range(k) if mask >> i & 1]
        b = int(Z[rows].all(axis=0).sum())
        best = max(best, _value(target, len(rows), b) if b else 0)
    return best


def conjecture_check(M: IntMatrix, r_override: int | None = None, mode: str = "exact") -> dict:
    """Sparsity, rank and the best zero rectangle's size ratio; no verdict."""
    rep = zero_rectangle(M, mode=mode, target="max-min-side")
    if r_override is not None:
        rep.rank = r_override
    out = rep.to_json()
    out["exp_factor"] = math.exp(-math.sqrt(float(rep.sparsity) * rep.rank))
    out["rank_overridden"] = r_override is not None
    return out


@dataclass
class RigidityDecomposition:
    M: IntMatrix
    L: IntMatrix
    S: IntMatrix

    def __post_init__(self):
        if not (self.M.shape == self.L.shape == self.S.shape):
            raise MatrixError("M, L and S must have equal dimensions")

    @property
    def s(self) -> int:
        return self.S.nonzero_count()

    def to_json(self) -> dict:
        return {"M": self.M.to_json(), "L": self.L.to_json(), "S": self.S.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> RigidityDecomposition:
        # each part is a matrix object or a bare list of rows
        def part(x):
            return IntMatrix(x) if isinstance(x, list) else IntMatrix.from_json(x)

        return cls(part(obj["M"]), part(obj["L"]), part(obj["S"]))


def verify_rigidity_decomposition(dec: RigidityDecomposition, r: int, mode: str = "exact") -> dict:
    """Replays the rank argument on a concrete M = L + S.

    On a zero rectangle of S, M agrees with L, so M's rank there is at
    most rank(L). If both sides have size >= r and rank(L) < r, M has a
    singular r x r minor inside the rectangle.
    """
    if dec.L + dec.S != dec.M:
        raise MatrixError("M != L + S")
    rank_m, rank_l, rank_s = rank_exact(dec.M), rank_exact(dec.L), rank_exact(dec.S)
    zr = zero_rectangle(dec.S, mode=mode, target="max-min-side")
    rect = zr.rect
    agree = all(dec.M.rows[i][j] == dec.L.rows[i][j] for i in rect.rows for j in rect.cols)
    rect_rank = rank_exact(restrict(dec.M, rect)) if not rect.is_empty() else 0
    triggered = zr.min_side >= r
    low_rank_l = rank_l < r
    return {
        "rank_M": rank_m,
        "rank_L": rank_l,
        "rank_S": rank_s,
        "s": dec.s,
        "sparsity_S": float(Fraction(dec.s, dec.M.n_rows * dec.M.n_cols)),
        "subadditive": rank_s <= rank_m + rank_l,
        "zero_rect": zr.to_json(),
        "M_equals_L_on_rect": agree,
        "rect_rank_M": rect_rank,
        "rect_rank_le_rank_L": rect_rank <= rank_l,
        "r": r,
        "triggered": triggered,
        "rank_L_below_r": low_rank_l,
        "minor_full_rank": rect_rank >= r,
        # with all r x r minors nonsingular this case cannot happen
        "singular_minor_found": triggered and low_rank_l and rect_rank < r,
    }
