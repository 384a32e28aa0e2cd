"""Monochromatic rectangles inside low-rank, nearly monochromatic ones.

``extract_mono`` keeps the rows with few minority entries, picks a basis
of their row space and restricts to the columns where every basis row
agrees with the majority color. Each surviving row is a linear
combination of basis rows that are constant on those columns, so it is
itself constant there; the larger color class of rows gives the output.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels
from .matrix import CapError, MatrixError, Rectangle, SignMatrix, independent_rows, rank_exact, restrict

__all__ = ["MonoExtraction", "PreconditionError", "extract_mono", "brute_force_max_mono",
           "is_monochromatic", "BRUTE_CAP"]

BRUTE_CAP = 20


class PreconditionError(MatrixError):
    pass


@dataclass
class MonoExtraction:
    input_rect: Rectangle
    a_prime: tuple[int, ...]
    basis_rows: tuple[int, ...]
    b_prime: tuple[int, ...]
    output_rect: Rectangle
    color: int
    r: int
    restricted_rank: int
    average: Fraction             # E[f|R], uniform on R
    minority_fraction: Fraction   # fraction of R holding the minority color

    @property
    def size_ratio(self) -> Fraction:
        return Fraction(self.output_rect.area, self.input_rect.area)

    @property
    def rows_markov_ok(self) -> bool:
        return 2 * len(self.a_prime) >= len(self.input_rect.rows)

    @property
    def cols_markov_ok(self) -> bool:
        return 2 * len(self.b_prime) >= len(self.input_rect.cols)

    def to_json(self) -> dict:
        return {
            "input_rect": self.input_rect.to_json(),
            "a_prime": list(self.a_prime),
            "basis_rows": list(self.basis_rows),
            "b_prime": list(self.b_prime),
            "output_rect": self.output_rect.to_json(),
            "color": self.color,
            "r": self.r,
            "restricted_rank": self.restricted_rank,
            "average": f"{self.average.numerator}/{self.average.denominator}",
            "minority_fraction": f"{self.minority_fraction.numerator}/{self.minority_fraction.denominator}",
            "size_ratio": float(self.size_ratio),
            "rows_markov_ok": self.rows_markov_ok,
            "cols_markov_ok": self.cols_markov_ok,
        }


def is_monochromatic(f: SignMatrix, R: Rectangle) -> bool:
    if R.is_empty():
        return False
    block = f.entries[np.ix_(R.rows, R.cols)]
    return bool((block == block.flat[0]).all())


def extract_mono(f: SignMatrix, R: Rectangle, r: int | None = None) -> MonoExtraction:
    """Monochromatic R' inside R with |R'| >= |R|/8.

    Requires |E[f|R]| >= 1 - 1/(2r) under the uniform distribution on R.
    ``r`` defaults to the rank of f restricted to R.
    """
    sub = restrict(f, R)
    restricted_rank = rank_exact(sub)
    if r is None:
        r = max(restricted_rank, 1)
    if r < 1:
        raise ValueError("r must be a positive integer")
    a = sub.entries.astype(np.int64)
    n_a, n_b = a.shape
    avg = Fraction(int(a.sum()), n_a * n_b)
    threshold = 1 - Fraction(1, 2 * r)
    if avg >= threshold:
        color = 1
    elif -avg >= threshold:
        color = -1
    else:
        raise PreconditionError("average below 1 − 1/2r")
    g = a * color  # majority is +1 in g
    minority = (g == -1).sum(axis=1)
    minority_fraction = Fraction(int(minority.sum()), n_a * n_b)

    # rows with at most |B|/(2r) minority entries: 2r * count <= |B|
    a_local = [i for i in range(n_a) if 2 * r * int(minority[i]) <= n_b]
    basis_local = [a_local[k] for k in independent_rows([g[i].tolist() for i in a_local])]
    b_local = [j for j in range(n_b) if all(g[i, j] == 1 for i in basis_local)]
    if not b_local or not a_local:
        raise RuntimeError("internal invariant violated: empty B' under the precondition")
    block = g[np.ix_(a_local, b_local)]
    if not ((block == block[:, :1]).all()):
        raise RuntimeError("internal invariant violated: a row of A' x B' is not constant")
    plus = [a_local[k] for k in range(len(a_local)) if block[k, 0] == 1]
    minus = [a_local[k] for k in range(len(a_local)) if block[k, 0] == -1]
    # colors in f's orientation; ties go to +1
    by_color = {color: plus, -color: minus}
    out_color = 1 if len(by_color[1]) >= len(by_color[-1]) else -1
    out_rows = by_color[out_color]

    rows = R.rows
    cols = R.cols
    return MonoExtraction(
        input_rect=R,
        a_prime=tuple(rows[i] for i in a_local),
        basis_rows=tuple(rows[i] for i in basis_local),
        b_prime=tuple(cols[j] for j in b_local),
        output_rect=Rectangle([rows[i] for i in out_rows], [cols[j] for j in b_local]),
        color=out_color,
        r=r,
        restricted_rank=restricted_rank,
        average=avg,
        minority_fraction=minority_fraction,
    )


def brute_force_max_mono(f: SignMatrix, cap: int = BRUTE_CAP) -> tuple[Rectangle, int]:
    """Maximum-area monochromatic rectangle by exhaustive subset search.

    Enumerates row subsets of the smaller side; the best partner set is
    every line constant in the color across them. Ties prefer +1, then
    the smallest subset mask.
    """
    n, m = f.shape
    transpose = n > m
    a = f.entries.T if transpose else f.entries
    k, ncols = a.shape
    if k > cap:
        raise CapError(f"min dimension {k} exceeds brute-force cap {cap}")
    best = None
    for color in (1, -1):
        bits = [sum(1 << j for j in range(ncols) if a[i, j] == color) for i in range(k)]
        rm, cm, area = _kernels.max_biclique_dfs(bits, ncols, _kernels.TARGET_AREA)
        if area and (best is None or area > best[0]):
            best = (area, rm, cm, color)
    _, rm, cm, color = best
    rect = Rectangle.from_masks(rm, cm)
    if transpose:
        rect = Rectangle(rect.cols, rect.rows)
    return rect, color
