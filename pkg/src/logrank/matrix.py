"""Sign and integer matrices, rectangles, distributions over cells.

All values are immutable after construction. Rank is computed exactly
with fraction-free (Bareiss) elimination over Python integers.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "MatrixError",
    "ParseError",
    "CapError",
    "SignMatrix",
    "IntMatrix",
    "Rectangle",
    "EntryDistribution",
    "load_matrix",
    "load_int_matrix",
    "rank_exact",
    "dedupe",
    "restrict",
    "average",
    "gen_inner_product",
    "gen_random_low_rank",
    "gen_rigidity_example",
    "RectangleDistribution",
    "exact_simplex_point",
]

INNER_PRODUCT_CAP = 6
RIGIDITY_ROW_CAP = 5000


class MatrixError(ValueError):
    """Invalid matrix, rectangle or distribution."""


class ParseError(MatrixError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CapError(MatrixError):
    """A desk-scale size cap was exceeded."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


class SignMatrix:
    """An n_rows x n_cols matrix with entries in {-1, +1}."""

    __slots__ = ("entries",)

    def __init__(self, entries):
        a = np.asarray(entries)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise MatrixError(f"sign matrix must be a nonempty 2-d array, got shape {a.shape}")
        if not np.all((a == 1) | (a == -1)):
            raise MatrixError("sign matrix entries must be -1 or +1")
        self.entries = _frozen(a.astype(np.int8))

    @property
    def n_rows(self) -> int:
        return self.entries.shape[0]

    @property
    def n_cols(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def __neg__(self) -> SignMatrix:
        return SignMatrix(-self.entries)

    @property
    def T(self) -> SignMatrix:
        return SignMatrix(self.entries.T)

    def __eq__(self, other) -> bool:
        return isinstance(other, SignMatrix) and np.array_equal(self.entries, other.entries)

    def __hash__(self) -> int:
        return hash((self.shape, self.entries.tobytes()))

    def __repr__(self) -> str:
        return f"SignMatrix({self.n_rows}x{self.n_cols})"

    def is_constant(self) -> bool:
        return bool(np.all(self.entries == self.entries[0, 0]))

    def to_text(self) -> str:
        return "".join(
            "".join("+" if v > 0 else "-" for v in row) + "\n" for row in self.entries
        )

    def to_json(self) -> dict:
        return {"rows": self.n_rows, "cols": self.n_cols, "entries": self.entries.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> SignMatrix:
        m = cls(obj["entries"])
        if m.shape != (obj.get("rows", m.n_rows), obj.get("cols", m.n_cols)):
            raise MatrixError("declared dimensions do not match entries")
        return m


class IntMatrix:
    """Exact integer (or rational) matrix, stored as a tuple of row tuples."""

    __slots__ = ("rows",)

    def __init__(self, rows):
        if isinstance(rows, np.ndarray):
            rows = rows.tolist()
        rows = tuple(tuple(_exact(v) for v in row) for row in rows)
        if not rows or not rows[0]:
            raise MatrixError("matrix must be nonempty")
        if any(len(r) != len(rows[0]) for r in rows):
            raise MatrixError("ragged matrix")
        self.rows = rows

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_cols(self) -> int:
        return len(self.rows[0])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def __add__(self, other: IntMatrix) -> IntMatrix:
        if self.shape != other.shape:
            raise MatrixError("shape mismatch")
        return IntMatrix([[a + b for a, b in zip(r, s)] for r, s in zip(self.rows, other.rows)])

    def __sub__(self, other: IntMatrix) -> IntMatrix:
        if self.shape != other.shape:
            raise MatrixError("shape mismatch")
        return IntMatrix([[a - b for a, b in zip(r, s)] for r, s in zip(self.rows, other.rows)])

    def __eq__(self, other) -> bool:
        return isinstance(other, IntMatrix) and self.rows == other.rows

    def __hash__(self) -> int:
        return hash(self.rows)

    def __repr__(self) -> str:
        return f"IntMatrix({self.n_rows}x{self.n_cols})"

    @property
    def T(self) -> IntMatrix:
        return IntMatrix(list(zip(*self.rows)))

    def nonzero_count(self) -> int:
        return sum(1 for row in self.rows for v in row if v != 0)

    def to_json(self) -> dict:
        return {
            "rows": self.n_rows,
            "cols": self.n_cols,
            "entries": [[v if isinstance(v, int) else f"{v.numerator}/{v.denominator}" for v in r]
                        for r in self.rows],
        }

    @classmethod
    def from_json(cls, obj: dict) -> IntMatrix:
        return cls([[Fraction(v) if isinstance(v, str) else v for v in r] for r in obj["entries"]])

    @classmethod
    def from_sign(cls, m: SignMatrix) -> IntMatrix:
        return cls(m.entries.tolist())


def _exact(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, Fraction):
        return v.numerator if v.denominator == 1 else v
    if isinstance(v, (float, np.floating)):
        if not math.isfinite(v):
            raise MatrixError("non-finite entry")
        f = Fraction(float(v))
        return f.numerator if f.denominator == 1 else f
    raise MatrixError(f"unsupported entry type {type(v).__name__}")


@dataclass(frozen=True)
class Rectangle:
    """A combinatorial rectangle rows x cols; indices are kept sorted and unique."""

    rows: tuple[int, ...]
    cols: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(sorted({int(i) for i in self.rows})))
        object.__setattr__(self, "cols", tuple(sorted({int(j) for j in self.cols})))

    @classmethod
    def full(cls, n_rows: int, n_cols: int) -> Rectangle:
        return cls(tuple(range(n_rows)), tuple(range(n_cols)))

    @classmethod
    def from_masks(cls, row_mask: int, col_mask: int) -> Rectangle:
        return cls(_bits(row_mask), _bits(col_mask))

    @property
    def row_mask(self) -> int:
        return sum(1 << i for i in self.rows)

    @property
    def col_mask(self) -> int:
        return sum(1 << j for j in self.cols)

    @property
    def area(self) -> int:
        return len(self.rows) * len(self.cols)

    def is_empty(self) -> bool:
        return not self.rows or not self.cols

    def __contains__(self, cell) -> bool:
        i, j = cell
        return i in self.rows and j in self.cols

    def intersect(self, other: Rectangle) -> Rectangle:
        return Rectangle(set(self.rows) & set(other.rows), set(self.cols) & set(other.cols))

    def within(self, n_rows: int, n_cols: int) -> bool:
        return all(0 <= i < n_rows for i in self.rows) and all(0 <= j < n_cols for j in self.cols)

    def is_subset(self, other: Rectangle) -> bool:
        return set(self.rows) <= set(other.rows) and set(self.cols) <= set(other.cols)

    def to_json(self) -> dict:
        return {"rows": list(self.rows), "cols": list(self.cols)}

    @classmethod
    def from_json(cls, obj: dict) -> Rectangle:
        return cls(tuple(obj["rows"]), tuple(obj["cols"]))


def _bits(mask: int) -> tuple[int, ...]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


class EntryDistribution:
    """A probability distribution over the cells of an n x m grid.

    Weights are either exact (``Fraction`` object array, total exactly 1)
    or float64 (total within 1e-12 of 1).
    """

    __slots__ = ("weights", "exact")

    FLOAT_TOL = 1e-12

    def __init__(self, weights, exact: bool | None = None):
        w = np.asarray(weights, dtype=object if exact else None)
        if w.ndim != 2:
            raise MatrixError("distribution weights must be 2-d")
        if exact is None:
            exact = w.dtype == object
        if exact:
            w = np.vectorize(Fraction, otypes=[object])(w)
            if any(v < 0 for v in w.flat):
                raise MatrixError("negative weight")
            if sum(w.flat, Fraction(0)) != 1:
                raise MatrixError("weights must sum to exactly 1")
        else:
            w = w.astype(np.float64)
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise MatrixError("weights must be finite and nonnegative")
            if abs(math.fsum(w.flat) - 1.0) > self.FLOAT_TOL:
                raise MatrixError("weights must sum to 1 within 1e-12")
        self.weights = _frozen(w)
        self.exact = bool(exact)

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape

    @classmethod
    def uniform(cls, n_rows: int, n_cols: int) -> EntryDistribution:
        c = Fraction(1, n_rows * n_cols)
        return cls(np.full((n_rows, n_cols), c, dtype=object), exact=True)

    @classmethod
    def point(cls, n_rows: int, n_cols: int, i: int, j: int) -> EntryDistribution:
        w = np.full((n_rows, n_cols), Fraction(0), dtype=object)
        w[i, j] = Fraction(1)
        return cls(w, exact=True)

    @classmethod
    def from_floats(cls, values) -> EntryDistribution:
        """Exact distribution from nonnegative floats, normalised exactly."""
        v = np.clip(np.asarray(values, dtype=np.float64), 0.0, None)
        w = np.vectorize(Fraction, otypes=[object])(v)
        total = sum(w.flat, Fraction(0))
        if total == 0:
            raise MatrixError("all weights are zero")
        return cls(w / total, exact=True)

    def mass(self, rect: Rectangle):
        if rect.is_empty():
            return Fraction(0) if self.exact else 0.0
        block = self.weights[np.ix_(rect.rows, rect.cols)]
        return sum(block.flat, Fraction(0)) if self.exact else math.fsum(block.flat)

    def as_float(self) -> np.ndarray:
        return self.weights.astype(np.float64)

    def to_json(self) -> list:
        if self.exact:
            return [[f"{v.numerator}/{v.denominator}" for v in row] for row in self.weights]
        return [[float(f"{v:.12g}") for v in row] for row in self.weights]


# ---------------------------------------------------------------- parsing

_SYMBOLS = {"+": 1, "-": -1, "1": 1, "-1": -1, "+1": 1}


def load_matrix(text: str) -> SignMatrix:
    """Parse the sign-matrix text format.

    Rows are lines. A row is either a run of '+'/'-' characters, or
    whitespace separated tokens from {1, -1, +, -}. Blank lines and lines
    starting with '#' are ignored.
    """
    rows: list[list[int]] = []
    width = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) == 1 and set(tokens[0]) <= {"+", "-"}:
            tokens = list(tokens[0])
        try:
            row = [_SYMBOLS[t] for t in tokens]
        except KeyError as exc:
            raise ParseError(f"symbol {exc.args[0]!r} outside alphabet", lineno) from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(f"ragged row: expected {width} entries, got {len(row)}", lineno)
        rows.append(row)
    if not rows:
        raise ParseError("empty input")
    return SignMatrix(rows)


def load_int_matrix(text: str) -> IntMatrix:
    """Parse whitespace separated integers (or p/q rationals), one row per line."""
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            row = [Fraction(t) for t in line.split()]
        except ValueError:
            raise ParseError("not a number", lineno) from None
        if rows and len(row) != len(rows[0]):
            raise ParseError(f"ragged row: expected {len(rows[0])} entries, got {len(row)}", lineno)
        rows.append(row)
    if not rows:
        raise ParseError("empty input")
    return IntMatrix(rows)


def matrix_from_json(text: str) -> SignMatrix | IntMatrix:
    obj = json.loads(text)
    entries = obj["entries"]
    if all(v in (1, -1) for row in entries for v in row):
        return SignMatrix.from_json(obj)
    return IntMatrix.from_json(obj)


# ---------------------------------------------------------------- rank

def _integer_rows(M) -> list[list[int]]:
    if isinstance(M, SignMatrix):
        return M.entries.astype(np.int64).tolist()
    if isinstance(M, IntMatrix):
        rows = M.rows
    else:
        rows = [[_exact(v) for v in row] for row in np.asarray(M, dtype=object)]
    out = []
    for row in rows:
        den = math.lcm(*(v.denominator if isinstance(v, Fraction) else 1 for v in row))
        out.append([int(v * den) for v in row])
    return out


def rank_exact(M) -> int:
    """Rank over the rationals by fraction-free Gaussian elimination."""
    a = _integer_rows(M)
    if not a or not a[0]:
        return 0
    n, m = len(a), len(a[0])
    rank = 0
    prev = 1
    for col in range(m):
        piv = next((i for i in range(rank, n) if a[i][col] != 0), None)
        if piv is None:
            continue
        a[rank], a[piv] = a[piv], a[rank]
        p = a[rank][col]
        prow = a[rank]
        for i in range(rank + 1, n):
            row = a[i]
            c = row[col]
            if c == 0:
                if p != prev:
                    for j in range(col + 1, m):
                        row[j] = row[j] * p // prev
                continue
            for j in range(col + 1, m):
                row[j] = (row[j] * p - c * prow[j]) // prev
            row[col] = 0
        prev = p
        rank += 1
        if rank == n:
            break
    return rank


def independent_rows(rows: Sequence[Sequence[int]]) -> list[int]:
    """Indices of the greedily chosen (first-come) linearly independent rows."""
    basis: list[tuple[int, list[Fraction]]] = []  # (pivot column, reduced row)
    chosen = []
    for idx, row in enumerate(rows):
        v = [Fraction(x) for x in row]
        for pc, b in basis:
            if v[pc] != 0:
                c = v[pc] / b[pc]
                v = [x - c * y for x, y in zip(v, b)]
        pc = next((j for j, x in enumerate(v) if x != 0), None)
        if pc is not None:
            basis.append((pc, v))
            chosen.append(idx)
    return chosen


# ---------------------------------------------------------------- structure

def dedupe(M: SignMatrix) -> tuple[SignMatrix, list[int], list[int]]:
    """Drop repeated rows and columns, keeping first occurrences.

    Returns the reduced matrix and maps from original row/column index to
    the index of its representative in the reduced matrix.
    """
    a = M.entries
    row_keys: dict[bytes, int] = {}
    row_map = []
    keep_rows = []
    for i in range(a.shape[0]):
        k = a[i].tobytes()
        if k not in row_keys:
            row_keys[k] = len(keep_rows)
            keep_rows.append(i)
        row_map.append(row_keys[k])
    b = a[keep_rows]
    col_keys: dict[bytes, int] = {}
    col_map = []
    keep_cols = []
    for j in range(b.shape[1]):
        k = b[:, j].tobytes()
        if k not in col_keys:
            col_keys[k] = len(keep_cols)
            keep_cols.append(j)
        col_map.append(col_keys[k])
    # column equality on the deduped rows equals column equality on all rows
    return SignMatrix(b[:, keep_cols]), row_map, col_map


def restrict(M, R: Rectangle):
    if R.is_empty():
        raise MatrixError("cannot restrict to an empty rectangle")
    if not R.within(M.n_rows, M.n_cols):
        raise MatrixError("rectangle out of bounds")
    if isinstance(M, SignMatrix):
        return SignMatrix(M.entries[np.ix_(R.rows, R.cols)])
    return IntMatrix([[M.rows[i][j] for j in R.cols] for i in R.rows])


def average(M: SignMatrix, mu: EntryDistribution, R: Rectangle):
    """Conditional average of M under mu restricted to R."""
    if mu.shape != M.shape:
        raise MatrixError("distribution shape does not match matrix")
    mass = mu.mass(R)
    if mass == 0:
        raise MatrixError("conditioning on null event")
    idx = np.ix_(R.rows, R.cols)
    w = mu.weights[idx]
    f = M.entries[idx]
    if mu.exact:
        num = sum((wi * int(fi) for wi, fi in zip(w.flat, f.flat)), Fraction(0))
    else:
        num = math.fsum(float(wi) * int(fi) for wi, fi in zip(w.flat, f.flat))
    return num / mass


# ---------------------------------------------------------------- generators

def gen_inner_product(k: int) -> SignMatrix:
    if k < 1:
        raise MatrixError("k must be positive")
    if k > INNER_PRODUCT_CAP:
        raise CapError(f"inner product size k={k} exceeds cap {INNER_PRODUCT_CAP}")
    n = 1 << k
    # lexicographic order on {0,1}^k == binary order with x_1 as the high bit
    x = np.arange(n)
    parity = np.zeros((n, n), dtype=np.int64)
    for b in range(k):
        parity ^= ((x[:, None] >> b) & 1) & ((x[None, :] >> b) & 1)
    return SignMatrix(1 - 2 * parity)


def gen_random_low_rank(n: int, m: int, r: int, seed: int, mode: str = "pattern",
                        max_resample: int = 1000) -> SignMatrix:
    """Random n x m sign matrix with rank at most r.

    ``pattern``: r random sign rows, every output row is a copy of one of
    them (each pattern used at least once when n >= r).
    ``bool-product``: a 0/1 product U V^T thresholded at > 0, mapped to
    {+1,-1}; resampled until rank_exact <= r.
    """
    if r < 1 or r > min(n, m):
        raise MatrixError(f"rank target r={r} must lie in [1, min(n, m)={min(n, m)}]")
    rng = np.random.default_rng(seed)
    if mode == "pattern":
        patterns = rng.choice(np.array([-1, 1], dtype=np.int8), size=(r, m))
        picks = np.concatenate([np.arange(r), rng.integers(0, r, size=n - r)]) if n >= r \
            else rng.integers(0, r, size=n)
        rng.shuffle(picks)
        return SignMatrix(patterns[picks])
    if mode == "bool-product":
        for _ in range(max_resample):
            u = rng.integers(0, 2, size=(n, r))
            v = rng.integers(0, 2, size=(m, r))
            M = SignMatrix(np.where(u @ v.T > 0, -1, 1))
            if rank_exact(M) <= r:
                return M
        raise MatrixError("bool-product sampler exhausted its resampling budget")
    raise MatrixError(f"unknown generator mode {mode!r}")


def weight_vectors(r: int, w: int) -> list[tuple[int, ...]]:
    """All 0/1 vectors of length r and Hamming weight w, lexicographic order."""
    out = []
    for support in itertools.combinations(range(r), w):
        v = [0] * r
        for i in support:
            v[i] = 1
        out.append(tuple(v))
    return sorted(out)


def gen_rigidity_example(r: int, w: int) -> IntMatrix:
    """M = N N^t for N the matrix of all weight-w vectors in {0,1}^r."""
    if not 1 <= w <= r:
        raise MatrixError("need 1 <= w <= r")
    if math.comb(r, w) > RIGIDITY_ROW_CAP:
        raise CapError(f"C({r},{w}) = {math.comb(r, w)} rows exceeds cap {RIGIDITY_ROW_CAP}")
    N = np.array(weight_vectors(r, w), dtype=np.int64)
    return IntMatrix(N @ N.T)


def rigidity_factor(r: int, w: int) -> np.ndarray:
    return np.array(weight_vectors(r, w), dtype=np.int64)


def matrix_lines(M: Iterable[Iterable]) -> str:
    return "\n".join(" ".join(str(v) for v in row) for row in M) + "\n"


class RectangleDistribution:
    """A finitely supported distribution over rectangles (or signed rectangles).

    ``support`` is a tuple of ``(item, weight)``; exact weights sum to 1,
    float weights to 1 within 1e-12. Zero-weight items are dropped.
    """

    __slots__ = ("support",)

    def __init__(self, support):
        items = [(r, w) for r, w in support if w != 0]
        if not items:
            raise MatrixError("empty rectangle distribution")
        if any(w < 0 for _, w in items):
            raise MatrixError("negative weight")
        total = sum(w for _, w in items)
        if isinstance(total, Fraction):
            if total != 1:
                raise MatrixError("weights must sum to exactly 1")
        elif abs(total - 1) > 1e-12:
            raise MatrixError("weights must sum to 1 within 1e-12")
        for r, _ in items:
            rect = getattr(r, "rect", r)
            if rect.is_empty():
                raise MatrixError("support rectangles must be nonempty")
        self.support = tuple(items)

    def __len__(self) -> int:
        return len(self.support)

    def items(self):
        return [r for r, _ in self.support]

    def weights(self):
        return [w for _, w in self.support]

    def inclusion(self, i: int, j: int):
        """Probability that cell (i, j) lies in a rectangle drawn from this distribution."""
        return sum((w for r, w in self.support if (i, j) in getattr(r, "rect", r)),
                   Fraction(0) if isinstance(self.support[0][1], Fraction) else 0.0)

    def to_json(self) -> list:
        return [{"item": r.to_json(), "weight": _num_json(w)} for r, w in self.support]


def exact_simplex_point(values, bits: int = 30) -> list[Fraction]:
    """Exact probability vector on the grid 2^-bits nearest the clipped, normalised floats.

    Rounds down, then hands the missing grid units to the largest
    remainders, so the result sums to exactly 1.
    """
    x = np.clip(np.asarray(values, dtype=np.float64).ravel(), 0.0, None)
    total = float(x.sum())
    if not total > 0:
        raise MatrixError("all weights are zero")
    scale = 1 << bits
    target = x / total * scale
    units = np.floor(target).astype(np.int64)
    short = scale - int(units.sum())
    if short > 0:
        units[np.argsort(-(target - units), kind="stable")[:short]] += 1
    return [Fraction(int(u), scale) for u in units]


def _num_json(v):
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, float):
        return float(f"{v:.12g}")
    return v
