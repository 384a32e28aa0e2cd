"""Large nearly-monochromatic rectangles from high discrepancy.

A minimax distribution over rectangles separates +1 cells from -1 cells
by a margin p - q. Intersecting t independent draws sharpens the
separation until the -1 mass inside the intersection is at most an
eps fraction of its total mass.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog

from .discrepancy import best_rectangle_signed, disc_game
from .lp import LPError
from .matrix import (
    EntryDistribution,
    MatrixError,
    Rectangle,
    RectangleDistribution,
    SignMatrix,
    dedupe,
    exact_simplex_point,
)

__all__ = [
    "SeparationStats",
    "AmplifyResult",
    "AmplifyError",
    "four_split",
    "build_separating_distribution",
    "choose_t",
    "amplify",
    "size_floor_log2",
    "exhaustive_intersection_search",
    "SIZE_FLOOR_CONSTANT",
    "SUPPORT_CAP",
]

SIZE_FLOOR_CONSTANT = 16
SUPPORT_CAP = 200
DEFAULT_MAX_TRIALS = 1000


class AmplifyError(RuntimeError):
    """Sampling budget exhausted; carries the best candidate seen."""

    def __init__(self, message, best=None, stats=None):
        super().__init__(message)
        self.best = best
        self.stats = stats


@dataclass
class SeparationStats:
    p: Fraction
    q: Fraction
    margin: Fraction
    delta_lb: Fraction
    upper: Fraction = None  # best-response value against the pair player's mixture
    converged: bool = True
    iterations: int = 0
    support_capped: bool = False

    @property
    def target(self) -> Fraction:
        return Fraction(2, 3) * self.delta_lb

    def meets_target(self, tol: float) -> bool:
        return self.margin >= self.target - Fraction(tol)

    def to_json(self) -> dict:
        return {
            "p": float(self.p),
            "q": float(self.q),
            "margin": float(self.margin),
            "delta_lb": float(self.delta_lb),
            "target": float(self.target),
            "upper": None if self.upper is None else float(self.upper),
            "converged": self.converged,
            "iterations": self.iterations,
            "support_capped": self.support_capped,
        }


@dataclass
class AmplifyResult:
    rect: Rectangle
    t: int
    mu_mass: Fraction
    minority_mass: Fraction
    cond_avg: Fraction
    trials_used: int
    color: int = 1
    eps: Fraction = None
    p: Fraction = None
    q: Fraction = None
    delta_lb: Fraction = None
    mass_floor: Fraction = None  # p^t / 4
    floor_log2: float = None    # -C * log2(1/eps) / delta_lb
    seed: int = 0
    stats: SeparationStats = field(default=None, repr=False)

    def satisfies_predicates(self) -> bool:
        ok = self.minority_mass <= self.eps * self.mu_mass
        if self.mass_floor is not None:
            ok = ok and self.mu_mass >= self.mass_floor
        return bool(ok)

    def meets_size_floor(self) -> bool:
        if self.floor_log2 is None:
            return True
        return self.mu_mass > 0 and math.log2(self.mu_mass) >= self.floor_log2

    def to_json(self) -> dict:
        f = lambda v: None if v is None else float(v)  # noqa: E731
        return {
            "rect": self.rect.to_json(),
            "t": self.t,
            "mu_mass": f(self.mu_mass),
            "minority_mass": f(self.minority_mass),
            "cond_avg": f(self.cond_avg),
            "trials_used": self.trials_used,
            "color": self.color,
            "eps": f(self.eps),
            "p": f(self.p),
            "q": f(self.q),
            "delta_lb": f(self.delta_lb),
            "mass_floor": f(self.mass_floor),
            "size_floor_log2": self.floor_log2,
            "size_floor_constant": SIZE_FLOOR_CONSTANT,
            "seed": self.seed,
        }


def _fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


def four_split(R: Rectangle, n_rows: int, n_cols: int) -> list[Rectangle]:
    """A x B, A' x B, A x B', A' x B' for the complements A', B' in the grid."""
    if not R.within(n_rows, n_cols):
        raise MatrixError("rectangle out of bounds")
    a_c = [i for i in range(n_rows) if i not in set(R.rows)]
    b_c = [j for j in range(n_cols) if j not in set(R.cols)]
    return [
        Rectangle(R.rows, R.cols),
        Rectangle(a_c, R.cols),
        Rectangle(R.rows, b_c),
        Rectangle(a_c, b_c),
    ]


def _solve_restricted(inc_plus: np.ndarray, inc_minus: np.ndarray):
    """max p - q over rho: p <= inc(a) for + cells, q >= inc(b) for - cells."""
    n_plus, K = inc_plus.shape
    n_minus = inc_minus.shape[0]
    c = np.zeros(K + 2)
    c[K], c[K + 1] = -1.0, 1.0
    A_ub = np.zeros((n_plus + n_minus, K + 2))
    A_ub[:n_plus, :K] = -inc_plus
    A_ub[:n_plus, K] = 1.0
    A_ub[n_plus:, :K] = inc_minus
    A_ub[n_plus:, K + 1] = -1.0
    A_eq = np.zeros((1, K + 2))
    A_eq[0, :K] = 1.0
    bounds = [(0, None)] * K + [(0, 1), (0, 1)]
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(n_plus + n_minus), A_eq=A_eq, b_eq=[1.0],
                  bounds=bounds, method="highs")
    if res.status != 0:
        raise LPError(f"separation LP failed: {res.message}")
    duals = np.clip(-np.asarray(res.ineqlin.marginals), 0.0, None)
    alpha, beta = duals[:n_plus], duals[n_plus:]
    alpha = alpha / alpha.sum() if alpha.sum() > 0 else np.full(n_plus, 1.0 / n_plus)
    beta = beta / beta.sum() if beta.sum() > 0 else np.full(n_minus, 1.0 / n_minus)
    return np.clip(res.x[:K], 0.0, None), -res.fun, alpha, beta


def _exact_stats(rects, weights, plus, minus):
    """Exact (min inclusion over plus cells, max inclusion over minus cells)."""
    incl = {}
    for r, w in zip(rects, weights):
        if w == 0:
            continue
        for i in r.rows:
            for j in r.cols:
                incl[(i, j)] = incl.get((i, j), Fraction(0)) + w
    p = min(incl.get((int(i), int(j)), Fraction(0)) for i, j in plus)
    q = max(incl.get((int(i), int(j)), Fraction(0)) for i, j in minus)
    return p, q


def build_separating_distribution(f: SignMatrix, delta_lb, tol: float = 1e-4,
                                  max_iters: int = 500, smoothing: float = 0.5):
    """Distribution rho over rectangles maximizing min Pr[+cell in R] - max Pr[-cell in R].

    Column generation on the matrix with repeated rows/columns removed
    (lifting a rectangle to all duplicates keeps every inclusion
    probability). The restricted LP over the current rectangles gives rho
    and the pair player's mixture (alpha over +1 cells, beta over -1
    cells); the best response rectangle maximizes alpha(R) - beta(R).
    p and q are recomputed exactly from rho's finite support.
    """
    delta_lb = _fraction(delta_lb)
    if f.is_constant():
        raise MatrixError("lemma vacuous: no opposite-sign pair")
    fd, row_map, col_map = dedupe(f)
    n, m = fd.shape
    a = fd.entries
    plus = np.argwhere(a == 1)
    minus = np.argwhere(a == -1)
    plus_idx = (plus[:, 0], plus[:, 1])
    minus_idx = (minus[:, 0], minus[:, 1])

    def price(alpha, beta):
        g = np.zeros((n, m))
        g[plus_idx] = alpha
        g[minus_idx] = -beta
        return best_rectangle_signed(g)[1]

    def column(rect):
        rin = np.zeros(n, dtype=bool)
        cin = np.zeros(m, dtype=bool)
        rin[list(rect.rows)] = True
        cin[list(rect.cols)] = True
        return (rin[plus[:, 0]] & cin[plus[:, 1]]), (rin[minus[:, 0]] & cin[minus[:, 1]])

    rects: list[Rectangle] = []
    cols_p: list[np.ndarray] = []
    cols_m: list[np.ndarray] = []

    def add(rect) -> bool:
        if rect.is_empty() or rect in rects:
            return False
        cp, cm = column(rect)
        rects.append(rect)
        cols_p.append(cp)
        cols_m.append(cm)
        return True

    alpha_s = np.full(len(plus), 1.0 / len(plus))
    beta_s = np.full(len(minus), 1.0 / len(minus))
    rect, best_upper = price(alpha_s, beta_s)
    add(rect)
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        rho, value, alpha, beta = _solve_restricted(np.array(cols_p, dtype=float).T,
                                                    np.array(cols_m, dtype=float).T)
        weights = exact_simplex_point(rho)
        added = False
        for point in ((smoothing * alpha_s + (1 - smoothing) * alpha,
                       smoothing * beta_s + (1 - smoothing) * beta), (alpha, beta)):
            rect, upper = price(*point)
            if upper < best_upper:
                best_upper = upper
                alpha_s, beta_s = point
            if add(rect):
                added = True
                break
        if best_upper - value <= tol or not added:
            p, q = _exact_stats(rects, weights, plus, minus)
            if best_upper - (p - q) <= Fraction(tol) or not added:
                converged = best_upper - (p - q) <= Fraction(tol)
                break

    row_groups = [[] for _ in range(n)]
    col_groups = [[] for _ in range(m)]
    for i, r in enumerate(row_map):
        row_groups[r].append(i)
    for j, c in enumerate(col_map):
        col_groups[c].append(j)
    support = [(Rectangle([i for r in rect.rows for i in row_groups[r]],
                          [j for c in rect.cols for j in col_groups[c]]), w)
               for rect, w in zip(rects, weights) if w > 0]
    capped = False
    if len(support) > SUPPORT_CAP:
        support.sort(key=lambda rw: -rw[1])
        support = support[:SUPPORT_CAP]
        total = sum(w for _, w in support)
        support = [(r, w / total) for r, w in support]
        capped = True
    dist = RectangleDistribution(support)
    a_full = f.entries
    p, q = _exact_stats(dist.items(), dist.weights(),
                        np.argwhere(a_full == 1), np.argwhere(a_full == -1))
    stats = SeparationStats(p=p, q=q, margin=p - q, delta_lb=delta_lb, upper=best_upper,
                            converged=converged, iterations=it, support_capped=capped)
    return dist, stats


def choose_t(stats: SeparationStats, eps) -> int:
    """Smallest t >= 1 with (q/p)^t <= eps/2."""
    p, q = _fraction(stats.p), _fraction(stats.q)
    eps = _fraction(eps)
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if p <= q:
        raise ValueError("no separation margin")
    if q == 0:
        return 1
    ratio = q / p
    target = eps / 2
    t = max(1, math.ceil(math.log(float(target)) / math.log(float(ratio))) - 1)
    while ratio ** t > target:
        t += 1
    while t > 1 and ratio ** (t - 1) <= target:
        t -= 1
    return t


def size_floor_log2(delta_lb, eps, constant: int = SIZE_FLOOR_CONSTANT) -> float:
    """log2 of 2^(-C * log2(1/eps) / delta_lb)."""
    return -constant * math.log2(1.0 / float(eps)) / float(delta_lb)


def _masses(f_entries, mu_w, exact, rmask: int, cmask: int):
    rows = [i for i in range(f_entries.shape[0]) if (rmask >> i) & 1]
    cols = [j for j in range(f_entries.shape[1]) if (cmask >> j) & 1]
    zero = Fraction(0) if exact else 0.0
    if not rows or not cols:
        return zero, zero, rows, cols
    idx = np.ix_(rows, cols)
    w = mu_w[idx]
    total = sum(w.flat, zero)
    minority = sum(w[f_entries[idx] == -1].flat, zero)
    return total, minority, rows, cols


def amplify(f: SignMatrix, mu: EntryDistribution, eps, seed: int = 0,
            max_trials: int = DEFAULT_MAX_TRIALS, delta_lb=None, tol: float = 1e-4,
            separation=None) -> AmplifyResult:
    """Sample R* = R_1 cap ... cap R_t from the separating distribution.

    Orients f so that its mu-average is nonnegative, then accepts the first
    trial with minority mass <= eps * mu(R*) and mu(R*) >= p^t / 4. Each
    trial draws from its own generator seeded by (seed, trial).
    ``separation`` may pass a precomputed ``(rho, stats)`` built for the
    oriented matrix (f, or -f when f's mu-average is negative); a pair
    built for the other orientation is rejected.
    """
    eps = _fraction(eps)
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if mu.shape != f.shape:
        raise MatrixError("distribution shape does not match matrix")
    n, m = f.shape
    exact = mu.exact
    one = Fraction(1) if exact else 1.0
    if f.is_constant():
        color = int(f.entries[0, 0])
        return AmplifyResult(Rectangle.full(n, m), 1, mu.mass(Rectangle.full(n, m)),
                             0 * one, Fraction(color), 0, color=color, eps=eps, seed=seed)

    w = mu.weights
    total_signed = sum((w * f.entries.astype(object)).flat, 0 * one)
    color = 1 if total_signed >= 0 else -1
    g = f if color == 1 else -f
    if delta_lb is None:
        delta_lb = disc_game(f, tol).lower
    delta_lb = _fraction(delta_lb)
    if delta_lb <= 0:
        raise ValueError("delta_lb must be positive")
    if separation is None:
        separation = build_separating_distribution(g, delta_lb, tol)
    rho, stats = separation
    plus, minus = np.argwhere(g.entries == 1), np.argwhere(g.entries == -1)
    if _exact_stats(rho.items(), rho.weights(), plus, minus) != (stats.p, stats.q):
        raise ValueError("separation does not match the oriented matrix")
    t = choose_t(stats, eps)
    floor = stats.p ** t / 4
    floor_l2 = size_floor_log2(delta_lb, eps)

    masks = [(r.row_mask, r.col_mask) for r in rho.items()]
    probs = np.array([float(x) for x in rho.weights()])
    probs = probs / probs.sum()
    best = None
    for trial in range(max_trials):
        rng = np.random.default_rng([seed, trial])
        picks = rng.choice(len(masks), size=t, p=probs)
        rm, cm = -1, -1
        for k in picks:
            rm &= masks[k][0]
            cm &= masks[k][1]
        rm &= (1 << n) - 1
        cm &= (1 << m) - 1
        mass, minority, rows, cols = _masses(g.entries, w, exact, rm, cm)
        if mass > 0:
            T = mass - minority / eps
            if best is None or T > best[0]:
                best = (T, rows, cols, mass, minority)
            if minority <= eps * mass and mass >= floor:
                cond = (mass - 2 * minority) / mass
                return AmplifyResult(
                    Rectangle(rows, cols), t, mass, minority, color * cond, trial + 1,
                    color=color, eps=eps, p=stats.p, q=stats.q, delta_lb=delta_lb,
                    mass_floor=floor, floor_log2=floor_l2, seed=seed, stats=stats,
                )
    raise AmplifyError(f"no acceptable rectangle in {max_trials} trials (t={t})",
                       best=best, stats=stats)


def exhaustive_intersection_search(f: SignMatrix, mu: EntryDistribution, rho: RectangleDistribution,
                                   t: int, eps):
    """Enumerate all t-multisets of rho's support and return the best T = mu(R*) - mu(R* minus)/eps.

    Used to confirm that some t-fold intersection achieves T > 0.
    Returns ``(T, Rectangle)``.
    """
    eps = _fraction(eps)
    items = rho.items()
    zero = Fraction(0) if mu.exact else 0.0
    best = (None, None)
    for combo in itertools.combinations_with_replacement(range(len(items)), t):
        rect = items[combo[0]]
        for k in combo[1:]:
            rect = rect.intersect(items[k])
        if rect.is_empty():
            T = zero
        else:
            mass, minority, _, _ = _masses(f.entries, mu.weights, mu.exact,
                                           rect.row_mask, rect.col_mask)
            T = mass - minority / eps
        if best[0] is None or T > best[0]:
            best = (T, rect)
    return best
