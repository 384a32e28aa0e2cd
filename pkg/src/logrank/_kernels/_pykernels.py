"""Pure-Python/numpy implementations of the enumeration kernels.

Bitsets are Python ints. Every function here has a compiled twin in
``_ckernels.pyx`` with identical results.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "signed_subset_scan",
    "max_biclique_dfs",
    "max_biclique_bnb",
    "BACKEND",
]

BACKEND = "python"

TARGET_AREA = 0
TARGET_MINSIDE = 1

_CHUNK_BITS = 12


def _subset_sums(W: np.ndarray) -> np.ndarray:
    """Row-subset sums: out[mask] = sum of W[i] over bits i of mask."""
    k, m = W.shape
    out = np.zeros((1 << k, m), dtype=np.float64)
    for i in range(k):
        half = 1 << i
        out[half:2 * half] = out[:half] + W[i]
    return out


def signed_subset_scan(W):
    """Best row subset for each sign of the closure rule.

    For every row mask A of ``W`` (k x m, float64) and sign s, the optimal
    column set is {j : s * colsum_A(j) > 0}, with value
    sum_j max(0, s * colsum_A(j)). Returns ``(pos_mask, pos_val, neg_mask,
    neg_val)`` where each mask is the smallest one whose value is within
    1e-12 * sum|W| of the maximum. The empty mask has value 0.
    """
    W = np.ascontiguousarray(W, dtype=np.float64)
    k, m = W.shape
    tol = 1e-12 * max(float(np.abs(W).sum()), 1e-300)
    lo_bits = min(k, _CHUNK_BITS)
    hi_bits = k - lo_bits
    low = _subset_sums(W[:lo_bits])
    high = _subset_sums(W[lo_bits:]) if hi_bits else np.zeros((1, m))

    def values(h):
        cs = low + high[h]
        return np.maximum(cs, 0.0).sum(axis=1), np.maximum(-cs, 0.0).sum(axis=1)

    best = [0.0, 0.0]
    for h in range(1 << hi_bits):
        vp, vn = values(h)
        best[0] = max(best[0], float(vp.max()))
        best[1] = max(best[1], float(vn.max()))
    masks = [None, None]
    for h in range(1 << hi_bits):
        vals = values(h)
        for s in (0, 1):
            if masks[s] is None:
                hit = np.flatnonzero(vals[s] >= best[s] - tol)
                if hit.size:
                    masks[s] = (h << lo_bits) | int(hit[0])
        if masks[0] is not None and masks[1] is not None:
            break
    return masks[0], best[0], masks[1], best[1]


def _popcount(x: int) -> int:
    return bin(x).count("1")


def _value(target: int, a: int, b: int) -> int:
    return a * b if target == TARGET_AREA else min(a, b)


def max_biclique_dfs(rowbits, ncols: int, target: int = TARGET_AREA):
    """Exhaustive row-subset search with column closure.

    ``rowbits[i]`` is the set of columns adjacent to row i. For every row
    subset A the columns are the intersection of its rows' sets. Returns
    ``(row_mask, col_mask, value)`` maximizing the target, ties broken by
    the smallest row mask. Value 0 means no nonempty biclique.
    """
    rowbits = [int(b) for b in rowbits]
    k = len(rowbits)
    full = (1 << ncols) - 1
    best = [0, 0, 0]  # value, row mask, col mask

    def dfs(i, amask, asize, cols):
        if asize:
            v = _value(target, asize, _popcount(cols))
            if v > best[0] or (v == best[0] and v > 0 and amask < best[1]):
                best[0], best[1], best[2] = v, amask, cols
        if i == k or cols == 0:
            return
        pc = _popcount(cols)
        if _value(target, asize + k - i, pc) < best[0]:
            return
        dfs(i + 1, amask | (1 << i), asize + 1, cols & rowbits[i])
        dfs(i + 1, amask, asize, cols)

    dfs(0, 0, 0, full)
    if best[0] == 0:
        return 0, 0, 0
    return best[1], best[2], best[0]


def max_biclique_bnb(rowbits, ncols: int, target: int = TARGET_AREA,
                     lower_bound: int = 0, node_limit: int = 0):
    """Branch and bound over closed row sets (Close-by-One order).

    Visits each closed pair (A = rows(B), B = cols(A)) at most once and
    prunes subtrees that cannot beat the incumbent. ``lower_bound`` seeds
    the incumbent value; only strictly better bicliques are returned.
    Returns ``(row_mask, col_mask, value, nodes)``; ``value`` equals
    ``lower_bound`` and masks are 0 when nothing better exists.
    ``node_limit`` > 0 aborts with ``nodes = -1`` when exceeded.
    """
    rowbits = [int(b) for b in rowbits]
    k = len(rowbits)
    full = (1 << ncols) - 1
    best = [lower_bound, 0, 0]
    nodes = [0]

    def rows_of(cols):
        m = 0
        for j in range(k):
            if rowbits[j] & cols == cols:
                m |= 1 << j
        return m

    class _Abort(Exception):
        pass

    def visit(amask, cols, y):
        nodes[0] += 1
        if node_limit and nodes[0] > node_limit:
            raise _Abort
        asize = _popcount(amask)
        bsize = _popcount(cols)
        if asize and bsize:
            v = _value(target, asize, bsize)
            if v > best[0]:
                best[0], best[1], best[2] = v, amask, cols
        if bsize == 0:
            return
        need = best[0] + 1 if target == TARGET_MINSIDE else 1
        cand = []
        for i in range(y, k):
            if not (amask >> i) & 1 and _popcount(rowbits[i] & cols) >= need:
                cand.append(i)
        if _value(target, asize + len(cand), bsize) <= best[0]:
            return
        for idx, i in enumerate(cand):
            ncols_ = cols & rowbits[i]
            if _value(target, asize + len(cand) - idx, _popcount(ncols_)) <= best[0]:
                continue
            amask2 = rows_of(ncols_)
            low = (1 << i) - 1
            if amask2 & low != amask & low:
                continue
            visit(amask2, ncols_, i + 1)

    try:
        visit(rows_of(full), full, 0)
    except _Abort:
        return best[1], best[2], best[0], -1
    return best[1], best[2], best[0], nodes[0]
