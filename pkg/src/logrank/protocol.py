"""Deterministic protocols built from monochromatic rectangles.

``nw_build`` grows a protocol tree by repeatedly asking a finder for a
monochromatic rectangle R = A x B of the current domain and letting the
player whose off-block has the smaller rank announce membership in A or
B. ``balance`` rebuilds any tree to logarithmic depth in its leaf count.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .amplification import AmplifyError, amplify
from .discrepancy import disc_game
from .lp import LPError
from .matrix import CapError, EntryDistribution, MatrixError, Rectangle, SignMatrix, dedupe, rank_exact
from .monochromatic import PreconditionError, brute_force_max_mono, extract_mono, is_monochromatic

log = logging.getLogger(__name__)

__all__ = [
    "Node",
    "ProtocolTree",
    "ProtocolError",
    "ComplexityReport",
    "FINDERS",
    "make_finder",
    "nw_build",
    "balance",
    "run",
    "verify",
    "exact_cc",
    "complexity",
    "balance_bound",
    "target_bound",
    "BALANCE_K",
    "NW_K",
    "TARGET_K",
    "EXACT_CC_CAP",
]

BALANCE_K = 3
NW_K = 4
TARGET_K = 32
EXACT_CC_CAP = 8


class ProtocolError(RuntimeError):
    def __init__(self, message: str, domain: Rectangle | None = None):
        super().__init__(message)
        self.domain = domain


@dataclass
class Node:
    domain: Rectangle
    value: int | None = None
    speaker: str | None = None  # "row" or "col"
    split: tuple[tuple[int, ...], tuple[int, ...]] | None = None
    children: tuple[Node, Node] | None = None

    @property
    def is_leaf(self) -> bool:
        return self.children is None

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(c.depth() for c in self.children)

    def leaves(self) -> int:
        if self.is_leaf:
            return 1
        return self.children[0].leaves() + self.children[1].leaves()

    def iter_nodes(self):
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            if not node.is_leaf:
                stack.extend(reversed(node.children))

    def to_json(self) -> dict:
        d = {"domain": self.domain.to_json()}
        if self.is_leaf:
            d["leaf"] = self.value
        else:
            d["speaker"] = self.speaker
            d["split"] = [list(self.split[0]), list(self.split[1])]
            d["children"] = [c.to_json() for c in self.children]
        return d

    @classmethod
    def from_json(cls, obj: dict) -> Node:
        domain = Rectangle.from_json(obj["domain"])
        if "leaf" in obj:
            return cls(domain, value=int(obj["leaf"]))
        split = (tuple(obj["split"][0]), tuple(obj["split"][1]))
        children = tuple(cls.from_json(c) for c in obj["children"])
        if len(children) != 2:
            raise MatrixError("internal node needs exactly two children")
        return cls(domain, speaker=obj["speaker"], split=split, children=children)


@dataclass
class ProtocolTree:
    """A protocol on the deduplicated matrix plus maps from original indices."""

    root: Node
    row_map: list[int]
    col_map: list[int]
    log: list[dict] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return self.root.depth()

    @property
    def leaves(self) -> int:
        return self.root.leaves()

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.row_map), len(self.col_map)

    def to_json(self, with_log: bool = True) -> dict:
        d = {"row_map": list(self.row_map), "col_map": list(self.col_map), "root": self.root.to_json()}
        if with_log:
            d["log"] = self.log
        return d

    @classmethod
    def from_json(cls, obj: dict) -> ProtocolTree:
        root = Node.from_json(obj["root"])
        row_map = obj.get("row_map")
        col_map = obj.get("col_map")
        if row_map is None:
            row_map = list(range(max(root.domain.rows) + 1))
        if col_map is None:
            col_map = list(range(max(root.domain.cols) + 1))
        return cls(root, list(row_map), list(col_map), obj.get("log", []))


# ---------------------------------------------------------------- finders

Finder = Callable[[SignMatrix, int, int], "tuple[Rectangle, dict]"]


def _heuristic_finder(sub: SignMatrix, r: int, node_id: int):
    """Best rectangle closed from a single seed line, over both orientations."""
    best = None
    for a, transpose in ((sub.entries, False), (sub.entries.T, True)):
        for color in (1, -1):
            hit = a == color
            for i in range(a.shape[0]):
                cols = np.flatnonzero(hit[i])
                if cols.size == 0:
                    continue
                rows = np.flatnonzero(hit[:, cols].all(axis=1))
                area = rows.size * cols.size
                if best is None or area > best[0]:
                    rect = Rectangle(cols, rows) if transpose else Rectangle(rows, cols)
                    best = (area, rect)
    return best[1], {"finder": "heuristic"}


def _brute_finder(sub: SignMatrix, r: int, node_id: int):
    rect, _ = brute_force_max_mono(sub)
    return rect, {"finder": "brute"}


class PipelineFinder:
    """Discrepancy bound, amplification under the uniform distribution, extraction.

    Amplification runs with minority mass at most eps/2 of the rectangle,
    so that the uniform conditional average is at least 1 - eps with
    eps = 1/(2r), which is what the extraction step needs.
    """

    def __init__(self, seed: int = 0, tol: float = 1e-3, max_iters: int = 300,
                 max_trials: int = 1000, fallback: str | None = "heuristic",
                 eps: Fraction | None = None):
        self.seed = seed
        self.tol = tol
        self.max_iters = max_iters
        self.max_trials = max_trials
        self.fallback = fallback
        self.eps = eps
        self._certs: dict = {}

    @staticmethod
    def _key(sub: SignMatrix):
        return sub.shape, sub.entries.tobytes()

    def cache_certificate(self, sub: SignMatrix, cert) -> None:
        """Reuse an already computed discrepancy certificate for ``sub``."""
        self._certs[self._key(sub)] = cert

    def __call__(self, sub: SignMatrix, r: int, node_id: int):
        try:
            return self._pipeline(sub, r, node_id)
        except (AmplifyError, PreconditionError, LPError, CapError, ValueError) as exc:
            if self.fallback is None:
                raise
            rect, info = FINDERS[self.fallback](sub, r, node_id)
            info.update(fallback=True, error=str(exc))
            log.info("pipeline finder fell back at node %d: %s", node_id, exc)
            return rect, info

    def _pipeline(self, sub: SignMatrix, r: int, node_id: int):
        cert = self._certs.get(self._key(sub))
        if cert is None:
            cert = disc_game(sub, tol=self.tol, max_iters=self.max_iters)
        if cert.lower <= 0:
            raise ValueError("no positive discrepancy lower bound")
        eps = Fraction(1, 2 * r) if self.eps is None else Fraction(self.eps)
        mu = EntryDistribution.uniform(*sub.shape)
        amp = amplify(sub, mu, eps / 2, seed=(self.seed << 20) + node_id,
                      max_trials=self.max_trials, delta_lb=cert.lower)
        ext = extract_mono(sub, amp.rect, r)
        info = {
            "finder": "pipeline",
            "fallback": False,
            "delta_lower": float(cert.lower),
            "delta_upper": float(cert.upper),
            "eps": float(eps),
            "eps_mass": float(eps / 2),
            "t": amp.t,
            "trials": amp.trials_used,
            "amplified_fraction": float(amp.mu_mass),
            "amplified_avg": float(amp.cond_avg),
            "size_floor_ok": amp.meets_size_floor(),
            "mono_ratio": float(ext.size_ratio),
            "markov_ok": ext.rows_markov_ok and ext.cols_markov_ok,
        }
        return ext.output_rect, info


FINDERS: dict[str, Finder] = {
    "heuristic": _heuristic_finder,
    "brute": _brute_finder,
}


def make_finder(name: str, seed: int = 0, **kwargs) -> Finder:
    if name == "pipeline":
        return PipelineFinder(seed=seed, **kwargs)
    try:
        return FINDERS[name]
    except KeyError:
        raise ValueError(f"unknown finder {name!r}") from None


# ---------------------------------------------------------------- construction

def _rank_block(a: np.ndarray, rows, cols) -> int:
    if len(rows) == 0 or len(cols) == 0:
        return 0
    return rank_exact(SignMatrix(a[np.ix_(rows, cols)]))


def nw_build(f: SignMatrix, finder: Finder | str = "pipeline", seed: int = 0) -> ProtocolTree:
    """Protocol tree for f from a monochromatic-rectangle finder.

    f is deduplicated first; the tree lives on the reduced matrix. At a
    non-constant domain of rank r with monochromatic A x B, the row player
    splits on A when rank(A x (C - B)) <= rank((D - A) x B), otherwise the
    column player splits on B. Every node's ranks go to ``tree.log``.
    """
    if isinstance(finder, str):
        finder = make_finder(finder, seed=seed)
    fd, row_map, col_map = dedupe(f)
    a = fd.entries
    entries_log: list[dict] = []

    def build(rows: tuple[int, ...], cols: tuple[int, ...]) -> Node:
        domain = Rectangle(rows, cols)
        block = a[np.ix_(rows, cols)]
        if (block == block.flat[0]).all():
            return Node(domain, value=int(block.flat[0]))
        node_id = len(entries_log)
        sub = SignMatrix(block)
        r = rank_exact(sub)
        local, info = finder(sub, r, node_id)
        if local.is_empty() or not local.within(*sub.shape) or not is_monochromatic(sub, local):
            raise ProtocolError(f"finder returned no monochromatic rectangle for domain {domain}", domain)
        A = [rows[i] for i in local.rows]
        B = [cols[j] for j in local.cols]
        rest_rows = [i for i in rows if i not in set(A)]
        rest_cols = [j for j in cols if j not in set(B)]
        rank_s = _rank_block(a, A, rest_cols)
        rank_p = _rank_block(a, rest_rows, B)
        if not rest_rows:
            speaker = "col"
        elif not rest_cols:
            speaker = "row"
        else:
            speaker = "row" if rank_s <= rank_p else "col"
        if speaker == "row":
            split = (tuple(A), tuple(rest_rows))
            kids = ((split[0], cols), (split[1], cols))
            half_rank = _rank_block(a, A, list(cols))
            off_rank = rank_s
        else:
            split = (tuple(B), tuple(rest_cols))
            kids = ((rows, split[0]), (rows, split[1]))
            half_rank = _rank_block(a, list(rows), B)
            off_rank = rank_p
        entries_log.append({
            "node": node_id,
            "rows": len(rows),
            "cols": len(cols),
            "rank": r,
            "rank_S": rank_s,
            "rank_P": rank_p,
            "split_ok": rank_s + rank_p <= r + 1,
            "speaker": speaker,
            "half_rank": half_rank,
            "half_ok": half_rank <= off_rank + 1,
            "mono_area": local.area,
            "mono_rect": [A, B],
            "cost": math.log2(block.size / local.area),
            **info,
        })
        children = tuple(build(*k) for k in kids)
        return Node(domain, speaker=speaker, split=split, children=children)

    n, m = fd.shape
    root = build(tuple(range(n)), tuple(range(m)))
    return ProtocolTree(root, list(row_map), list(col_map), entries_log)


# ---------------------------------------------------------------- balancing

def _restrict(node: Node, rows: frozenset, cols: frozenset) -> Node | None:
    """The subtree of inputs inside rows x cols, with empty branches removed."""
    dom_rows = tuple(i for i in node.domain.rows if i in rows)
    dom_cols = tuple(j for j in node.domain.cols if j in cols)
    if not dom_rows or not dom_cols:
        return None
    domain = Rectangle(dom_rows, dom_cols)
    if node.is_leaf:
        return Node(domain, value=node.value)
    kids = [_restrict(c, rows, cols) for c in node.children]
    if kids[0] is None:
        return kids[1]
    if kids[1] is None:
        return kids[0]
    side = (lambda c: c.domain.rows) if node.speaker == "row" else (lambda c: c.domain.cols)
    return Node(domain, speaker=node.speaker, split=(side(kids[0]), side(kids[1])), children=tuple(kids))


def _pivot(root: Node) -> Node:
    """A node holding between 1/3 and 2/3 of the leaves (root has >= 2)."""
    total = root.leaves()
    node = root
    while 3 * node.leaves() > 2 * total:
        a, b = node.children
        node = a if a.leaves() >= b.leaves() else b
    return node


def _balance(tree: Node) -> Node:
    if tree.is_leaf:
        return tree
    v = _pivot(tree)
    D = tree.domain
    v_rows, v_cols = set(v.domain.rows), set(v.domain.cols)

    def sub(rows, cols) -> Node:
        return _balance(_restrict(tree, frozenset(rows), frozenset(cols)))

    def col_stage(rows) -> Node:
        cols_in = tuple(j for j in D.cols if j in v_cols)
        cols_out = tuple(j for j in D.cols if j not in v_cols)
        if not cols_out:
            return sub(rows, cols_in)
        kids = (sub(rows, cols_in), sub(rows, cols_out))
        return Node(Rectangle(rows, D.cols), speaker="col", split=(cols_in, cols_out), children=kids)

    rows_in = tuple(i for i in D.rows if i in v_rows)
    rows_out = tuple(i for i in D.rows if i not in v_rows)
    if not rows_out:
        return col_stage(rows_in)
    kids = (col_stage(rows_in), sub(rows_out, D.cols))
    return Node(D, speaker="row", split=(rows_in, rows_out), children=kids)


def balance(tree: ProtocolTree) -> ProtocolTree:
    """Equivalent tree of depth at most 2 * ceil(log_{3/2}(leaves)).

    Picks a node v with 1/3 to 2/3 of the leaves; the row player says
    whether x is in v's rows, then the column player whether y is in v's
    columns. Inside v's rectangle only v's subtree remains, outside it v's
    leaves are gone, so every branch keeps at most 2/3 of the leaves.
    """
    return ProtocolTree(_balance(tree.root), list(tree.row_map), list(tree.col_map),
                        [{"balanced_from_depth": tree.depth, "leaves": tree.leaves}])


def balance_bound(leaves: int, k: int = BALANCE_K) -> int:
    if leaves <= 1:
        return k
    return k * math.ceil(math.log(leaves) / math.log(1.5) - 1e-12) + k


# ---------------------------------------------------------------- evaluation

def _walk(root: Node, x: int, y: int):
    node = root
    bits = []
    while not node.is_leaf:
        key = x if node.speaker == "row" else y
        if key in node.split[0]:
            bits.append("0")
            node = node.children[0]
        elif key in node.split[1]:
            bits.append("1")
            node = node.children[1]
        else:
            return None, "".join(bits)
    return node.value, "".join(bits)


def run(tree: ProtocolTree, x: int, y: int) -> tuple[int, str]:
    """Leaf value and transcript for original row x and column y."""
    n, m = tree.shape
    if not (0 <= x < n and 0 <= y < m):
        raise IndexError(f"input ({x}, {y}) outside a {n}x{m} matrix")
    value, bits = _walk(tree.root, tree.row_map[x], tree.col_map[y])
    if value is None:
        raise ProtocolError(f"input ({x}, {y}) falls outside a split")
    return value, bits


def _structure_errors(root: Node) -> list[str]:
    errors = []
    for node in root.iter_nodes():
        if node.is_leaf:
            if node.value not in (-1, 1):
                errors.append(f"leaf {node.domain} has value {node.value}")
            continue
        p0, p1 = node.split
        if not p0 or not p1:
            errors.append(f"empty split part at {node.domain}")
        side = node.domain.rows if node.speaker == "row" else node.domain.cols
        if node.speaker not in ("row", "col"):
            errors.append(f"unknown speaker {node.speaker!r}")
            continue
        if set(p0) & set(p1) or sorted(p0 + p1) != list(side):
            errors.append(f"split at {node.domain} does not partition the {node.speaker}s")
        for part, child in zip(node.split, node.children):
            want = Rectangle(part, node.domain.cols) if node.speaker == "row" else Rectangle(node.domain.rows, part)
            if child.domain != want:
                errors.append(f"child domain {child.domain} does not match split part of {node.domain}")
    return errors


def verify(f: SignMatrix, tree: ProtocolTree) -> dict:
    """Structural checks plus agreement with f on every cell."""
    report = {"passed": False, "structural_errors": [], "counterexample": None, "cells": f.n_rows * f.n_cols}
    if tree.shape != f.shape:
        report["structural_errors"].append(f"tree maps a {tree.shape} matrix, input is {f.shape}")
        return report
    root = tree.root
    n, m = max(tree.row_map) + 1, max(tree.col_map) + 1
    if root.domain != Rectangle.full(n, m):
        report["structural_errors"].append("root domain is not the full reduced matrix")
    errors = _structure_errors(root)
    a = f.entries
    reduced = np.zeros((n, m), dtype=np.int8)
    for i in range(f.n_rows):
        for j in range(f.n_cols):
            c = reduced[tree.row_map[i], tree.col_map[j]]
            if c and c != a[i, j]:
                errors.append(f"index maps merge unequal cells at ({i}, {j})")
            reduced[tree.row_map[i], tree.col_map[j]] = a[i, j]
    for node in root.iter_nodes():
        if node.is_leaf and node.domain.within(n, m):
            block = reduced[np.ix_(node.domain.rows, node.domain.cols)]
            if not (block == node.value).all():
                errors.append(f"leaf {node.domain} is not monochromatic with value {node.value}")
    report["structural_errors"] = errors
    for i in range(f.n_rows):
        for j in range(f.n_cols):
            value, bits = _walk(root, tree.row_map[i], tree.col_map[j])
            if value != a[i, j]:
                report["counterexample"] = {"row": i, "col": j, "expected": int(a[i, j]),
                                            "got": value, "transcript": bits}
                return report
    report["passed"] = not errors
    return report


# ---------------------------------------------------------------- exact oracle

def exact_cc(f: SignMatrix, cap: int = EXACT_CC_CAP) -> int:
    """Deterministic communication complexity by exhaustive recursion.

    States are sub-rectangles with repeated rows and columns collapsed.
    ``solve(state, ub)`` returns min(D(state), ub); exact values and
    proven lower bounds are memoized.
    """
    if f.n_rows > cap or f.n_cols > cap:
        raise CapError(f"exact_cc is limited to {cap}x{cap} matrices")
    fd, _, _ = dedupe(f)
    a = fd.entries
    n, m = a.shape
    canon_memo: dict[tuple[int, int], tuple[int, int]] = {}
    value: dict[tuple[int, int], int] = {}
    lower: dict[tuple[int, int], int] = {}

    def canon(rm: int, cm: int) -> tuple[int, int]:
        hit = canon_memo.get((rm, cm))
        if hit is not None:
            return hit
        rows = [i for i in range(n) if rm >> i & 1]
        cols = [j for j in range(m) if cm >> j & 1]
        block = a[np.ix_(rows, cols)]
        keep_r, seen = 0, set()
        for k, i in enumerate(rows):
            sig = block[k].tobytes()
            if sig not in seen:
                seen.add(sig)
                keep_r |= 1 << i
        keep_c, seen = 0, set()
        for k, j in enumerate(cols):
            sig = block[:, k].tobytes()
            if sig not in seen:
                seen.add(sig)
                keep_c |= 1 << j
        canon_memo[(rm, cm)] = (keep_r, keep_c)
        return keep_r, keep_c

    def parts(mask: int):
        bits = [1 << i for i in range(mask.bit_length()) if mask >> i & 1]
        first, rest = bits[0], bits[1:]
        for k in range(1 << len(rest)):
            s = first
            for t, b in enumerate(rest):
                if k >> t & 1:
                    s |= b
            if s != mask:
                yield s, mask ^ s

    def solve(rm: int, cm: int, ub: int) -> int:
        key = canon(rm, cm)
        if key in value:
            return min(value[key], ub)
        rm, cm = key
        if rm & (rm - 1) == 0 and cm & (cm - 1) == 0:
            value[key] = 0
            return 0
        lb = lower.get(key, 1)
        if lb >= ub:
            return ub
        best = ub
        splits = [((s, cm), (t, cm)) for s, t in parts(rm)] + [((rm, s), (rm, t)) for s, t in parts(cm)]
        for left, right in splits:
            if best <= lb:
                break
            x = solve(*left, best - 1)
            if x >= best - 1:
                continue
            y = solve(*right, best - 1)
            if y >= best - 1:
                continue
            best = 1 + max(x, y)
        if best < ub:
            value[key] = best
        else:
            lower[key] = max(lb, ub)
        return best

    # the row player announces its row, the column player the answer
    trivial = math.ceil(math.log2(n)) + 1 if n > 1 else 1
    return solve((1 << n) - 1, (1 << m) - 1, trivial + 1)


# ---------------------------------------------------------------- reporting

def target_bound(r: int, k: int = TARGET_K) -> float:
    return k * math.sqrt(r) * math.log2(r + 1)


@dataclass
class ComplexityReport:
    depth: int
    leaves: int
    balanced_depth: int
    rank: int
    nw_bound: float
    phase_costs: list[float]
    balance_bound: int
    target: float
    exact_cc: int | None = None
    fallbacks: int = 0
    split_invariant_ok: bool = True

    @property
    def within_target(self) -> bool:
        return self.balanced_depth <= self.target

    def to_json(self) -> dict:
        return {
            "depth": self.depth,
            "leaves": self.leaves,
            "balanced_depth": self.balanced_depth,
            "rank": self.rank,
            "nw_bound": self.nw_bound,
            "phase_costs": self.phase_costs,
            "balance_bound": self.balance_bound,
            "target": self.target,
            "within_target": self.within_target,
            "exact_cc": self.exact_cc,
            "fallbacks": self.fallbacks,
            "split_invariant_ok": self.split_invariant_ok,
        }


def complexity(f: SignMatrix, tree: ProtocolTree, balanced: ProtocolTree,
               with_exact: bool | None = None) -> ComplexityReport:
    """Depths, leaf counts and the measured cost expression.

    Phase i collects nodes whose rank lies in (r/2^(i+1), r/2^i]; its cost
    is the largest log2(|domain| / |rectangle|) seen there.
    """
    r = rank_exact(f)
    n_phases = math.ceil(math.log2(r)) + 1 if r >= 1 else 0
    phase_costs = [0.0] * n_phases
    for entry in tree.log:
        if "rank" not in entry or r == 0:
            continue
        i = 0
        while i + 1 < n_phases and entry["rank"] * 2 ** (i + 1) <= r:
            i += 1
        phase_costs[i] = max(phase_costs[i], entry["cost"])
    log_r = math.log2(r) if r >= 1 else 0.0
    nw = NW_K * log_r ** 2 + NW_K * sum(phase_costs)
    if with_exact is None:
        with_exact = f.n_rows <= EXACT_CC_CAP and f.n_cols <= EXACT_CC_CAP
    return ComplexityReport(
        depth=tree.depth,
        leaves=tree.leaves,
        balanced_depth=balanced.depth,
        rank=r,
        nw_bound=nw,
        phase_costs=phase_costs,
        balance_bound=balance_bound(tree.leaves),
        target=target_bound(r),
        exact_cc=exact_cc(f) if with_exact else None,
        fallbacks=sum(1 for e in tree.log if e.get("fallback")),
        split_invariant_ok=all(e.get("split_ok", True) for e in tree.log),
    )
