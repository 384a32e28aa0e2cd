"""Deterministic matrix corpora: the fixed test corpus and on-disk corpora."""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

import numpy as np

from .matrix import (
    IntMatrix,
    MatrixError,
    Rectangle,
    SignMatrix,
    gen_inner_product,
    gen_random_low_rank,
    gen_rigidity_example,
    rank_exact,
)

__all__ = ["hand_fixtures", "sign_corpus", "write_corpus", "load_manifest", "load_any",
           "planted_mono_cases"]


def hand_fixtures() -> list[tuple[str, SignMatrix]]:
    eye4 = np.where(np.eye(4, dtype=bool), 1, -1)
    greater = np.where(np.arange(5)[:, None] >= np.arange(5)[None, :], 1, -1)
    one_minus = np.ones((4, 4), dtype=int)
    one_minus[2, 3] = -1
    checker = np.where((np.arange(6)[:, None] + np.arange(6)[None, :]) % 2 == 0, 1, -1)
    return [
        ("const_plus_3x3", SignMatrix(np.ones((3, 3), dtype=int))),
        ("const_minus_2x5", SignMatrix(-np.ones((2, 5), dtype=int))),
        ("single_cell", SignMatrix([[1]])),
        ("identity_pattern_3x3", SignMatrix(np.where(np.eye(3, dtype=bool), 1, -1))),
        ("equality_4x4", SignMatrix(eye4)),
        ("greater_equal_5x5", SignMatrix(greater)),
        ("one_minority_4x4", SignMatrix(one_minus)),
        ("checkerboard_6x6", SignMatrix(checker)),
        ("duplicated_rows_6x4", SignMatrix(np.repeat(gen_inner_product(2).entries[:3], 2, axis=0))),
    ]


def sign_corpus(seed: int = 0) -> list[tuple[str, SignMatrix]]:
    """The fixed corpus: dims <= 12 x 12, ranks 1 to 8."""
    out = [(f"inner_product_{k}", gen_inner_product(k)) for k in (1, 2, 3)]
    out += hand_fixtures()
    shapes = [(4, 4), (5, 6), (6, 6), (7, 5), (8, 8), (9, 7), (10, 10), (12, 9), (11, 12), (12, 12)]
    k = 0
    for mode in ("pattern", "bool-product"):
        for r in range(1, 9):
            for t in range(3 if mode == "pattern" else 2):
                n, m = shapes[(3 * r + 5 * t + (mode == "bool-product")) % len(shapes)]
                if r > min(n, m):
                    n, m = 12, 12
                s = seed * 1000 + k
                k += 1
                out.append((f"{mode}_{n}x{m}_r{r}_s{s}", gen_random_low_rank(n, m, r, s, mode=mode)))
    return out


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


def write_corpus(out_dir: str | Path, seed: int = 0, ip_max: int = 4,
                 low_rank: list[tuple[int, int, int]] | None = None,
                 rigidity: list[tuple[int, int]] | None = None) -> dict:
    """Write matrices and a manifest; identical arguments give identical bytes."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if low_rank is None:
        low_rank = [(n, n, r) for n in (6, 8, 12) for r in (1, 2, 4, 6) if r <= n]
    if rigidity is None:
        rigidity = [(8, 2), (10, 2), (16, 2)]
    entries = []

    def add(name: str, M, kind: str, extra: dict) -> None:
        fname = f"{name}.json"
        _write(out / fname, json.dumps(M.to_json(), sort_keys=True) + "\n")
        entries.append({"file": fname, "kind": kind, "rows": M.n_rows, "cols": M.n_cols,
                        "rank": rank_exact(M), **extra})

    for k in range(1, ip_max + 1):
        add(f"inner_product_{k}", gen_inner_product(k), "sign", {"generator": "inner_product", "k": k})
    for idx, (n, m, r) in enumerate(low_rank):
        for mode in ("pattern", "bool-product"):
            s = seed * 1000 + idx
            try:
                M = gen_random_low_rank(n, m, r, s, mode=mode)
            except MatrixError:
                continue
            add(f"low_rank_{mode}_{n}x{m}_r{r}_s{s}", M, "sign",
                {"generator": "random_low_rank", "mode": mode, "target_rank": r, "seed": s})
    for r, w in rigidity:
        add(f"rigidity_r{r}_w{w}", gen_rigidity_example(r, w), "int",
            {"generator": "rigidity_example", "r": r, "w": w})
    manifest = {"seed": seed, "files": entries}
    _write(out / "manifest.json", json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    return manifest


def load_manifest(corpus_dir: str | Path) -> dict:
    return json.loads((Path(corpus_dir) / "manifest.json").read_text(encoding="utf-8"))


def load_any(path: str | Path) -> SignMatrix | IntMatrix:
    """Read a sign or integer matrix from JSON or text."""
    from .matrix import ParseError, load_int_matrix, load_matrix, matrix_from_json

    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        return matrix_from_json(text)
    try:
        return load_matrix(text)
    except ParseError as sign_error:
        try:
            return load_int_matrix(text)
        except ParseError:
            raise sign_error from None


def planted_mono_cases(count: int, seed: int = 0, max_dim: int = 12) -> list[tuple[SignMatrix, Rectangle, int]]:
    """Nearly monochromatic rectangles with planted minority entries.

    Each case is (f, R, r) with the average of f on R at least 1 - 1/(2r),
    where r is the rank of f restricted to R. The majority block may carry a
    small planted sub-rectangle of the other color as well as single cells.
    """
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        n, m = (int(x) for x in rng.integers(2, max_dim + 1, size=2))
        color = int(rng.choice([1, -1]))
        a = np.full((n, m), color, dtype=int)
        if rng.random() < 0.5:
            h, w = int(rng.integers(1, 3)), int(rng.integers(1, 3))
            a[np.ix_(rng.choice(n, min(h, n), replace=False), rng.choice(m, min(w, m), replace=False))] = -color
        for _ in range(int(rng.integers(0, 4))):
            a[int(rng.integers(n)), int(rng.integers(m))] = -color
        # embed R into a larger random matrix
        pad_r, pad_c = int(rng.integers(0, 3)), int(rng.integers(0, 3))
        full = np.where(rng.random((n + pad_r, m + pad_c)) < 0.5, 1, -1)
        rows = np.sort(rng.choice(n + pad_r, n, replace=False))
        cols = np.sort(rng.choice(m + pad_c, m, replace=False))
        full[np.ix_(rows, cols)] = a
        f = SignMatrix(full)
        R = Rectangle(rows.tolist(), cols.tolist())
        r = max(rank_exact(SignMatrix(a)), 1)
        if abs(Fraction(int(a.sum()), n * m)) >= 1 - Fraction(1, 2 * r):
            out.append((f, R, r))
    return out
