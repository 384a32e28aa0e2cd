"""Command-line entry point: ``logrank <command> [options]``.

Exit codes: 0 success, 1 I/O or other error, 2 parse error, 3 failed
precondition, 4 cap exceeded, 5 no convergence, 6 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__, _kernels
from .amplification import AmplifyError, amplify
from .corpus import load_any, write_corpus
from .discrepancy import DEFAULT_MAX_ITERS, DEFAULT_TOL, check_rank_disc_bound, disc_game
from .lp import LPError
from .matrix import (
    CapError,
    EntryDistribution,
    IntMatrix,
    MatrixError,
    ParseError,
    Rectangle,
    SignMatrix,
    dedupe,
    rank_exact,
)
from .monochromatic import PreconditionError, brute_force_max_mono, extract_mono
from .protocol import (
    PipelineFinder,
    ProtocolError,
    ProtocolTree,
    balance,
    complexity,
    make_finder,
    nw_build,
    run,
    target_bound,
    verify,
)
from .rigidity import RigidityDecomposition, conjecture_check, verify_rigidity_decomposition, zero_rectangle

log = logging.getLogger("logrank")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARSE = 2
EXIT_PRECONDITION = 3
EXIT_CAP = 4
EXIT_CONVERGENCE = 5
EXIT_VERIFY = 6


class CommandFailure(Exception):
    """A failure with an exit code and an optional partial report."""

    def __init__(self, message: str, code: int, report: dict | None = None):
        super().__init__(message)
        self.code = code
        self.report = report


# ---------------------------------------------------------------- serialization

def normalize(obj):
    """JSON-ready copy: rationals as "p/q", floats to 12 significant digits."""
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        if math.isnan(obj) or math.isinf(obj):
            return str(obj)
        return float(f"{obj:.12g}")
    if isinstance(obj, dict):
        return {str(k): normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [normalize(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalars
        return normalize(obj.item())
    if hasattr(obj, "to_json"):
        return normalize(obj.to_json())
    return str(obj)


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, list):
            out[key] = json.dumps(v)
        else:
            out[key] = v
    return out


def to_csv(rows: list[dict]) -> str:
    flat = [_flatten(r) for r in rows]
    columns: list[str] = []
    for r in flat:
        for k in r:
            if k not in columns:
                columns.append(k)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for r in flat:
        writer.writerow(r)
    return buf.getvalue()


def emit(report, args) -> None:
    data = normalize(report)
    if getattr(args, "format", "json") == "csv":
        rows = data if isinstance(data, list) else [data]
        text = to_csv(rows)
    else:
        text = json.dumps(data, indent=1, sort_keys=False) + "\n"
    out = getattr(args, "out", None)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- inputs

def _load(path: str):
    if path == "-":
        import tempfile

        with tempfile.NamedTemporaryFile("w", suffix=".txt", delete=False) as fh:
            fh.write(sys.stdin.read())
            path = fh.name
    try:
        return load_any(path)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed matrix file: {exc}") from None


def _sign(path: str) -> SignMatrix:
    M = _load(path)
    if isinstance(M, IntMatrix):
        if all(v in (1, -1) for row in M.rows for v in row):
            return SignMatrix([[int(v) for v in row] for row in M.rows])
        raise ParseError("expected a sign matrix with entries +1/-1")
    return M


def _int(path: str) -> IntMatrix:
    M = _load(path)
    return IntMatrix.from_sign(M) if isinstance(M, SignMatrix) else M


def _fraction(text: str | None) -> Fraction | None:
    if text is None:
        return None
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"not a number: {text!r}") from None


def _rect(text: str | None, shape: tuple[int, int]) -> Rectangle:
    """``rows;cols`` with comma separated indices, or a JSON object."""
    if text is None:
        return Rectangle.full(*shape)
    try:
        if text.strip().startswith("{"):
            return Rectangle.from_json(json.loads(text))
        rows, cols = text.split(";")
        return Rectangle([int(v) for v in rows.split(",") if v.strip()],
                         [int(v) for v in cols.split(",") if v.strip()])
    except (ValueError, KeyError, json.JSONDecodeError):
        raise ParseError(f"bad rectangle {text!r}; expected 'r0,r1;c0,c1'") from None


def _tree(path: str) -> ProtocolTree:
    try:
        return ProtocolTree.from_json(json.loads(Path(path).read_text(encoding="utf-8")))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed protocol tree: {exc}") from None


# ---------------------------------------------------------------- commands

def cmd_rank(args) -> int:
    M = _load(args.input)
    fd_shape = dedupe(M)[0].shape if isinstance(M, SignMatrix) else None
    emit({"command": "rank", "rows": M.n_rows, "cols": M.n_cols, "rank": rank_exact(M),
          "deduped_shape": fd_shape}, args)
    return EXIT_OK


def cmd_disc(args) -> int:
    f = _sign(args.input)
    cert = disc_game(f, tol=args.tol, max_iters=args.max_iters)
    report = check_rank_disc_bound(f, tol=args.tol, max_iters=args.max_iters, certificate=cert)
    out = {"command": "disc", "certificate": cert.to_json(), "rank_bound": report}
    emit(out, args)
    return EXIT_OK if cert.converged else EXIT_CONVERGENCE


def cmd_amplify(args) -> int:
    f = _sign(args.input)
    cert = disc_game(f, tol=args.tol, max_iters=args.max_iters)
    r = rank_exact(f)
    eps = _fraction(args.eps) if args.eps else Fraction(1, 2 * r)
    mu = cert.argmin_mu if args.mu == "argmin" else EntryDistribution.uniform(*f.shape)
    try:
        res = amplify(f, mu, eps, seed=args.seed, max_trials=args.max_trials,
                      delta_lb=cert.lower, tol=args.tol)
    except AmplifyError as exc:
        raise CommandFailure(str(exc), EXIT_CONVERGENCE,
                             {"command": "amplify", "seed": args.seed, "eps": eps,
                              "separation": exc.stats.to_json() if exc.stats else None}) from None
    out = {"command": "amplify", "seed": args.seed, "mu": args.mu, "rank": r,
           "delta": [cert.lower, cert.upper], "result": res.to_json(),
           "predicates_ok": res.satisfies_predicates(), "size_floor_ok": res.meets_size_floor(),
           "separation": res.stats.to_json() if res.stats else None}
    emit(out, args)
    return EXIT_OK


def cmd_mono(args) -> int:
    f = _sign(args.input)
    if args.mono_cmd == "extract":
        R = _rect(args.rect, f.shape)
        ext = extract_mono(f, R, args.r)
        emit({"command": "mono extract", **ext.to_json()}, args)
    else:
        rect, color = brute_force_max_mono(f)
        emit({"command": "mono brute", "rect": rect.to_json(), "color": color, "area": rect.area}, args)
    return EXIT_OK


def _finder(args):
    if args.finder == "pipeline":
        return PipelineFinder(seed=args.seed, max_trials=args.max_trials,
                              fallback=None if args.no_fallback else "heuristic")
    return make_finder(args.finder)


def cmd_protocol(args) -> int:
    sub = args.protocol_cmd
    if sub == "build":
        f = _sign(args.input)
        tree = nw_build(f, _finder(args), seed=args.seed)
        emit({"command": "protocol build", "seed": args.seed, "finder": args.finder,
              "depth": tree.depth, "leaves": tree.leaves, **tree.to_json()}, args)
        return EXIT_OK
    tree = _tree(args.tree)
    if sub == "balance":
        b = balance(tree)
        emit({"command": "protocol balance", "depth": b.depth, "leaves": b.leaves,
              "original_depth": tree.depth, **b.to_json()}, args)
        return EXIT_OK
    if sub == "run":
        value, bits = run(tree, args.x, args.y)
        emit({"command": "protocol run", "x": args.x, "y": args.y, "value": value,
              "transcript": bits, "bits": len(bits)}, args)
        return EXIT_OK
    f = _sign(args.input)
    rep = verify(f, tree)
    if sub == "verify":
        emit({"command": "protocol verify", **rep}, args)
    else:
        b = balance(tree)
        comp = complexity(f, tree, b)
        emit({"command": "protocol report", "verify": rep, "complexity": comp.to_json()}, args)
    return EXIT_OK if rep["passed"] else EXIT_VERIFY


def cmd_rigidity(args) -> int:
    sub = args.rigidity_cmd
    if sub == "verify-decomp":
        try:
            obj = json.loads(Path(args.input).read_text(encoding="utf-8"))
            dec = RigidityDecomposition.from_json(obj)
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ParseError(f"malformed decomposition: {exc}") from None
        emit({"command": "rigidity verify-decomp", **verify_rigidity_decomposition(dec, args.r, args.mode)}, args)
        return EXIT_OK
    M = _int(args.input)
    if sub == "zero-rect":
        rep = zero_rectangle(M, mode=args.mode, target=args.target)
        emit({"command": "rigidity zero-rect", **rep.to_json()}, args)
    else:
        emit({"command": "rigidity check", **conjecture_check(M, args.r, args.mode)}, args)
    return EXIT_OK


def prove(f: SignMatrix, seed: int = 0, eps: Fraction | None = None, tol: float = DEFAULT_TOL,
          max_iters: int = DEFAULT_MAX_ITERS, max_trials: int = 1000, fallback: bool = True) -> dict:
    """Run every stage on f and return the report; raises CommandFailure."""
    report: dict = {"command": "prove", "seed": seed, "rows": f.n_rows, "cols": f.n_cols}
    stage = "dedupe"
    try:
        fd, _, _ = dedupe(f)
        r = rank_exact(fd)
        report.update(deduped_shape=list(fd.shape), rank=r)
        report["eps"] = eps if eps is not None else Fraction(1, 2 * r)

        stage = "disc"
        cert = disc_game(fd, tol=tol, max_iters=max_iters)
        report["disc"] = {"lower": cert.lower, "upper": cert.upper, "converged": cert.converged,
                          "iterations": cert.iterations,
                          "rank_bound": 1 / (8 * math.sqrt(r)), "bound_ok": 64 * r * cert.upper ** 2 >= 1}

        stage = "protocol"
        finder = PipelineFinder(seed=seed, max_trials=max_trials, eps=eps,
                                fallback="heuristic" if fallback else None)
        finder.cache_certificate(fd, cert)
        tree = nw_build(f, finder, seed=seed)
        root = tree.log[0] if tree.log else {}
        report["amplify"] = {k: root[k] for k in ("eps", "eps_mass", "t", "trials", "amplified_fraction",
                                                   "amplified_avg", "size_floor_ok") if k in root}
        report["extract"] = {k: root[k] for k in ("mono_ratio", "markov_ok", "mono_area") if k in root}

        stage = "balance"
        balanced = balance(tree)

        stage = "verify"
        v_tree, v_bal = verify(f, tree), verify(f, balanced)
        report["verify"] = {"tree": v_tree["passed"], "balanced": v_bal["passed"],
                            "counterexample": v_tree["counterexample"] or v_bal["counterexample"]}

        stage = "complexity"
        comp = complexity(f, tree, balanced)
        report["complexity"] = comp.to_json()
        report["nodes"] = tree.log
        report["passed"] = v_tree["passed"] and v_bal["passed"]
    except CapError as exc:
        raise CommandFailure(f"stage {stage}: {exc}", EXIT_CAP, {**report, "failed_stage": stage}) from None
    except (PreconditionError, AmplifyError, LPError, ProtocolError) as exc:
        code = EXIT_CONVERGENCE if isinstance(exc, (AmplifyError, LPError)) else EXIT_PRECONDITION
        raise CommandFailure(f"stage {stage}: {exc}", code, {**report, "failed_stage": stage}) from None
    if not report["passed"]:
        raise CommandFailure("verification failed", EXIT_VERIFY, report)
    return report


def cmd_prove(args) -> int:
    f = _sign(args.input)
    eps = _fraction(args.eps) if args.eps else None
    report = prove(f, seed=args.seed, eps=eps, tol=args.tol, max_iters=args.max_iters,
                   max_trials=args.max_trials, fallback=not args.no_fallback)
    emit(report, args)
    return EXIT_OK


def cmd_corpus(args) -> int:
    manifest = write_corpus(args.out_dir, seed=args.seed, ip_max=args.ip_max)
    emit({"command": "corpus", "dir": str(args.out_dir), **manifest}, argparse.Namespace(format=args.format))
    return EXIT_OK


def _report_row(name: str, obj: dict) -> dict:
    row = {"name": name, "command": obj.get("command")}
    rank = obj.get("rank")
    disc = obj.get("disc") or (obj.get("certificate") and {"lower": obj["certificate"].get("lower"),
                                                           "upper": obj["certificate"].get("upper")})
    if disc:
        row["disc_lower"] = disc.get("lower")
        row["disc_upper"] = disc.get("upper")
        if rank:
            upper = float(Fraction(disc["upper"])) if isinstance(disc["upper"], str) else disc["upper"]
            row["disc_margin"] = upper - 1 / (8 * math.sqrt(rank))
    if "amplify" in obj and isinstance(obj["amplify"], dict):
        row["amplified_fraction"] = obj["amplify"].get("amplified_fraction")
        row["size_floor_ok"] = obj["amplify"].get("size_floor_ok")
    if "result" in obj:
        row["amplified_fraction"] = obj["result"].get("mu_mass")
        row["size_floor_ok"] = obj.get("size_floor_ok")
    if "extract" in obj:
        row["mono_ratio"] = obj["extract"].get("mono_ratio")
    if "size_ratio" in obj:
        row["mono_ratio"] = obj["size_ratio"]
    comp = obj.get("complexity")
    if comp:
        rank = comp.get("rank", rank)
        row["depth"] = comp.get("depth")
        row["balanced_depth"] = comp.get("balanced_depth")
        row["target"] = comp.get("target")
        row["within_target"] = comp.get("within_target")
        row["exact_cc"] = comp.get("exact_cc")
    if "bound_ratio" in obj:
        row["bound_ratio"] = obj["bound_ratio"]
        row["min_side"] = obj.get("min_side")
        row["sparsity"] = obj.get("sparsity_float")
    row["rank"] = rank
    if rank and "target" not in row and obj.get("command") == "prove":
        row["target"] = target_bound(rank)
    return row


def cmd_report(args) -> int:
    src = Path(args.input)
    if not src.is_dir():
        raise FileNotFoundError(f"no such directory: {src}")
    rows = []
    for path in sorted(src.glob("*.json")):
        if path.name == "manifest.json":
            continue
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path.name}: {exc}") from None
        if isinstance(obj, dict):
            rows.append(_report_row(path.stem, obj))
    if args.format == "csv":
        text = to_csv(normalize(rows)) if rows else ""
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
    else:
        emit(rows, args)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, default=DEFAULT_TOL)
    common.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERS)
    common.add_argument("--max-trials", type=int, default=1000)
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="logrank", description="Rank, discrepancy and protocol experiments on sign matrices.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({_kernels.BACKEND} kernels)")
    sp = p.add_subparsers(dest="command", required=True)

    def add(name, parent=sp, **kw):
        return parent.add_parser(name, parents=[common], **kw)

    q = add("rank", help="exact rank")
    q.add_argument("--input", required=True)
    q.set_defaults(func=cmd_rank)

    q = add("disc", help="certified discrepancy interval")
    q.add_argument("--input", required=True)
    q.set_defaults(func=cmd_disc)

    q = add("amplify", help="large nearly monochromatic rectangle")
    q.add_argument("--input", required=True)
    q.add_argument("--eps", help="target minority fraction (default 1/(2r))")
    q.add_argument("--mu", choices=("argmin", "uniform"), default="argmin")
    q.set_defaults(func=cmd_amplify)

    q = sp.add_parser("mono", help="monochromatic rectangles")
    msp = q.add_subparsers(dest="mono_cmd", required=True)
    e = add("extract", msp)
    e.add_argument("--input", required=True)
    e.add_argument("--rect", help="'r0,r1,...;c0,c1,...' (default: full matrix)")
    e.add_argument("--r", type=int)
    e.set_defaults(func=cmd_mono)
    e = add("brute", msp)
    e.add_argument("--input", required=True)
    e.set_defaults(func=cmd_mono)

    q = sp.add_parser("protocol", help="protocol trees")
    psp = q.add_subparsers(dest="protocol_cmd", required=True)
    e = add("build", psp)
    e.add_argument("--input", required=True)
    e.add_argument("--finder", choices=("pipeline", "brute", "heuristic"), default="pipeline")
    e.add_argument("--no-fallback", action="store_true")
    e.set_defaults(func=cmd_protocol)
    e = add("balance", psp)
    e.add_argument("--tree", required=True)
    e.set_defaults(func=cmd_protocol)
    e = add("run", psp)
    e.add_argument("--tree", required=True)
    e.add_argument("--x", type=int, required=True)
    e.add_argument("--y", type=int, required=True)
    e.set_defaults(func=cmd_protocol)
    for name in ("verify", "report"):
        e = add(name, psp)
        e.add_argument("--input", required=True)
        e.add_argument("--tree", required=True)
        e.set_defaults(func=cmd_protocol)

    q = sp.add_parser("rigidity", help="zero rectangles and rigidity decompositions")
    rsp = q.add_subparsers(dest="rigidity_cmd", required=True)
    e = add("zero-rect", rsp)
    e.add_argument("--input", required=True)
    e.add_argument("--mode", choices=("exact", "heuristic"), default="exact")
    e.add_argument("--target", choices=("max-min-side", "max-area"), default="max-min-side")
    e.set_defaults(func=cmd_rigidity)
    e = add("check", rsp)
    e.add_argument("--input", required=True)
    e.add_argument("--mode", choices=("exact", "heuristic"), default="exact")
    e.add_argument("--r", type=int)
    e.set_defaults(func=cmd_rigidity)
    e = add("verify-decomp", rsp)
    e.add_argument("--input", required=True, help="JSON with M, L, S")
    e.add_argument("--r", type=int, required=True)
    e.add_argument("--mode", choices=("exact", "heuristic"), default="exact")
    e.set_defaults(func=cmd_rigidity)

    q = add("prove", help="end-to-end protocol from rank")
    q.add_argument("--input", required=True)
    q.add_argument("--eps", help="override eps (default 1/(2r))")
    q.add_argument("--no-fallback", action="store_true")
    q.set_defaults(func=cmd_prove)

    q = add("corpus", help="write a deterministic corpus")
    q.add_argument("out_dir")
    q.add_argument("--ip-max", type=int, default=4)
    q.set_defaults(func=cmd_corpus)

    q = add("report", help="aggregate JSON run outputs into a table")
    q.add_argument("--input", required=True, help="directory of JSON reports")
    q.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CommandFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.report is not None:
            emit(exc.report, args)
        return exc.code
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except CapError as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except AmplifyError as exc:
        print(f"no convergence: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (PreconditionError, ProtocolError, MatrixError, IndexError, ValueError) as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
