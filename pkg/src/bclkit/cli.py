"""Command line front end: ``bcl analyze | random | named | check | reduce``.

Exit status is 0 when every assertion passes and 2 on input or validation
errors. A failed consistency check gives 3. The default tolerance can be
overridden with the ``BCL_TOL`` environment variable.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import os
import sys

import numpy as np

from . import __version__
from . import analysis as A
from .errors import BclError
from .model import build_pair, random_triple, t_id, t_rot, t_swap
from .numcore import singular_values
from .oracle import compare, invariance_leak, residuals, truncate
from .suite import default_corpus, fit_depth, format_table, run_suite
from .triplefile import dumps_triple, read_frame, read_triple

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_INCONSISTENT = 3
TOL_ENV = "BCL_TOL"
SIG = 12


def default_tol() -> float:
    raw = os.environ.get(TOL_ENV)
    if raw is None:
        return 1e-9
    try:
        val = float(raw)
    except ValueError:
        raise SystemExit(f"{TOL_ENV}={raw!r} is not a number") from None
    if not val > 0:
        raise SystemExit(f"{TOL_ENV} must be positive")
    return val


def _r(x: float) -> float:
    # 12 significant digits, no negative zero
    v = float(f"{float(x):.{SIG}g}")
    return 0.0 if v == 0.0 else v


def _clean(obj):
    """Round every float in a nested structure to 12 significant digits."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _r(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_r(obj.real), _r(obj.imag)]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


# ---------------------------------------------------------------------------
# report assembly
# ---------------------------------------------------------------------------


def _fringe_summary(f: np.ndarray, rank_tol: float) -> dict:
    s = singular_values(f) if f.size else np.zeros(0)
    rank = int(np.sum(s > rank_tol))
    return {
        "shape": list(f.shape),
        "rank": rank,
        "kernel": f.shape[1] - rank,
        "cokernel": f.shape[0] - rank,
        "singular_values": s,
    }


def analyze_triple(triple, depth: int = 5, tol: float = 1e-9, check: bool = True) -> tuple[dict, list]:
    """Full pipeline on a triple.

    Returns
    -------
    report : dict
        Sections in fixed order.
    failures : list of str
        Consistency assertions that failed; empty when all pass.
    """
    failures = []
    report: dict = {
        "triple": {
            "name": triple.name,
            "seed": triple.seed,
            "d1": triple.d1,
            "d2": triple.d2,
            "dim_w": triple.m,
            "p": triple.p,
            "validation": {k: v for k, v in triple.residuals.items() if k != "problems"},
            "problems": list(triple.residuals.get("problems", [])),
        }
    }
    if report["triple"]["problems"]:
        failures.append("triple failed validation (loaded unchecked)")
    pair = build_pair(triple, check=check)
    c = A.defect_operator(pair)
    try:
        rep = A.defect_report(c, tol=tol, pair=pair)
    except BclError as exc:
        failures.append(f"{type(exc).__name__}: {exc}")
        rep = A.defect_report(c, tol=tol, pair=pair, check_pairing=False)
    report["defect"] = {
        "eigenvalues": rep.eigenvalues,
        "dim_e1": rep.dim_e1,
        "dim_em1": rep.dim_em1,
        "paired": rep.paired,
        "signature": list(rep.signature),
        "trace": rep.trace,
        "h5": rep.h5,
        "matrix": c,
    }
    f1, f2 = A.fringe_operators(pair)
    report["fringe"] = {"F1": _fringe_summary(f1, A.FRINGE_RANK_TOL), "F2": _fringe_summary(f2, A.FRINGE_RANK_TOL)}
    try:
        idx = A.fredholm_record(pair, c)
        report["index"] = {"value": idx.index, "fringe": idx.ker_f2 - idx.coker_f2, "defect": idx.dim_em1 - idx.dim_e1}
    except BclError as exc:
        failures.append(f"{type(exc).__name__}: {exc}")
        report["index"] = {"value": None, "error": str(exc)}
    cls = A.classify(pair, strict=False)
    report["classification"] = {
        "doubly_commuting": cls.doubly_commuting,
        "defect_zero": cls.defect_zero,
        "defect_nonneg": cls.defect_nonneg,
        "defect_neg_projection": cls.defect_negdef_on_supp,
        "doubly_commuting_flags": list(cls.condition_flags),
        "zero_defect_flags": list(cls.u1_flags),
        "negative_defect_flags": list(cls.neg_flags),
        "consistent": cls.consistent,
        "tt_ok": cls.tt_ok,
    }
    if not cls.consistent:
        failures.append("classification flags disagree")
    ident = {}
    for i in (1, 2):
        ident[f"K7_{i}"] = A.k7_residual(pair, i)
        ident[f"KK7_{i}"] = A.kk7_residual(pair, i)
        ident[f"K8_{i}"] = A.k8_residual(pair, i, c)
        ident[f"W4_{i}"] = max(A.w4_residual(pair, i, c).values())
    ident.update({f"WWW_{k}": v for k, v in A.wandering_residuals(pair).items()})
    ident.update({f"K5_{k}": v for k, v in A.k5_residual(pair).items()})
    ident.update({f"RemarkK3_{k}": v for k, v in A.remark_k3_residual(pair).items()})
    report["identities"] = ident
    bad = [k for k, v in ident.items() if v > (1e-7 if k.startswith("K5") else max(tol, 1e-9))]
    if bad:
        failures.append(f"identity residuals above tolerance: {', '.join(bad)}")

    used = fit_depth(pair, depth, floor=min(depth, 3))
    oracle: dict = {"requested_depth": depth, "depth": used}
    if used is None:
        oracle["skipped"] = "no depth fits the oracle budget"
    else:
        trunc = truncate(pair, used)
        res = residuals(trunc, max(tol, 1e-9))
        oracle["residuals"] = res
        if not res["ok"]:
            failures.append("oracle residuals above tolerance")
        if used >= 3:
            cmp = compare(pair, trunc)
            oracle["deviation"] = cmp["deviation"]
            oracle["index_oracle"] = cmp["index_oracle"]
            oracle["max_deviation"] = cmp["max_deviation"]
            if not cmp["ok"]:
                failures.append("structural and oracle results differ")
        else:
            oracle["reduced_coverage"] = True
    report["oracle"] = oracle
    report["congruence_signature"] = list(A.congruence_signature(c, tol))
    report["status"] = {"ok": not failures, "failures": failures}
    return report, failures


def _flatten(prefix: str, obj, out: list):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(obj, list) and obj and any(isinstance(v, (list, dict)) for v in obj):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}[{i}]", v, out)
    else:
        out.append((prefix, obj))


def _fmt_value(v) -> str:
    if isinstance(v, list):
        return "[" + ", ".join(_fmt_value(x) for x in v) + "]"
    if isinstance(v, float):
        return f"{v:.{SIG}g}"
    if v is None:
        return "-"
    return str(v)


def render(report: dict, fmt: str) -> str:
    clean = _clean(report)
    if fmt == "json":
        return json.dumps(clean, indent=1) + "\n"
    rows: list = []
    _flatten("", clean, rows)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        for k, v in rows:
            w.writerow([k, _fmt_value(v)])
        return buf.getvalue()
    width = max(len(k) for k, _ in rows)
    return "".join(f"{k:<{width}}  {_fmt_value(v)}\n" for k, v in rows)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _err(msg: str) -> None:
    print(f"bcl: {msg}", file=sys.stderr)


def cmd_analyze(args) -> int:
    try:
        triple = read_triple(args.path, tol=args.tol, strict=not args.unchecked)
    except BclError as exc:
        _err(f"{type(exc).__name__}: {exc}")
        for e in getattr(exc, "errors", [])[1:]:
            _err(f"  also: {e}")
        return EXIT_INVALID
    try:
        report, failures = analyze_triple(triple, args.depth, args.tol, check=not args.unchecked)
    except BclError as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_INCONSISTENT
    sys.stdout.write(render(report, args.format))
    for f in failures:
        _err(f)
    return EXIT_INCONSISTENT if failures else EXIT_OK


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_random(args) -> int:
    try:
        t = random_triple(args.d1, args.d2, args.m, args.p, seed=args.seed, twist="random" if args.twist == "random" else None)
    except BclError as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_INVALID
    t = dataclasses.replace(t, name=args.name or f"random({args.d1},{args.d2},{args.m},{args.p})")
    _emit(dumps_triple(t), args.out)
    return EXIT_OK


def cmd_named(args) -> int:
    if args.which == "t_rot":
        t = t_rot(args.theta)
    else:
        t = {"t_id": t_id, "t_swap": t_swap}[args.which]()
    _emit(dumps_triple(t), args.out)
    return EXIT_OK


def cmd_check(args) -> int:
    triples = []
    try:
        for path in args.paths:
            t = read_triple(path, tol=args.tol, strict=not args.unchecked)
            if t.name is None:
                t = dataclasses.replace(t, name=os.path.basename(path))
            triples.append(t)
    except BclError as exc:
        _err(f"{path}: {type(exc).__name__}: {exc}")
        return EXIT_INVALID
    if args.corpus or not triples:
        triples = default_corpus(args.corpus or 200, seed=args.seed) + triples
    res = run_suite(triples, depth=args.depth, congruence=not args.no_extras, reducing=not args.no_extras)
    print(format_table(res, verbose=args.verbose))
    return EXIT_OK if res.passed else EXIT_INCONSISTENT


def cmd_reduce(args) -> int:
    try:
        triple = read_triple(args.path, tol=args.tol)
        wp = read_frame(args.subspace, m=triple.m)
    except BclError as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_INVALID
    r = A.reducing_residuals(triple, wp)
    verdict = A.is_reducing_subspace(triple, wp, tol=max(args.tol, 1e-9))
    pair = build_pair(triple)
    used = fit_depth(pair, args.depth, floor=min(args.depth, 2))
    leak = invariance_leak(truncate(pair, used), wp) if used is not None else float("nan")
    report = {
        "reducing": verdict,
        "dim_subspace": wp.k,
        "p_invariance": r["p_invariance"],
        "u_leak": r["u_leak"],
        "oracle_depth": used,
        "oracle_leak": leak,
    }
    sys.stdout.write(render(report, args.format))
    agree = used is None or (leak <= max(args.tol, 1e-9)) == verdict
    if not agree:
        _err("triple test and oracle leak disagree")
        return EXIT_INCONSISTENT
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    tol = default_tol()
    p = argparse.ArgumentParser(prog="bcl", description="Structure analysis of commuting isometric pairs built from triples.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="validate a triple file and report its invariants")
    a.add_argument("path")
    a.add_argument("--depth", type=int, default=5)
    a.add_argument("--tol", type=float, default=tol, help=f"tolerance (default {tol:g}, env {TOL_ENV})")
    a.add_argument("--format", choices=("text", "json", "csv"), default="text")
    a.add_argument("--unchecked", action="store_true", help="record validation problems instead of stopping")
    a.set_defaults(func=cmd_analyze)

    r = sub.add_parser("random", help="write a seeded random triple")
    r.add_argument("--d1", type=int, required=True)
    r.add_argument("--d2", type=int, required=True)
    r.add_argument("--m", type=int, required=True)
    r.add_argument("--p", type=int, required=True)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--twist", choices=("flip", "random"), default="flip")
    r.add_argument("--name")
    r.add_argument("--out")
    r.set_defaults(func=cmd_random)

    n = sub.add_parser("named", help="write one of the closed-form scalar triples")
    n.add_argument("which", choices=("t_id", "t_swap", "t_rot"))
    n.add_argument("--theta", type=float, default=np.pi / 4)
    n.add_argument("--out")
    n.set_defaults(func=cmd_named)

    c = sub.add_parser("check", help="run the labelled property suite")
    c.add_argument("paths", nargs="*")
    c.add_argument("--corpus", type=int, default=0, help="number of seeded corpus triples (200 when no paths)")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--depth", type=int, default=5)
    c.add_argument("--tol", type=float, default=tol)
    c.add_argument("--unchecked", action="store_true")
    c.add_argument("--no-extras", action="store_true", help="skip the congruence and reducing-subspace rows")
    c.add_argument("--verbose", action="store_true")
    c.set_defaults(func=cmd_check)

    d = sub.add_parser("reduce", help="test whether F(E) (x) W' reduces the pair")
    d.add_argument("path")
    d.add_argument("--subspace", required=True)
    d.add_argument("--depth", type=int, default=5)
    d.add_argument("--tol", type=float, default=tol)
    d.add_argument("--format", choices=("text", "json", "csv"), default="text")
    d.set_defaults(func=cmd_reduce)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "depth", 3) < 2:
        _err("--depth must be at least 2")
        return EXIT_INVALID
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
