"""Seeded corpora and the labelled property checks run by ``bcl check``.

Each check evaluates one identity or theorem on every triple of a corpus
and keeps the worst residual. Exceptions raised while evaluating a triple
count as failures for the rows that depend on that computation, so a
corrupted input shows up in the table instead of aborting the run.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import analysis as A
from .errors import BclError
from .model import (
    BclTriple,
    StructuredPair,
    build_pair,
    conjugate_triple,
    direct_sum,
    flip_twist,
    haar_unitary,
    random_triple,
)
from .numcore import Frame, orthonormalize_columns
from .oracle import (
    DEFAULT_BUDGET,
    DEFAULT_NNZ_BUDGET,
    compare,
    invariance_leak,
    nnz_estimate,
    oracle_defect,
    residuals,
    truncate,
)

LABELS = ("REP", "WWW", "L3", "H5", "H6", "TT", "EEE", "AAA", "K7", "KK7", "K8", "W4", "U1", "CRR", "K5", "RemarkK3", "RED", "STAB")

TOL_REP = 1e-9
TOL_WWW = 1e-9
TOL_L3 = 1e-8
TOL_H5 = 1e-7
TOL_TT_EIG = 1e-9
TOL_TT_NORM = 1e-8
TOL_K = 1e-9
TOL_K5 = 1e-7
TOL_CRR = 1e-7
TOL_LEAK = 1e-9
TOL_STAB = 1e-10
TOL_CMP = 1e-8
SUITE_NNZ_BUDGET = 400_000


# ---------------------------------------------------------------------------
# corpora
# ---------------------------------------------------------------------------


def phase_flip_twist(d1: int, d2: int, rng: np.random.Generator) -> np.ndarray:
    """Flip followed by random diagonal phases: a sparse unitary twist."""
    phases = np.exp(2j * np.pi * rng.random(d1 * d2))
    return phases[:, None] * flip_twist(d1, d2)


def scalar_shapes() -> list[tuple[int, int]]:
    return [(m, p) for m in range(1, 7) for p in range(m + 1)]


def default_corpus(size: int = 200, seed: int = 0) -> list[BclTriple]:
    """Scalar triples over all ``(m, p)`` with ``m <= 6``, plus ``(2,2,3,1)`` and ``(1,2,4,4)``.

    Fifteen percent of the seeds go to each non-scalar shape. Half the
    scalar triples and half the ``(2,2,3,1)`` triples get a random twist;
    the rest keep the flip.
    """
    shapes = scalar_shapes()
    out = []
    n_big = max(1, round(0.075 * size)) if size >= 4 else 0
    for k in range(size):
        s = seed + k
        rng = np.random.default_rng([s, 17])
        if k < n_big:
            tw = phase_flip_twist(2, 2, rng) if k % 2 else None
            t = random_triple(2, 2, 3, 1, seed=s, twist=tw)
        elif k < 2 * n_big:
            t = random_triple(1, 2, 4, 4, seed=s)
        else:
            m, p = shapes[(k - 2 * n_big) % len(shapes)]
            t = random_triple(1, 1, m, p, seed=s, twist="random" if k % 2 else None)
        out.append(t)
    return out


DC_SHAPES = [(1, 1, 2, 1), (1, 1, 3, 1), (1, 1, 4, 2), (1, 1, 5, 3), (1, 2, 3, 3), (1, 2, 4, 4), (1, 3, 2, 2), (2, 1, 3, 0), (3, 1, 2, 0)]
GENERIC_SHAPES = [(1, 1, 3, 1), (1, 1, 4, 2), (1, 1, 5, 2), (2, 2, 3, 1), (2, 2, 6, 2), (2, 3, 5, 2), (3, 2, 5, 1), (1, 2, 3, 3)]


def doubly_commuting_corpus(size: int = 50, seed: int = 1000) -> list[BclTriple]:
    """Triples with ``L = PW``, so ``U(E2 (x) W1)`` stays inside ``W1``."""
    out = []
    for k in range(size):
        d1, d2, m, p = DC_SHAPES[k % len(DC_SHAPES)]
        out.append(random_triple(d1, d2, m, p, seed=seed + k, twist="random" if k % 3 == 0 else None, doubly_commuting=True))
    return out


def generic_corpus(size: int = 50, seed: int = 2000) -> list[BclTriple]:
    out = []
    for k in range(size):
        d1, d2, m, p = GENERIC_SHAPES[k % len(GENERIC_SHAPES)]
        out.append(random_triple(d1, d2, m, p, seed=seed + k, twist="random" if k % 2 else None))
    return out


def reducing_cases(count: int = 20, seed: int = 3000) -> list[tuple[BclTriple, Frame, bool]]:
    """``count`` reducing subspaces and ``count`` generic ones.

    The reducing ones are the first summand of a direct sum, moved by a
    random unitary of ``W``. The generic ones are random frames of the same
    dimension in the same triple.
    """
    out = []
    for k in range(count):
        rng = np.random.default_rng([seed, k])
        ma, mb = 1 + k % 3, 1 + (k // 3) % 3
        ta = random_triple(1, 1, ma, int(rng.integers(0, ma + 1)), seed=seed + 2 * k, twist=np.exp(0.4j))
        tb = random_triple(1, 1, mb, int(rng.integers(0, mb + 1)), seed=seed + 2 * k + 1, twist=np.exp(0.4j))
        s = direct_sum(ta, tb)
        y = haar_unitary(s.m, rng)
        c = conjugate_triple(s, y)
        out.append((c, Frame(y[:, :ma]), True))
        g = orthonormalize_columns(rng.normal(size=(s.m, ma)) + 1j * rng.normal(size=(s.m, ma)))
        out.append((c, g, False))
    return out


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------


@dataclass
class CheckResult:
    label: str
    passed: bool = True
    worst: float = 0.0
    count: int = 0
    failures: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def record(self, name: str, value: float, tol: float):
        self.count += 1
        value = float(value)
        if not np.isfinite(value) or value > tol:
            self.passed = False
            self.failures.append(f"{name}: {value:.3e} > {tol:.0e}")
        if np.isfinite(value):
            self.worst = max(self.worst, value)

    def flag(self, name: str, ok: bool, detail: str = ""):
        self.count += 1
        if not ok:
            self.passed = False
            self.failures.append(f"{name}: {detail}" if detail else name)

    def error(self, name: str, exc: Exception):
        self.count += 1
        self.passed = False
        self.failures.append(f"{name}: {type(exc).__name__}: {exc}")


@dataclass
class SuiteResult:
    rows: dict
    depth: int
    n_triples: int
    seconds: float

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows.values())


def _name(t: BclTriple, k: int) -> str:
    tag = t.name or f"seed{t.seed}"
    return f"#{k} {tag} ({t.d1},{t.d2},{t.m},{t.p})"


def _guard(rows: dict, labels: Iterable[str], name: str, fn: Callable):
    try:
        return fn()
    except (BclError, np.linalg.LinAlgError) as exc:
        for lab in labels:
            rows[lab].error(name, exc)
        return None


# ---------------------------------------------------------------------------
# per-triple checks
# ---------------------------------------------------------------------------


def fit_depth(pair: StructuredPair, depth: int, floor: int = 3, nnz_budget: int = SUITE_NNZ_BUDGET) -> int | None:
    """Largest depth ``<= depth`` inside the oracle budgets.

    The suite uses a smaller entry budget than :func:`truncate` so that a
    dense twist costs a lower depth instead of minutes of sparse products.
    Depths below ``floor`` are only tried against the hard limits of
    :func:`truncate`; ``None`` means not even ``min(depth, floor)`` fits.
    """

    def fits(d, budget):
        size = pair.m * sum((pair.d1 * pair.d2) ** n for n in range(d + 1))
        return size <= DEFAULT_BUDGET and nnz_estimate(pair, d) <= budget

    for d in range(depth, floor - 1, -1):
        if fits(d, nnz_budget):
            return d
    low = min(depth, floor)
    return low if fits(low, DEFAULT_NNZ_BUDGET) else None


def check_triple(t: BclTriple, rows: dict, name: str, depth: int, pair: StructuredPair | None = None, defects: list | None = None):
    """Evaluate every per-triple row on one triple."""
    if pair is None:
        pair = _guard(rows, ("REP",), name, lambda: build_pair(t))
        if pair is None:
            return
    depth_used = fit_depth(pair, depth)
    if depth_used is None:
        rows["REP"].warnings.append(f"{name}: oracle rows skipped, no depth >= 3 fits the budget")
        trunc = None
    else:
        if depth_used < depth:
            rows["REP"].warnings.append(f"{name}: depth lowered to {depth_used} to stay within the oracle budget")
        trunc = _guard(rows, ("REP", "L3", "AAA"), name, lambda: truncate(pair, depth_used))
    if trunc is not None:
        r = residuals(trunc, TOL_REP)
        for key in ("commute_12", "commute_21", "iso_v1", "iso_v2", "iso_v", "product_shift", "wandering"):
            rows["REP"].record(f"{name} {key}", r[key], TOL_REP)
        if r["reduced_coverage"]:
            rows["REP"].warnings.append(f"{name}: depth {depth} leaves only degree <= {depth - 1} as interior")

    for k, v in A.wandering_residuals(pair).items():
        rows["WWW"].record(f"{name} {k}", v, TOL_WWW)

    c = A.defect_operator(pair)
    rows["L3"].record(f"{name} alt", np.linalg.norm(c - A.defect_operator_alt(pair)), TOL_L3)
    if trunc is not None:
        if trunc.N >= 3:
            rows["L3"].record(f"{name} oracle", np.linalg.norm(c - oracle_defect(trunc)), TOL_L3)
        else:
            rows["L3"].warnings.append(f"{name}: oracle defect needs depth >= 3")

    rep = _guard(rows, ("H5",), name, lambda: A.defect_report(c, pair=pair))
    if rep is not None:
        rows["H5"].record(f"{name} E1", rep.h5["e1_distance"], TOL_H5)
        rows["H5"].record(f"{name} E-1", rep.h5["em1_distance"], TOL_H5)
        if defects is not None:
            defects.append((name, c, rep.signature))

    cls = _guard(rows, ("H6", "U1"), name, lambda: A.classify(pair, strict=False))
    if cls is not None:
        rows["H6"].flag(name, len(set(cls.condition_flags)) == 1, f"flags {cls.condition_flags}")
        rows["U1"].flag(
            name,
            len(set(cls.u1_flags)) == 1 and len(set(cls.neg_flags)) == 1 and cls.consistent,
            f"zero defect {cls.u1_flags}, negative defect {cls.neg_flags}",
        )

    w = np.linalg.eigvalsh(c) if c.size else np.zeros(1)
    cn = float(np.linalg.norm(c))
    rows["TT"].flag(name, not (w.max() <= TOL_TT_EIG and cn > TOL_TT_NORM), f"max eig {w.max():.3e}, |C| {cn:.3e}")

    rec = _guard(rows, ("EEE",), name, lambda: A.fredholm_record(pair, c))
    if rec is not None:
        rows["EEE"].flag(name, rec.ker_f2 - rec.coker_f2 == rec.dim_em1 - rec.dim_e1)
        if t.d1 == t.d2 == 1:
            rows["EEE"].flag(f"{name} scalar index", rec.index == 0, f"index {rec.index}")
    if trunc is not None and trunc.N >= 3:
        cmp = _guard(rows, ("AAA",), name, lambda: compare(pair, trunc, TOL_CMP))
        if cmp is not None:
            rows["AAA"].flag(name, cmp["index_fringe"] == cmp["index_oracle"], f"{cmp['index_fringe']} vs {cmp['index_oracle']}")
            rows["AAA"].record(f"{name} oracle deviation", cmp["max_deviation"], TOL_CMP)

    for i in (1, 2):
        rows["K7"].record(f"{name} i={i}", A.k7_residual(pair, i), TOL_K)
        rows["KK7"].record(f"{name} i={i}", A.kk7_residual(pair, i), TOL_K)
        rows["K8"].record(f"{name} i={i}", A.k8_residual(pair, i, c), TOL_K)
        for key, v in A.w4_residual(pair, i, c).items():
            rows["W4"].record(f"{name} j={i} {key}", v, TOL_K)

    k5 = A.k5_residual(pair)
    for key, v in k5.items():
        rows["K5"].record(f"{name} {key}", v, TOL_K5)
    for key, v in A.remark_k3_residual(pair).items():
        rows["RemarkK3"].record(f"{name} {key}", v, TOL_K)

    if trunc is None:
        return
    if trunc.N - 1 >= 3:
        lower = _guard(rows, ("STAB",), name, lambda: truncate(pair, trunc.N - 1))
        if lower is not None:
            rows["STAB"].record(name, np.linalg.norm(oracle_defect(lower) - oracle_defect(trunc)), TOL_STAB)
    else:
        rows["STAB"].warnings.append(f"{name}: depth {trunc.N} leaves no depth >= 3 to compare against")


def check_congruence(defects: list, rows: dict, pairs: int = 50):
    """Witness residuals for matching signatures and ``None`` for mismatched ones."""
    same, diff = 0, 0
    for (na, ca, sa), (nb, cb, sb) in itertools.combinations(defects, 2):
        if ca.shape != cb.shape:
            continue
        if sa == sb and same < pairs:
            x = A.congruence_witness(ca, cb)
            if x is None:
                rows["CRR"].flag(f"{na} ~ {nb}", False, "no witness for equal signatures")
            else:
                rows["CRR"].record(f"{na} ~ {nb}", np.linalg.norm(x @ ca @ x.conj().T - cb), TOL_CRR)
            same += 1
        elif sa != sb and diff < pairs:
            rows["CRR"].flag(f"{na} !~ {nb}", A.congruence_witness(ca, cb) is None, "witness for different signatures")
            diff += 1
        if same >= pairs and diff >= pairs:
            break
    if same == 0:
        rows["CRR"].warnings.append("no pair of defects with equal signatures")


def check_reducing(rows: dict, depth: int, cases: list | None = None):
    """Triple test and oracle leak must agree on every case."""
    if cases is None:
        cases = reducing_cases()
    for k, (t, wp, expect) in enumerate(cases):
        name = f"case {k} ({'reducing' if expect else 'generic'}, m={t.m})"
        verdict = A.is_reducing_subspace(t, wp)
        leak = invariance_leak(truncate(build_pair(t), depth), wp)
        rows["RED"].flag(name, verdict == expect and (leak <= TOL_LEAK) == expect, f"triple test {verdict}, leak {leak:.3e}")


def run_suite(
    triples: list[BclTriple] | None = None,
    depth: int = 5,
    congruence: bool = True,
    reducing: bool = True,
) -> SuiteResult:
    """Run every labelled row over ``triples`` (the default corpus if omitted)."""
    start = time.perf_counter()
    if triples is None:
        triples = default_corpus()
    rows = {lab: CheckResult(lab) for lab in LABELS}
    defects: list = []
    for k, t in enumerate(triples):
        name = _name(t, k)
        try:
            check_triple(t, rows, name, depth, defects=defects)
        except (BclError, np.linalg.LinAlgError) as exc:
            rows["REP"].error(name, exc)
    if congruence:
        check_congruence(defects, rows)
    if reducing:
        check_reducing(rows, depth)
    return SuiteResult(rows, depth, len(triples), time.perf_counter() - start)


def format_table(res: SuiteResult, verbose: bool = False) -> str:
    lines = [f"{'label':<10} {'status':<6} {'checks':>7} {'worst':>20}"]
    for lab in LABELS:
        r = res.rows[lab]
        status = "pass" if r.passed else "FAIL"
        if r.count == 0:
            status = "skip"
        lines.append(f"{lab:<10} {status:<6} {r.count:>7} {r.worst:>20.12g}")
        shown = r.failures if verbose else r.failures[:3]
        for f in shown:
            lines.append(f"    {f}")
        if len(r.failures) > len(shown):
            lines.append(f"    ... {len(r.failures) - len(shown)} more")
        for w in r.warnings[:3]:
            lines.append(f"    warning: {w}")
        if len(r.warnings) > 3:
            lines.append(f"    ... {len(r.warnings) - 3} more warnings")
    lines.append(f"{res.n_triples} triples, depth {res.depth}, {res.seconds:.1f} s, {'all pass' if res.passed else 'FAILURES'}")
    return "\n".join(lines)


__all__ = [
    "LABELS",
    "CheckResult",
    "SuiteResult",
    "default_corpus",
    "doubly_commuting_corpus",
    "generic_corpus",
    "reducing_cases",
    "phase_flip_twist",
    "check_triple",
    "fit_depth",
    "check_congruence",
    "check_reducing",
    "run_suite",
    "format_table",
]
