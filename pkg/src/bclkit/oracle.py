"""Brute-force truncation of the pair to degrees ``0..N``.

The default ``"formula"`` route assembles sparse matrices straight from the
model formulas with Kronecker products and index permutations. In
particular the letter shuffle becomes ``t^{(x)n} (x) I`` between two
permutations, with no reuse of the tensor kernels in :mod:`bclkit.model`.
The ``"apply"`` route instead evaluates those kernels on every basis vector
and exists to cross-check the two.

All forward operators never lower the degree, so the truncated matrices are
exact compressions of the infinite ones. Identities that involve an adjoint
before a forward map hold only on the interior, degrees ``0..N-1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np
import scipy.sparse as sp

from .errors import BudgetExceeded, InvalidInput
from .model import StructuredPair, k_v1, k_v2
from .numcore import Frame, frame_from_projector, intersect, kernel, projector, subspace_distance

DEFAULT_DEPTH = 5
DEFAULT_BUDGET = 20000
DEFAULT_NNZ_BUDGET = 4_000_000


@dataclass(frozen=True)
class TruncatedRep:
    """Sparse matrices of ``V1``, ``V2`` and ``V`` on degrees ``0..N``.

    Attributes
    ----------
    N : int
    dims : list of int
        Fiber sizes per degree.
    offsets : list of int
        Start of each degree in the truncated space of dimension ``D``.
    v1, v2, v : scipy.sparse.csr_matrix
        Shapes ``(D, d1 D)``, ``(D, d2 D)`` and ``(D, d1 d2 D)``. Column
        blocks are letter-major: column ``c*D + k`` is ``e_c (x) basis_k``.
    """

    N: int
    shape: tuple[int, int, int]
    dims: list
    offsets: list
    v1: sp.csr_matrix
    v2: sp.csr_matrix
    v: sp.csr_matrix
    shift: sp.csr_matrix
    twist: np.ndarray
    method: str = "formula"
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def D(self) -> int:
        return self.offsets[-1]

    def degree_slice(self, n: int) -> slice:
        return slice(self.offsets[n], self.offsets[n + 1])

    def interior(self, letters: int = 1, max_degree: int | None = None) -> np.ndarray:
        """Column indices of ``E^letters (x)`` degrees ``0..max_degree`` (default ``N - 1``)."""
        top = self.N - 1 if max_degree is None else max_degree
        base = np.arange(self.offsets[top + 1]) if top >= 0 else np.zeros(0, dtype=int)
        return np.concatenate([c * self.D + base for c in range(letters)]) if letters else base


# ---------------------------------------------------------------------------
# sparse building blocks
# ---------------------------------------------------------------------------


def _perm(order_src_shape: tuple, order: list) -> sp.csr_matrix:
    """Permutation matrix sending C-order layout ``shape`` to the axis ``order``."""
    size = int(np.prod(order_src_shape)) if order_src_shape else 1
    src = np.arange(size).reshape(order_src_shape).transpose(order).ravel()
    return sp.csr_matrix((np.ones(size), (np.arange(size), src)), shape=(size, size))


def shuffle_matrix(n: int, twist: np.ndarray, d1: int, d2: int) -> sp.csr_matrix:
    """Sparse letter shuffle ``E2 (x) E^{(x)n} -> E^{(x)n} (x) E2`` in sorted coordinates.

    In the interleaved layout ``(c, a1, b1, ..., an, bn)`` the map is just
    ``t (x) ... (x) t (x) I_{d2}``; the sorted layouts differ by permutations.
    """
    t = sp.csr_matrix(np.asarray(twist, dtype=complex))
    if n == 0:
        return sp.identity(d2, dtype=complex, format="csr")
    core = reduce(lambda x, y: sp.kron(x, y, format="csr"), [t] * n + [sp.identity(d2, format="csr")])
    # sorted (c, a1..an, b1..bn) -> interleaved (c, a1, b1, ..., an, bn)
    order_in = [0]
    for k in range(n):
        order_in += [1 + k, 1 + n + k]
    p_in = _perm((d2,) + (d1,) * n + (d2,) * n, order_in)
    # interleaved (a1', b1', ..., an', bn', t) -> sorted (a1'..an', b1'..bn', t)
    order_out = [2 * k for k in range(n)] + [2 * k + 1 for k in range(n)] + [2 * n]
    p_out = _perm((d1, d2) * n + (d2,), order_out)
    return (p_out @ core @ p_in).tocsr()


def _append_perm(n: int, d1: int, d2: int, m: int) -> sp.csr_matrix:
    # (a1..an, b1..bn, a, b, j) -> (a1..an, a, b1..bn, b, j)
    order = list(range(n)) + [2 * n] + list(range(n, 2 * n)) + [2 * n + 1, 2 * n + 2]
    return _perm((d1,) * n + (d2,) * n + (d1, d2, m), order)


def _shift_perm(n: int, d1: int, d2: int, m: int) -> sp.csr_matrix:
    # (a, b, a1..an, b1..bn, j) -> (a, a1..an, b, b1..bn, j)
    order = [0] + list(range(2, n + 2)) + [1] + list(range(n + 2, 2 * n + 2)) + [2 * n + 2]
    return _perm((d1, d2) + (d1,) * n + (d2,) * n + (m,), order)


def _place(blocks: list, shape: tuple) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for r0, c_idx, b in blocks:
        b = sp.coo_matrix(b)
        rows.append(b.row + r0)
        cols.append(np.asarray(c_idx)[b.col])
        vals.append(b.data)
    if not rows:
        return sp.csr_matrix(shape, dtype=complex)
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape, dtype=complex
    )


def _shift_matrix(pair: StructuredPair, N: int, dims: list, offs: list) -> sp.csr_matrix:
    d1, d2, m = pair.d1, pair.d2, pair.m
    D = offs[-1]
    blocks = []
    for n in range(N):
        col_idx = np.concatenate([e * D + offs[n] + np.arange(dims[n]) for e in range(d1 * d2)])
        blocks.append((offs[n + 1], col_idx, _shift_perm(n, d1, d2, m)))
    return _place(blocks, (D, d1 * d2 * D))


def _formula(pair: StructuredPair, N: int, dims: list, offs: list):
    d1, d2, m = pair.d1, pair.d2, pair.m
    D = offs[-1]
    th0 = sp.csr_matrix(pair.theta2_deg0)
    th1 = sp.csr_matrix(pair.theta2_deg1)
    blocks = []
    for n in range(N + 1):
        xn = (d1 * d2) ** n
        mix = sp.kron(shuffle_matrix(n, pair.twist, d1, d2), sp.identity(m), format="csr")
        col_idx = np.concatenate([c * D + offs[n] + np.arange(dims[n]) for c in range(d2)])
        blocks.append((offs[n], col_idx, sp.kron(sp.identity(xn), th0, format="csr") @ mix))
        if n < N:
            up = _append_perm(n, d1, d2, m) @ sp.kron(sp.identity(xn), th1, format="csr") @ mix
            blocks.append((offs[n + 1], col_idx, up))
    v2 = _place(blocks, (D, d2 * D))

    shift = _shift_matrix(pair, N, dims, offs)
    v1 = shift @ sp.kron(sp.identity(d1), v2.conj().T, format="csr")
    if pair.p:
        base = pair.ul.conj().T @ np.kron(np.eye(d1), pair.w2_frame.columns.conj().T)
        col_idx = np.concatenate([a * D + np.arange(m) for a in range(d1)])
        v1 = v1 + _place([(0, col_idx, base)], (D, d1 * D))
    v1 = v1.tocsr()
    v1.eliminate_zeros()
    return v1, v2.tocsr(), shift


def _apply(pair: StructuredPair, N: int, dims: list, offs: list, chunk: int = 2048):
    d1, d2, m = pair.d1, pair.d2, pair.m
    D = offs[-1]

    def build(kernel_fn, letters: int):
        blocks = []
        for n in range(N + 1):
            total = letters * dims[n]
            for s in range(0, total, chunk):
                cols = np.arange(s, min(total, s + chunk))
                x = np.zeros((cols.size, letters, dims[n]), dtype=complex)
                x[np.arange(cols.size), cols // dims[n], cols % dims[n]] = 1.0
                out = kernel_fn(pair, {n: x})
                col_idx = (cols // dims[n]) * D + offs[n] + cols % dims[n]
                for k, arr in out.items():
                    if k <= N:
                        blocks.append((offs[k], col_idx, sp.csr_matrix(arr.T)))
        return _place(blocks, (D, letters * D))

    v2 = build(k_v2, d2)
    v1 = build(k_v1, d1)
    return v1, v2, _shift_matrix(pair, N, dims, offs)


def nnz_estimate(pair: StructuredPair, N: int) -> int:
    """Bound on the stored entries of the truncated ``V2``.

    A row of the degree ``n`` block draws on ``d2*m`` rows of the shuffle,
    each with ``(nnz(t)/dim E)^n`` entries, and never exceeds the dense width.
    """
    x = pair.d1 * pair.d2
    nt = int(np.count_nonzero(np.abs(np.asarray(pair.twist)) > 0))
    dm = pair.d2 * pair.m
    total = 0
    for n in range(N + 1):
        rows = x**n * pair.m * (1 + (x if n < N else 0))
        total += rows * min(dm * (nt / x) ** n, dm * x**n)
    return int(total)


def truncate(
    pair: StructuredPair,
    N: int = DEFAULT_DEPTH,
    method: str = "formula",
    budget: int = DEFAULT_BUDGET,
    nnz_budget: int = DEFAULT_NNZ_BUDGET,
) -> TruncatedRep:
    """Matrices of ``V1``, ``V2`` and ``V`` on degrees ``0..N``.

    Parameters
    ----------
    N : int
        Maximum degree, at least 2.
    method : {"formula", "apply"}
    budget : int
        Largest allowed truncated dimension ``D``.
    nnz_budget : int
        Largest allowed estimate of stored entries in ``V2``. A dense
        twist fills in ``t (x) ... (x) t``, so this bites before ``budget``.

    Raises
    ------
    BudgetExceeded
        If ``D`` or the entry estimate would exceed its budget.
    """
    if N < 2:
        raise InvalidInput("truncation depth must be at least 2")
    d1, d2, m = pair.d1, pair.d2, pair.m
    dims = [(d1 * d2) ** n * m for n in range(N + 1)]
    offs = [0] + list(np.cumsum(dims))
    offs = [int(o) for o in offs]
    if offs[-1] > budget:
        raise BudgetExceeded(f"truncated dimension {offs[-1]} exceeds budget {budget} at depth {N}")
    est = nnz_estimate(pair, N)
    if est > nnz_budget:
        raise BudgetExceeded(f"estimated {est} stored entries exceed budget {nnz_budget} at depth {N}")
    if method == "formula":
        if pair.shuffle != "interleaved":
            raise InvalidInput("the formula route models the interleaved shuffle only")
        v1, v2, shift = _formula(pair, N, dims, offs)
    elif method == "apply":
        v1, v2, shift = _apply(pair, N, dims, offs)
    else:
        raise InvalidInput(f"unknown method {method!r}")
    v = (v1 @ sp.kron(sp.identity(d1), v2, format="csr")).tocsr()
    return TruncatedRep(
        N=N,
        shape=(d1, d2, m),
        dims=dims,
        offsets=offs,
        v1=v1,
        v2=v2,
        v=v,
        shift=shift.tocsr(),
        twist=pair.twist,
        method=method,
    )


# ---------------------------------------------------------------------------
# derived quantities
# ---------------------------------------------------------------------------


def _block0(a: sp.spmatrix, m: int) -> sp.csr_matrix:
    return a.tocsr()[:m, :]


def range_projector_w(trunc: TruncatedRep, which: str) -> np.ndarray:
    """Degree 0 block of ``V V*`` for ``which`` in ``{"v1", "v2", "v"}``.

    Exact at any depth because a forward map sends degree ``n`` to degrees
    ``>= n``, so only degree 0 columns reach degree 0 rows.
    """
    m = trunc.shape[2]
    a = _block0(getattr(trunc, which), m)
    return (a @ a.conj().T).toarray()


def oracle_defect(trunc: TruncatedRep) -> np.ndarray:
    """``I - V1 V1* - V2 V2* + V V*`` on degree 0, the whole support of ``C``."""
    if trunc.N < 3:
        raise InvalidInput("oracle_defect needs depth N >= 3")
    m = trunc.shape[2]
    return (
        np.eye(m)
        - range_projector_w(trunc, "v1")
        - range_projector_w(trunc, "v2")
        + range_projector_w(trunc, "v")
    )


def oracle_frames(trunc: TruncatedRep) -> dict:
    """Subspaces of ``W`` read off the truncated matrices.

    ``W1 = W ∩ ker V1*`` and ``W2 = W ∩ ker V2*`` come from kernels of the
    degree 0 columns of the adjoints. The ranges ``W ∩ R(Vi)`` come from the
    degree 0 blocks of ``Vi Vi*``. ``E1`` and ``E-1`` are the H5 intersections.
    """
    m = trunc.shape[2]
    v1h = trunc.v1.conj().T.tocsc()[:, :m].toarray()
    v2h = trunc.v2.conj().T.tocsc()[:, :m].toarray()
    w1 = kernel(v1h, 1e-9) if np.any(v1h) else Frame.full(m)
    w2 = kernel(v2h, 1e-9) if np.any(v2h) else Frame.full(m)
    r1 = frame_from_projector(range_projector_w(trunc, "v1"))
    r2 = frame_from_projector(range_projector_w(trunc, "v2"))
    return {
        "w1": w1,
        "w2": w2,
        "range_v1": r1,
        "range_v2": r2,
        "e_plus": intersect(w1, w2),
        "e_minus": intersect(r1, r2),
    }


def _fro(a) -> float:
    if sp.issparse(a):
        return float(sp.linalg.norm(a)) if a.nnz else 0.0
    return float(np.linalg.norm(a))


def residuals(trunc: TruncatedRep, tol: float = 1e-9) -> dict:
    """Frobenius residuals of the defining identities.

    Returns
    -------
    dict
        ``commute_12``, ``commute_21`` (all columns), ``iso_v1``, ``iso_v2``,
        ``iso_v`` and ``wandering`` (interior), ``product_shift`` (all
        columns), ``reduced_coverage`` and ``ok``.
    """
    d1, d2, m = trunc.shape
    D = trunc.D
    t = sp.csr_matrix(trunc.twist)
    eye_d = sp.identity(D, format="csr")
    out = {}

    lhs = trunc.v  # V1 (I x V2) on E1 x E2 x H
    rhs = trunc.v2 @ sp.kron(sp.identity(d2), trunc.v1, format="csr") @ sp.kron(t.conj().T, eye_d, format="csr")
    out["commute_12"] = _fro(lhs - rhs)
    lhs2 = trunc.v2 @ sp.kron(sp.identity(d2), trunc.v1, format="csr")
    rhs2 = trunc.v @ sp.kron(t, eye_d, format="csr")
    out["commute_21"] = _fro(lhs2 - rhs2)

    for name, op, letters in (("iso_v1", trunc.v1, d1), ("iso_v2", trunc.v2, d2), ("iso_v", trunc.v, d1 * d2)):
        cols = trunc.interior(letters)
        a = op.tocsc()[:, cols]
        out[name] = _fro((a.conj().T @ a) - sp.identity(cols.size, format="csr"))

    out["product_shift"] = _fro(trunc.v - trunc.shift)

    vh = trunc.v.conj().T.tocsc()
    upper = np.arange(trunc.offsets[1], D)
    vv = trunc.v.tocsr()[upper, :] @ vh[:, upper]
    out["wandering"] = float(np.hypot(_fro(vh[:, :m]), _fro(vv - sp.identity(upper.size, format="csr"))))
    out["reduced_coverage"] = trunc.N <= 2
    out["ok"] = all(v <= tol for k, v in out.items() if k not in ("reduced_coverage",))
    return out


def invariance_leak(trunc: TruncatedRep, wprime: Frame) -> float:
    """Largest leak of ``F(E) (x) W'`` under ``Vi`` or ``Vi*`` for ``i = 1, 2``.

    The truncated matrices are exact compressions and the projector onto
    ``F(E) (x) W'`` is block diagonal by degree, so no interior restriction is needed.
    """
    d1, d2, m = trunc.shape
    if wprime.ambient != m:
        raise InvalidInput("subspace lives in the wrong space")
    pw = sp.csr_matrix(projector(wprime))
    pm = sp.block_diag([sp.kron(sp.identity((d1 * d2) ** n), pw) for n in range(trunc.N + 1)], format="csr")
    qm = sp.identity(trunc.D, format="csr") - pm
    leaks = []
    for op, letters in ((trunc.v1, d1), (trunc.v2, d2)):
        pin = sp.kron(sp.identity(letters), pm, format="csr")
        qin = sp.kron(sp.identity(letters), qm, format="csr")
        leaks.append(_fro(qm @ op @ pin))
        leaks.append(_fro(qin @ op.conj().T @ pm))
    return max(leaks)


def compare(pair: StructuredPair, trunc: TruncatedRep, tol: float = 1e-8) -> dict:
    """Cross-check structural analysis results against the truncation.

    Returns a dict of maximal deviations per item, the two index values and ``ok``.
    """
    from . import analysis

    dev = {}
    c_struct = analysis.defect_operator(pair)
    c_orc = oracle_defect(trunc)
    dev["C"] = float(np.linalg.norm(c_struct - c_orc))
    of = oracle_frames(trunc)
    dev["W1"] = subspace_distance(of["w1"], pair.w1_frame)
    dev["W2"] = subspace_distance(of["w2"], pair.w2_frame)
    dev["L"] = subspace_distance(of["range_v1"], pair.l_frame)
    rep = analysis.defect_report(c_struct, pair=pair)
    dev["E1"] = subspace_distance(of["e_plus"], rep.e1_frame)
    dev["E-1"] = subspace_distance(of["e_minus"], rep.em1_frame)

    f1, f2 = analysis.fringe_operators(pair)
    m = pair.m
    # fringe operators from the truncation, in the structural frames
    q1, q2 = pair.w1_frame.columns, pair.w2_frame.columns
    D = trunc.D
    v1_0 = np.hstack([trunc.v1.tocsc()[:m, a * D : a * D + m].toarray() for a in range(pair.d1)])
    v2_0 = np.hstack([trunc.v2.tocsc()[:m, b * D : b * D + m].toarray() for b in range(pair.d2)])
    f1_o = q2.conj().T @ v1_0 @ np.kron(np.eye(pair.d1), q2)
    f2_o = q1.conj().T @ v2_0 @ np.kron(np.eye(pair.d2), q1)
    dev["F1"] = float(np.linalg.norm(f1 - f1_o)) if f1.size else 0.0
    dev["F2"] = float(np.linalg.norm(f2 - f2_o)) if f2.size else 0.0
    idx_struct = analysis.fredholm_index(pair)
    idx_orc = of["e_minus"].k - of["e_plus"].k
    out = {"deviation": dev, "index_fringe": idx_struct, "index_oracle": idx_orc}
    out["max_deviation"] = max(dev.values())
    out["ok"] = out["max_deviation"] <= tol and idx_struct == idx_orc
    return out


__all__ = [
    "TruncatedRep",
    "truncate",
    "nnz_estimate",
    "shuffle_matrix",
    "oracle_defect",
    "oracle_frames",
    "range_projector_w",
    "residuals",
    "invariance_leak",
    "compare",
]
