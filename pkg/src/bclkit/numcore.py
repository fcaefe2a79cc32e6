"""Dense complex linear algebra primitives.

Every subspace in the package is carried as a :class:`Frame`, an ambient
dimension together with a matrix of orthonormal columns. Rank decisions use
a relative singular value threshold ``tol * sigma_max``; eigenvector phases
and the bases chosen for degenerate eigenspaces follow a fixed convention so
that reports are reproducible byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import InvalidInput, NotHermitian

DEFAULT_TOL = 1e-9
FRAME_TOL = 1e-9


def as_cmat(m, name: str = "matrix") -> np.ndarray:
    """Return ``m`` as a 2-D complex array, rejecting non-finite entries."""
    a = np.asarray(m, dtype=complex)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2:
        raise InvalidInput(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput(f"{name} has non-finite entries")
    return a


def fix_phase(cols: np.ndarray) -> np.ndarray:
    """Rotate each column so its first largest-modulus entry is real positive."""
    cols = np.array(cols, dtype=complex, copy=True)
    for c in range(cols.shape[1]):
        v = cols[:, c]
        mag = np.abs(v)
        top = mag.max() if mag.size else 0.0
        if top == 0.0:
            continue
        idx = int(np.flatnonzero(mag >= top * (1 - 1e-9))[0])
        cols[:, c] = v * (abs(v[idx]) / v[idx])
    return cols


def pivot_index(v: np.ndarray) -> int:
    mag = np.abs(v)
    return int(np.flatnonzero(mag >= mag.max() * (1 - 1e-9))[0])


@dataclass(frozen=True)
class Frame:
    """Orthonormal basis of a subspace of ``C^ambient``.

    Parameters
    ----------
    columns : ndarray, shape (ambient, k)
        Orthonormal columns; checked against ``FRAME_TOL``.
    ambient : int, optional
        Needed only when ``columns`` has no rows to infer it from.
    """

    columns: np.ndarray
    ambient: int = field(default=-1)

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=complex)
        if cols.ndim == 1:
            cols = cols.reshape(-1, 1)
        amb = cols.shape[0] if self.ambient < 0 else int(self.ambient)
        if cols.size == 0:
            cols = np.zeros((amb, 0), dtype=complex)
        if cols.shape[0] != amb:
            raise InvalidInput(f"frame has {cols.shape[0]} rows, ambient is {amb}")
        if not np.all(np.isfinite(cols)):
            raise InvalidInput("frame has non-finite entries")
        k = cols.shape[1]
        if k > amb:
            raise InvalidInput(f"frame rank {k} exceeds ambient dimension {amb}")
        res = np.linalg.norm(cols.conj().T @ cols - np.eye(k))
        if res > FRAME_TOL:
            raise InvalidInput(f"frame columns are not orthonormal (residual {res:.3e})")
        cols.setflags(write=False)
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "ambient", amb)

    @property
    def k(self) -> int:
        return self.columns.shape[1]

    @classmethod
    def empty(cls, ambient: int) -> "Frame":
        return cls(np.zeros((ambient, 0), dtype=complex), ambient)

    @classmethod
    def full(cls, ambient: int) -> "Frame":
        return cls(np.eye(ambient, dtype=complex), ambient)

    @classmethod
    def coordinates(cls, ambient: int, idx) -> "Frame":
        """Frame spanned by the standard basis vectors listed in ``idx``."""
        return cls(np.eye(ambient, dtype=complex)[:, list(idx)], ambient)


@dataclass(frozen=True)
class Spectrum:
    """Eigen-decomposition of a Hermitian matrix, eigenvalues ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        q = self.eigenvectors
        return (q * self.eigenvalues) @ q.conj().T


def _svd(m: np.ndarray):
    # thin U for tall input; V* is still square
    full = m.shape[0] < m.shape[1]
    try:
        return np.linalg.svd(m, full_matrices=full)
    except np.linalg.LinAlgError:
        return sla.svd(m, full_matrices=full, lapack_driver="gesvd")


def singular_values(m) -> np.ndarray:
    a = as_cmat(m)
    if a.size == 0:
        return np.zeros(0)
    return np.linalg.svd(a, compute_uv=False)


def numerical_rank(m, tol: float = DEFAULT_TOL) -> int:
    """Number of singular values above ``tol * sigma_max``."""
    if tol <= 0:
        raise InvalidInput("tol must be positive")
    s = singular_values(m)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def orthonormalize_columns(m, tol: float = DEFAULT_TOL) -> Frame:
    """Orthonormal basis of the column span of ``m``.

    Parameters
    ----------
    m : array_like, shape (n, k)
    tol : float
        Relative singular value threshold.

    Returns
    -------
    Frame
        Rank decided by ``sigma > tol * sigma_max``.
    """
    if tol <= 0:
        raise InvalidInput("tol must be positive")
    a = as_cmat(m)
    n = a.shape[0]
    if a.size == 0:
        return Frame.empty(n)
    u, s, _ = _svd(a)
    if s.size == 0 or s[0] == 0.0:
        return Frame.empty(n)
    r = int(np.sum(s > tol * s[0]))
    return Frame(fix_phase(u[:, :r]), n)


def kernel(m, tol: float = DEFAULT_TOL) -> Frame:
    """Orthonormal frame of ``{x : m x = 0}`` at relative threshold ``tol``."""
    if tol <= 0:
        raise InvalidInput("tol must be positive")
    a = as_cmat(m)
    ncols = a.shape[1]
    if a.size == 0:
        return Frame.full(ncols)
    _, s, vh = _svd(a)
    if s.size == 0 or s[0] == 0.0:
        return Frame.full(ncols)
    r = int(np.sum(s > tol * s[0]))
    return Frame(fix_phase(vh[r:].conj().T), ncols)


def canonical_frame(p: np.ndarray, rank: int | None = None) -> Frame:
    """Deterministic orthonormal basis for the range of an orthogonal projector.

    Pivoted Gram-Schmidt over the columns ``p e_i``: at each step the column
    with the largest residual is taken, ties going to the lowest index.
    """
    p = as_cmat(p)
    n = p.shape[0]
    if rank is None:
        rank = int(round(np.real(np.trace(p))))
    rank = max(0, min(rank, n))
    basis = np.zeros((n, 0), dtype=complex)
    cand = p.copy()
    for _ in range(rank):
        res = cand - basis @ (basis.conj().T @ cand)
        res = res - basis @ (basis.conj().T @ res)
        norms = np.linalg.norm(res, axis=0)
        top = norms.max()
        idx = int(np.flatnonzero(norms >= top * (1 - 1e-9))[0])
        v = res[:, idx] / norms[idx]
        basis = np.column_stack([basis, v])
    return Frame(fix_phase(basis), n)


def hermitian_eig(h, tol: float = DEFAULT_TOL) -> Spectrum:
    """Full spectral decomposition of a Hermitian matrix.

    Eigenvalues come out ascending. Each eigenvector is rotated so that its
    first largest-modulus entry is real positive. Within a cluster of equal
    eigenvalues the basis is rebuilt canonically from the eigenprojector and
    ordered by the index of that pivot entry.

    Raises
    ------
    NotHermitian
        If ``||h - h*||_F > tol * max(1, ||h||_F)``.
    """
    a = as_cmat(h)
    if a.shape[0] != a.shape[1]:
        raise InvalidInput(f"expected a square matrix, got {a.shape}")
    scale = max(1.0, float(np.linalg.norm(a)))
    asym = float(np.linalg.norm(a - a.conj().T))
    if asym > tol * scale:
        raise NotHermitian(f"matrix is not Hermitian (residual {asym:.3e})")
    n = a.shape[0]
    if n == 0:
        return Spectrum(np.zeros(0), np.zeros((0, 0), dtype=complex))
    w, q = np.linalg.eigh(0.5 * (a + a.conj().T))
    gap = max(tol, 1e-12) * scale
    vals, vecs = [], []
    i = 0
    while i < n:
        j = i + 1
        while j < n and w[j] - w[j - 1] <= gap:
            j += 1
        block = q[:, i:j]
        if j - i > 1:
            block = canonical_frame(block @ block.conj().T, j - i).columns
        else:
            block = fix_phase(block)
        order = sorted(range(block.shape[1]), key=lambda c: pivot_index(block[:, c]))
        for c in order:
            vecs.append(block[:, c])
        vals.extend([float(np.mean(w[i:j]))] * (j - i) if j - i > 1 else [float(w[i])])
        i = j
    return Spectrum(np.asarray(vals), np.column_stack(vecs))


def check_unitary(m) -> float:
    """Return ``||m* m - I||_F``; the caller compares it with a tolerance."""
    a = as_cmat(m)
    if a.shape[0] != a.shape[1]:
        raise InvalidInput(f"expected a square matrix, got {a.shape}")
    return float(np.linalg.norm(a.conj().T @ a - np.eye(a.shape[0])))


def projector(f: Frame) -> np.ndarray:
    """Orthogonal projector ``F F*`` onto the span of a frame."""
    c = f.columns
    return c @ c.conj().T


def complement(f: Frame) -> Frame:
    """Canonical frame of the orthogonal complement of ``f`` in its ambient space."""
    p = np.eye(f.ambient) - projector(f)
    return canonical_frame(p, f.ambient - f.k)


def span_sum(*frames: Frame, tol: float = DEFAULT_TOL) -> Frame:
    """Frame of the sum of several subspaces of the same ambient space."""
    amb = frames[0].ambient
    cols = np.column_stack([f.columns for f in frames]) if frames else np.zeros((amb, 0))
    return orthonormalize_columns(cols, tol) if cols.shape[1] else Frame.empty(amb)


def intersect(f: Frame, g: Frame, tol: float = 1e-7) -> Frame:
    """Intersection of two subspaces via principal angles.

    Directions whose principal cosine is at least ``1 - tol`` count as shared.
    """
    if f.ambient != g.ambient:
        raise InvalidInput("frames live in different ambient spaces")
    if f.k == 0 or g.k == 0:
        return Frame.empty(f.ambient)
    u, s, _ = _svd(f.columns.conj().T @ g.columns)
    r = int(np.sum(s >= 1 - tol))
    if r == 0:
        return Frame.empty(f.ambient)
    return orthonormalize_columns(f.columns @ u[:, :r])


def subspace_distance(f: Frame, g: Frame) -> float:
    """Frobenius distance between the two orthogonal projectors."""
    return float(np.linalg.norm(projector(f) - projector(g)))


def inclusion_residual(small: Frame, big: Frame) -> float:
    """``||(I - P_big) F_small||_F``; zero iff ``small`` lies inside ``big``."""
    c = small.columns
    return float(np.linalg.norm(c - big.columns @ (big.columns.conj().T @ c)))


def frame_from_projector(p: np.ndarray, tol: float = 1e-7) -> Frame:
    """Frame for the range of a (near) projector, eigenvalues above ``1/2`` kept."""
    w, q = np.linalg.eigh(0.5 * (p + p.conj().T))
    keep = w > 0.5
    return orthonormalize_columns(q[:, keep]) if keep.any() else Frame.empty(p.shape[0])


__all__ = [
    "DEFAULT_TOL",
    "Frame",
    "Spectrum",
    "as_cmat",
    "fix_phase",
    "numerical_rank",
    "singular_values",
    "orthonormalize_columns",
    "kernel",
    "canonical_frame",
    "hermitian_eig",
    "check_unitary",
    "projector",
    "complement",
    "span_sum",
    "intersect",
    "subspace_distance",
    "inclusion_residual",
    "frame_from_projector",
]
