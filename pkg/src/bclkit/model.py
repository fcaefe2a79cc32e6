"""BCL triples and the isometric pair they generate on a truncated-free Fock space.

Coordinates
-----------
The Fock space is ``F(E) (x) W`` with ``E = E1 (x) E2``, ``E1 = C^d1``,
``E2 = C^d2`` and ``W = C^m``. Only the diagonal grading is used, so the
degree ``n`` fiber is ``E1^{(x)n} (x) E2^{(x)n} (x) W`` with sorted index
``(a1..an, b1..bn, j)`` in C order (``j`` fastest). Its size is
``(d1 d2)^n m``.

Operators act on arrays of shape ``(*lead, F_n)``. When an operator consumes
a letter, that letter is the last lead axis.

The unitary ``u`` maps ``E2 (x) W`` (index ``(b, j)``) to
``P^perp W (+) E2 (x) E1 (x) PW``. Its first ``m - p`` rows are coordinates in
``pperp_frame`` and the remaining rows are indexed ``(b, a, k)`` with ``k``
running over ``w2_frame``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import (
    DegreeBudgetExceeded,
    DimensionMismatch,
    InvalidInput,
    NotUnitary,
    TensorFormViolation,
)
from .numcore import (
    Frame,
    as_cmat,
    canonical_frame,
    check_unitary,
    complement,
    orthonormalize_columns,
    projector,
)

UNITARY_TOL = 1e-9
TENSOR_TOL = 1e-8
PRUNE_TOL = 1e-14
DEFAULT_MAX_DEGREE = 8
SHUFFLES = ("interleaved", "block")


# ---------------------------------------------------------------------------
# twists and random unitaries
# ---------------------------------------------------------------------------


def flip_twist(d1: int, d2: int) -> np.ndarray:
    """Permutation ``e_b (x) e_a -> e_a (x) e_b`` from ``E2 (x) E1`` to ``E1 (x) E2``."""
    t = np.zeros((d1 * d2, d1 * d2), dtype=complex)
    for a in range(d1):
        for b in range(d2):
            t[a * d2 + b, b * d1 + a] = 1.0
    return t


def scalar_twist(lam: complex) -> np.ndarray:
    """Unimodular scalar twist for ``d1 = d2 = 1``."""
    return np.array([[complex(lam)]])


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar distributed ``n x n`` unitary from the QR of a complex Gaussian.

    The diagonal of ``R`` is rotated to be positive so the law is exactly Haar.
    """
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    ph = np.where(np.abs(d) > 0, d / np.abs(d), 1.0)
    return q * ph


def feasible(d1: int, d2: int, m: int, p: int) -> bool:
    """Whether a triple with these sizes can exist."""
    if min(d1, d2) < 1 or m < 0 or not 0 <= p <= m:
        return False
    return p * (d1 * d2 - 1) == m * (d2 - 1) and d1 * p <= m


# ---------------------------------------------------------------------------
# the triple
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BclTriple:
    """Validated model datum.

    Attributes
    ----------
    d1, d2 : int
        Dimensions of ``E1`` and ``E2``.
    m, p : int
        ``dim W`` and ``dim PW``.
    twist : ndarray, shape (d1*d2, d1*d2)
        Unitary from ``E2 (x) E1`` (index ``b*d1 + a``) to ``E1 (x) E2``
        (index ``a*d2 + b``).
    w2_frame, pperp_frame : Frame
        Frames of ``PW`` and ``P^perp W``; ``u`` is written in these coordinates.
    u : ndarray, shape (d2*m, d2*m)
    ul : ndarray, shape (d1*p, m)
        ``U_L`` extended by zero off ``L``; ``u`` lower block equals ``I_{d2} (x) ul``.
    l_frame : Frame
        Frame of ``L``, the row space of ``ul``.
    residuals : dict
        Unitarity and tensor-form residuals measured at validation.
    """

    d1: int
    d2: int
    m: int
    p: int
    twist: np.ndarray
    w2_frame: Frame
    pperp_frame: Frame
    u: np.ndarray
    ul: np.ndarray
    l_frame: Frame
    residuals: dict = field(default_factory=dict, compare=False)
    name: str | None = field(default=None, compare=False)
    seed: int | None = field(default=None, compare=False)

    @property
    def e_dim(self) -> int:
        return self.d1 * self.d2

    @property
    def projection(self) -> np.ndarray:
        return projector(self.w2_frame)

    def fiber_size(self, n: int) -> int:
        return (self.d1 * self.d2) ** n * self.m


def _twist_or_default(twist, d1: int, d2: int) -> np.ndarray:
    if twist is None:
        return flip_twist(d1, d2)
    t = np.asarray(twist, dtype=complex)
    if t.ndim == 0:
        t = t.reshape(1, 1)
    return as_cmat(t, "twist")


def validate_triple(
    d1: int,
    d2: int,
    u,
    w2_frame,
    twist=None,
    m: int | None = None,
    pperp_frame=None,
    tol: float = UNITARY_TOL,
    strict: bool = True,
    name: str | None = None,
    seed: int | None = None,
) -> BclTriple:
    """Check a candidate triple and extract ``L`` and ``U_L``.

    Parameters
    ----------
    d1, d2 : int
    u : array_like, shape (d2*m, d2*m)
    w2_frame : Frame or array_like, shape (m, p)
        Orthonormal columns spanning ``PW``.
    twist : array_like, optional
        Defaults to the flip.
    m : int, optional
        Checked against the frame when given.
    pperp_frame : Frame or array_like, optional
        Frame of ``P^perp W`` used for the first ``m - p`` rows of ``u``.
        Defaults to the canonical complement of ``w2_frame``.
    tol : float
        Unitarity tolerance.
    strict : bool
        When False, problems are recorded in ``residuals`` instead of raised.

    Raises
    ------
    DimensionMismatch, NotUnitary, TensorFormViolation
        The first failing category; ``.errors`` lists every problem found.
    """
    problems: list[tuple[type, str]] = []
    d1, d2 = int(d1), int(d2)
    if d1 < 1 or d2 < 1:
        raise InvalidInput("d1 and d2 must be positive")
    w2 = w2_frame if isinstance(w2_frame, Frame) else Frame(as_cmat(w2_frame, "w2_frame"), m if m is not None else -1)
    mm = w2.ambient
    if m is not None and int(m) != mm:
        problems.append((DimensionMismatch, f"dim_w={m} but w2_frame has {mm} rows"))
    m = mm
    p = w2.k
    t = _twist_or_default(twist, d1, d2)
    u = as_cmat(u, "u")

    if t.shape != (d1 * d2, d1 * d2):
        problems.append((DimensionMismatch, f"twist has shape {t.shape}, expected {(d1 * d2,) * 2}"))
    if u.shape != (d2 * m, d2 * m):
        problems.append((DimensionMismatch, f"u has shape {u.shape}, expected {(d2 * m,) * 2}"))
    if p * (d1 * d2 - 1) != m * (d2 - 1):
        problems.append(
            (
                DimensionMismatch,
                f"constraint p*(d1*d2-1) = m*(d2-1) fails: {p}*{d1 * d2 - 1} != {m}*{d2 - 1}",
            )
        )
    elif d1 * p > m:
        problems.append((DimensionMismatch, f"d1*p = {d1 * p} exceeds m = {m}"))
    if problems and strict:
        cls = problems[0][0]
        raise cls(problems[0][1], [msg for _, msg in problems])
    if any(c is DimensionMismatch for c, _ in problems):
        raise DimensionMismatch(problems[0][1], [msg for _, msg in problems])

    res = {}
    res["twist_unitary"] = check_unitary(t)
    res["u_unitary"] = check_unitary(u)
    if res["twist_unitary"] > tol:
        problems.append((NotUnitary, f"twist is not unitary (residual {res['twist_unitary']:.3e})"))
    if res["u_unitary"] > tol:
        problems.append((NotUnitary, f"u is not unitary (residual {res['u_unitary']:.3e})"))

    if pperp_frame is None:
        pperp = complement(w2)
    else:
        pperp = pperp_frame if isinstance(pperp_frame, Frame) else Frame(as_cmat(pperp_frame, "pperp_frame"), m)
        if pperp.k != m - p:
            raise DimensionMismatch(f"pperp_frame has rank {pperp.k}, expected {m - p}")
        overlap = float(np.linalg.norm(w2.columns.conj().T @ pperp.columns))
        if overlap > tol:
            raise InvalidInput(f"pperp_frame is not orthogonal to w2_frame ({overlap:.3e})")

    g = u[m - p :, :].reshape(d2, d1 * p, d2, m)
    ul = np.mean([g[b, :, b, :] for b in range(d2)], axis=0) if d2 else np.zeros((d1 * p, m))
    expected = np.zeros_like(g)
    for b in range(d2):
        expected[b, :, b, :] = ul
    res["tensor_form"] = float(np.linalg.norm(g - expected))
    if d1 * d2 > 1 and res["tensor_form"] > TENSOR_TOL:
        problems.append(
            (
                TensorFormViolation,
                f"lower block of u is not I_E2 (x) U_L (residual {res['tensor_form']:.3e})",
            )
        )
    l_frame = orthonormalize_columns(ul.conj().T) if p else Frame.empty(m)
    if l_frame.k != d1 * p:
        problems.append((TensorFormViolation, f"L has dimension {l_frame.k}, expected {d1 * p}"))
    else:
        l_frame = canonical_frame(projector(l_frame), d1 * p)

    if problems and strict:
        cls = problems[0][0]
        raise cls(problems[0][1], [msg for _, msg in problems])
    res["problems"] = [msg for _, msg in problems]
    return BclTriple(
        d1=d1,
        d2=d2,
        m=m,
        p=p,
        twist=t,
        w2_frame=w2,
        pperp_frame=pperp,
        u=u,
        ul=ul,
        l_frame=l_frame,
        residuals=res,
        name=name,
        seed=seed,
    )


def random_triple(
    d1: int,
    d2: int,
    m: int,
    p: int,
    seed: int | None = 0,
    twist=None,
    doubly_commuting: bool = False,
) -> BclTriple:
    """Seeded random triple.

    ``PW`` is spanned by the last ``p`` coordinates. ``L0`` is a random
    ``d1*p`` dimensional subspace (equal to ``PW`` when ``doubly_commuting``),
    ``U_L`` is Haar on ``L0``, and ``u`` is a Haar unitary from
    ``E2 (x) (W - L0)`` onto ``P^perp W`` stacked on ``I_{E2} (x) U_L``.

    Parameters
    ----------
    twist : None, "random", complex scalar or array
        ``None`` gives the flip; ``"random"`` draws a Haar twist (a random
        unimodular scalar when ``d1 = d2 = 1``).
    doubly_commuting : bool
        Force ``L = PW``; possible only when ``d1 = 1`` or ``p = 0``.
    """
    if m < 1:
        raise DimensionMismatch("m must be at least 1")
    if not feasible(d1, d2, m, p):
        raise DimensionMismatch(
            f"infeasible sizes (d1,d2,m,p)=({d1},{d2},{m},{p}): need p*(d1*d2-1) = m*(d2-1)"
            f" and d1*p <= m"
        )
    rng = np.random.default_rng(seed)
    w2 = Frame.coordinates(m, range(m - p, m))
    if doubly_commuting:
        if d1 != 1 and p != 0:
            raise DimensionMismatch("a doubly commuting triple needs d1 = 1 or p = 0")
        l0 = w2.columns
    else:
        l0 = haar_unitary(m, rng)[:, : d1 * p]
    ul = haar_unitary(d1 * p, rng) @ l0.conj().T
    w1 = complement(Frame(l0, m)).columns
    a = haar_unitary(m - p, rng) @ np.kron(np.eye(d2), w1).conj().T
    u = np.vstack([a, np.kron(np.eye(d2), ul)])
    if isinstance(twist, str):
        if twist != "random":
            raise InvalidInput(f"unknown twist option {twist!r}")
        if d1 * d2 == 1:
            t = scalar_twist(np.exp(2j * np.pi * rng.random()))
        else:
            t = haar_unitary(d1 * d2, rng)
    elif twist is None:
        t = None
    elif np.ndim(twist) == 0:
        t = scalar_twist(twist)
    else:
        t = twist
    return validate_triple(d1, d2, u, w2, twist=t, seed=seed)


def scalar_triple(u, p: int = 1, twist=None, name: str | None = None) -> BclTriple:
    """Scalar triple (``d1 = d2 = 1``) with ``PW`` spanned by the last ``p`` coordinates."""
    u = as_cmat(u, "u")
    m = u.shape[0]
    return validate_triple(1, 1, u, Frame.coordinates(m, range(m - p, m)), twist=twist, name=name)


def t_id() -> BclTriple:
    """``m = 2``, ``P`` onto ``e2``, ``U = I``."""
    return scalar_triple(np.eye(2), name="T_id")


def t_swap() -> BclTriple:
    """``m = 2``, ``P`` onto ``e2``, ``U`` the coordinate swap."""
    return scalar_triple(np.array([[0.0, 1.0], [1.0, 0.0]]), name="T_swap")


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def t_rot(theta: float) -> BclTriple:
    """``m = 2``, ``P`` onto ``e2``, ``U`` the rotation by ``theta``."""
    return scalar_triple(rotation(theta), name=f"T_rot({theta:.12g})")


def direct_sum(ta: BclTriple, tb: BclTriple) -> BclTriple:
    """Triple on ``W_a (+) W_b`` whose pair is the direct sum of the two pairs."""
    if (ta.d1, ta.d2) != (tb.d1, tb.d2):
        raise DimensionMismatch("direct sum needs equal d1 and d2")
    if np.linalg.norm(ta.twist - tb.twist) > UNITARY_TOL:
        raise InvalidInput("direct sum needs equal twists")
    d1, d2 = ta.d1, ta.d2
    m, p = ta.m + tb.m, ta.p + tb.p
    u = np.zeros((d2 * m, d2 * m), dtype=complex)

    def rows(t: BclTriple, off_perp: int, off_k: int) -> np.ndarray:
        idx = [off_perp + i for i in range(t.m - t.p)]
        for b in range(d2):
            for a in range(d1):
                for k in range(t.p):
                    idx.append((m - p) + (b * d1 + a) * p + off_k + k)
        return np.asarray(idx, dtype=int)

    def cols(t: BclTriple, off_j: int) -> np.ndarray:
        return np.asarray([b * m + off_j + j for b in range(d2) for j in range(t.m)], dtype=int)

    ra, ca = rows(ta, 0, 0), cols(ta, 0)
    rb, cb = rows(tb, ta.m - ta.p, ta.p), cols(tb, ta.m)
    u[np.ix_(ra, ca)] = ta.u
    u[np.ix_(rb, cb)] = tb.u

    def blockdiag(x, y):
        out = np.zeros((x.shape[0] + y.shape[0], x.shape[1] + y.shape[1]), dtype=complex)
        out[: x.shape[0], : x.shape[1]] = x
        out[x.shape[0] :, x.shape[1] :] = y
        return out

    w2 = Frame(blockdiag(ta.w2_frame.columns, tb.w2_frame.columns), m)
    pp = Frame(blockdiag(ta.pperp_frame.columns, tb.pperp_frame.columns), m)
    return validate_triple(d1, d2, u, w2, twist=ta.twist, pperp_frame=pp)


def conjugate_triple(t: BclTriple, y) -> BclTriple:
    """Transport a triple along a unitary ``y`` on ``W``.

    Frames move to ``y Q`` and ``u`` becomes ``u (I_{E2} (x) y*)``, so the
    pair of the result is ``(I (x) y) V (I (x) y*)``.
    """
    y = as_cmat(y, "y")
    if y.shape != (t.m, t.m):
        raise DimensionMismatch(f"y must be {t.m}x{t.m}")
    if check_unitary(y) > UNITARY_TOL:
        raise NotUnitary("y is not unitary")
    u = t.u @ np.kron(np.eye(t.d2), y.conj().T)
    return validate_triple(
        t.d1,
        t.d2,
        u,
        Frame(y @ t.w2_frame.columns, t.m),
        twist=t.twist,
        pperp_frame=Frame(y @ t.pperp_frame.columns, t.m),
    )


# ---------------------------------------------------------------------------
# the structured pair
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StructuredPair:
    """A triple with its derived frames and the blocks of ``Theta_2``.

    Attributes
    ----------
    theta2_deg0 : ndarray, shape (m, d2*m)
        ``P^perp U`` written in ``W`` coordinates.
    theta2_deg1 : ndarray, shape (d1*d2*m, d2*m)
        ``(t (x) P) U`` with rows indexed ``(a, b, j)``.
    shuffle : str
        ``"interleaved"`` (default) moves the ``E2`` letter through the word
        one ``E`` letter at a time; ``"block"`` is the alternative that keeps
        the original ``E2`` letters in place. Only the first gives a
        commuting pair when ``d2 > 1``.
    """

    triple: BclTriple
    w1_frame: Frame
    w2_frame: Frame
    l_frame: Frame
    pperp_frame: Frame
    theta2_deg0: np.ndarray
    theta2_deg1: np.ndarray
    ul: np.ndarray
    max_degree: int = DEFAULT_MAX_DEGREE
    shuffle: str = "interleaved"

    @property
    def d1(self) -> int:
        return self.triple.d1

    @property
    def d2(self) -> int:
        return self.triple.d2

    @property
    def m(self) -> int:
        return self.triple.m

    @property
    def p(self) -> int:
        return self.triple.p

    @property
    def twist(self) -> np.ndarray:
        return self.triple.twist

    def fiber_size(self, n: int) -> int:
        return self.triple.fiber_size(n)


def derive_frames(triple: BclTriple, tol: float = TENSOR_TOL) -> tuple[Frame, Frame, Frame]:
    """Return ``(W1, W2, L)``.

    ``W1`` is the orthogonal complement of ``L``. The lower block of ``u``
    must annihilate ``E2 (x) W1`` so that ``U(E2 (x) W1) = P^perp W``.
    """
    w1 = complement(triple.l_frame)
    g = triple.u[triple.m - triple.p :, :]
    leak = float(np.linalg.norm(g @ np.kron(np.eye(triple.d2), w1.columns))) if w1.k else 0.0
    if leak > tol:
        raise TensorFormViolation(f"U(E2 (x) W1) leaves P^perp W (residual {leak:.3e})")
    return w1, triple.w2_frame, triple.l_frame


def build_pair(
    triple: BclTriple,
    max_degree: int = DEFAULT_MAX_DEGREE,
    shuffle: str = "interleaved",
    check: bool = True,
) -> StructuredPair:
    """Derive frames and ``Theta_2`` blocks for a validated triple."""
    if shuffle not in SHUFFLES:
        raise InvalidInput(f"shuffle must be one of {SHUFFLES}")
    if check:
        w1, w2, lf = derive_frames(triple)
    else:
        w1, w2, lf = complement(triple.l_frame), triple.w2_frame, triple.l_frame
    d1, d2, m, p = triple.d1, triple.d2, triple.m, triple.p
    theta0 = triple.pperp_frame.columns @ triple.u[: m - p, :]
    lower = triple.u[m - p :, :].reshape(d2, d1, p, d2 * m)
    # (b, a, k) -> twist -> (a', b'), then k -> W coordinates
    t4 = triple.twist.reshape(d1, d2, d2, d1)
    theta1 = np.einsum("xybc,bckz,jk->xyjz", t4, lower, triple.w2_frame.columns)
    theta1 = theta1.reshape(d1 * d2 * m, d2 * m)
    return StructuredPair(
        triple=triple,
        w1_frame=w1,
        w2_frame=w2,
        l_frame=lf,
        pperp_frame=triple.pperp_frame,
        theta2_deg0=theta0,
        theta2_deg1=theta1,
        ul=triple.ul,
        max_degree=int(max_degree),
        shuffle=shuffle,
    )


# ---------------------------------------------------------------------------
# graded vectors
# ---------------------------------------------------------------------------


@dataclass
class GradedVector:
    """Finitely supported vector of ``lead``-indexed copies of ``F(E) (x) W``.

    Attributes
    ----------
    shape : (d1, d2, m)
    terms : dict
        Degree ``n`` maps to an array of shape ``(*lead, (d1 d2)^n m)``.
    lead : tuple of int
        Batch or letter axes carried in front of the fiber index.
    """

    shape: tuple[int, int, int]
    terms: dict[int, np.ndarray]
    lead: tuple[int, ...] = ()

    def __post_init__(self):
        d1, d2, m = self.shape
        clean = {}
        for n, arr in self.terms.items():
            arr = np.asarray(arr, dtype=complex)
            want = tuple(self.lead) + ((d1 * d2) ** n * m,)
            if arr.shape != want:
                raise InvalidInput(f"degree {n} term has shape {arr.shape}, expected {want}")
            clean[int(n)] = arr
        self.terms = dict(sorted(clean.items()))
        self.lead = tuple(self.lead)

    @classmethod
    def zeros(cls, shape, lead=()) -> "GradedVector":
        return cls(tuple(shape), {}, tuple(lead))

    @classmethod
    def basis(cls, shape, degree: int, index: int, lead_index: tuple = (), lead=()) -> "GradedVector":
        d1, d2, m = shape
        arr = np.zeros(tuple(lead) + ((d1 * d2) ** degree * m,), dtype=complex)
        arr[tuple(lead_index) + (index,)] = 1.0
        return cls(tuple(shape), {degree: arr}, tuple(lead))

    @classmethod
    def random(cls, shape, max_degree: int, rng: np.random.Generator, lead=()) -> "GradedVector":
        d1, d2, m = shape
        terms = {}
        for n in range(max_degree + 1):
            size = tuple(lead) + ((d1 * d2) ** n * m,)
            terms[n] = rng.standard_normal(size) + 1j * rng.standard_normal(size)
        return cls(tuple(shape), terms, tuple(lead))

    @property
    def max_degree(self) -> int:
        return max(self.terms) if self.terms else -1

    def coeff(self, n: int) -> np.ndarray:
        if n in self.terms:
            return self.terms[n]
        d1, d2, m = self.shape
        return np.zeros(self.lead + ((d1 * d2) ** n * m,), dtype=complex)

    def norm(self) -> float:
        return float(np.sqrt(sum(np.vdot(a, a).real for a in self.terms.values())))

    def inner(self, other: "GradedVector") -> complex:
        """``<self, other>``, conjugate linear in ``self``."""
        self._check(other)
        return complex(sum(np.vdot(self.terms[n], other.terms[n]) for n in self.terms if n in other.terms))

    def _check(self, other: "GradedVector"):
        if self.shape != other.shape or self.lead != other.lead:
            raise InvalidInput("graded vectors have different shapes")

    def __add__(self, other: "GradedVector") -> "GradedVector":
        self._check(other)
        terms = {n: a.copy() for n, a in self.terms.items()}
        for n, a in other.terms.items():
            terms[n] = terms[n] + a if n in terms else a.copy()
        return GradedVector(self.shape, terms, self.lead)

    def __neg__(self) -> "GradedVector":
        return GradedVector(self.shape, {n: -a for n, a in self.terms.items()}, self.lead)

    def __sub__(self, other: "GradedVector") -> "GradedVector":
        return self + (-other)

    def __mul__(self, c: complex) -> "GradedVector":
        return GradedVector(self.shape, {n: c * a for n, a in self.terms.items()}, self.lead)

    __rmul__ = __mul__

    def prune(self, tol: float = PRUNE_TOL) -> "GradedVector":
        """Drop degree components of norm below ``tol``."""
        keep = {n: a for n, a in self.terms.items() if np.linalg.norm(a) >= tol}
        return GradedVector(self.shape, keep, self.lead)

    def to_dense(self, max_degree: int) -> np.ndarray:
        """Concatenate degrees ``0..max_degree`` along the last axis."""
        return np.concatenate([self.coeff(n) for n in range(max_degree + 1)], axis=-1)

    @classmethod
    def from_dense(cls, shape, vec: np.ndarray, max_degree: int) -> "GradedVector":
        d1, d2, m = shape
        vec = np.asarray(vec, dtype=complex)
        terms, off = {}, 0
        for n in range(max_degree + 1):
            size = (d1 * d2) ** n * m
            terms[n] = vec[..., off : off + size]
            off += size
        if off != vec.shape[-1]:
            raise InvalidInput("dense vector length does not match the degree range")
        return cls(tuple(shape), terms, vec.shape[:-1])

    def tensor(self, letter: np.ndarray) -> "GradedVector":
        """``letter (x) self``: append a letter axis to the lead."""
        letter = np.asarray(letter, dtype=complex)
        terms = {n: a[..., None, :] * letter[(None,) * len(self.lead) + (slice(None), None)] for n, a in self.terms.items()}
        return GradedVector(self.shape, terms, self.lead + (letter.shape[0],))


# ---------------------------------------------------------------------------
# kernels on dict[int, ndarray(L, *, F_n)]
# ---------------------------------------------------------------------------


def _shuffle_fwd(x: np.ndarray, n: int, d1: int, d2: int, m: int, t: np.ndarray, mode: str) -> np.ndarray:
    """``(L, d2, F_n)`` to ``(L, X_n, d2*m)``: move the leading E2 letter to the end."""
    lsz = x.shape[0]
    arr = x.reshape((lsz, d2) + (d1,) * n + (d2,) * n + (m,))
    t4 = t.reshape(d1, d2, d2, d1)
    a_lab = list(range(2, n + 2))
    b_lab = list(range(n + 2, 2 * n + 2))
    j_lab = 2 * n + 2
    new_a, new_b = 2 * n + 3, 2 * n + 4
    for k in range(n):
        in_lab = [0, 1] + a_lab + b_lab + [j_lab]
        oa = a_lab.copy()
        oa[k] = new_a
        if mode == "interleaved":
            ob = b_lab.copy()
            ob[k] = new_b
            out = [0, b_lab[k]] + oa + ob + [j_lab]
        else:
            out = [0, new_b] + oa + b_lab + [j_lab]
        arr = np.einsum(arr, in_lab, t4, [new_a, new_b, 1, a_lab[k]], out, optimize=True)
    arr = np.moveaxis(arr, 1, -2)
    return arr.reshape(lsz, (d1 * d2) ** n, d2 * m)


def _shuffle_inv(z: np.ndarray, n: int, d1: int, d2: int, m: int, t: np.ndarray, mode: str) -> np.ndarray:
    """Adjoint (inverse) of :func:`_shuffle_fwd`."""
    lsz = z.shape[0]
    arr = z.reshape((lsz,) + (d1,) * n + (d2,) * n + (d2, m))
    arr = np.moveaxis(arr, -2, 1)
    t4h = t.reshape(d1, d2, d2, d1).conj()
    a_lab = list(range(2, n + 2))
    b_lab = list(range(n + 2, 2 * n + 2))
    j_lab = 2 * n + 2
    new_c, new_a = 2 * n + 3, 2 * n + 4
    for k in reversed(range(n)):
        in_lab = [0, 1] + a_lab + b_lab + [j_lab]
        oa = a_lab.copy()
        oa[k] = new_a
        if mode == "interleaved":
            ob = b_lab.copy()
            ob[k] = 1
            out = [0, new_c] + oa + ob + [j_lab]
            arr = np.einsum(arr, in_lab, t4h, [a_lab[k], b_lab[k], new_c, new_a], out, optimize=True)
        else:
            out = [0, new_c] + oa + b_lab + [j_lab]
            arr = np.einsum(arr, in_lab, t4h, [a_lab[k], 1, new_c, new_a], out, optimize=True)
    return arr.reshape(lsz, d2, (d1 * d2) ** n * m)


def _add(out: dict, n: int, arr: np.ndarray):
    out[n] = out[n] + arr if n in out else arr


def _append_letter(y1: np.ndarray, n: int, d1: int, d2: int, m: int) -> np.ndarray:
    """``(L, X_n, (a, b, j))`` to degree ``n + 1`` with ``(a, b)`` as the last E letter."""
    lsz = y1.shape[0]
    arr = y1.reshape((lsz,) + (d1,) * n + (d2,) * n + (d1, d2, m))
    order = [0] + list(range(1, n + 1)) + [2 * n + 1] + list(range(n + 1, 2 * n + 1)) + [2 * n + 2, 2 * n + 3]
    return arr.transpose(order).reshape(lsz, -1)


def _strip_last_letter(y: np.ndarray, n: int, d1: int, d2: int, m: int) -> np.ndarray:
    """Degree ``n + 1`` ``(L, F)`` to ``(L, X_n, (a, b, j))``, inverse of :func:`_append_letter`."""
    lsz = y.shape[0]
    arr = y.reshape((lsz,) + (d1,) * (n + 1) + (d2,) * (n + 1) + (m,))
    order = [0] + list(range(1, n + 1)) + list(range(n + 2, 2 * n + 2)) + [n + 1, 2 * n + 2, 2 * n + 3]
    return arr.transpose(order).reshape(lsz, (d1 * d2) ** n, d1 * d2 * m)


def k_v2(pair: StructuredPair, x: dict) -> dict:
    """``V2`` on ``{n: (L, d2, F_n)}``."""
    d1, d2, m = pair.d1, pair.d2, pair.m
    out: dict = {}
    for n, arr in x.items():
        s = _shuffle_fwd(arr, n, d1, d2, m, pair.twist, pair.shuffle)
        _add(out, n, (s @ pair.theta2_deg0.T).reshape(arr.shape[0], -1))
        y1 = s @ pair.theta2_deg1.T
        _add(out, n + 1, _append_letter(y1, n, d1, d2, m))
    return out


def k_v2_adj(pair: StructuredPair, y: dict) -> dict:
    """``V2*`` on ``{n: (L, F_n)}``, returning ``{n: (L, d2, F_n)}``."""
    d1, d2, m = pair.d1, pair.d2, pair.m
    z: dict = {}
    for n, arr in y.items():
        lsz = arr.shape[0]
        _add(z, n, arr.reshape(lsz, -1, m) @ pair.theta2_deg0.conj())
        if n >= 1:
            s = _strip_last_letter(arr, n - 1, d1, d2, m)
            _add(z, n - 1, s @ pair.theta2_deg1.conj())
    return {n: _shuffle_inv(a, n, d1, d2, m, pair.twist, pair.shuffle) for n, a in z.items()}


def k_shift(pair: StructuredPair, x: dict) -> dict:
    """Prepend the lead ``E`` letter: ``{n: (L, d1*d2, F_n)}`` to degree ``n + 1``."""
    d1, d2, m = pair.d1, pair.d2, pair.m
    out = {}
    for n, arr in x.items():
        lsz = arr.shape[0]
        t = arr.reshape((lsz, d1, d2) + (d1,) * n + (d2,) * n + (m,))
        order = [0, 1] + list(range(3, n + 3)) + [2] + list(range(n + 3, 2 * n + 3)) + [2 * n + 3]
        out[n + 1] = t.transpose(order).reshape(lsz, -1)
    return out


def k_shift_adj(pair: StructuredPair, y: dict) -> dict:
    """Strip the leading ``E`` letter; degree 0 is annihilated."""
    d1, d2, m = pair.d1, pair.d2, pair.m
    out = {}
    for n, arr in y.items():
        if n == 0:
            continue
        lsz = arr.shape[0]
        k = n - 1
        t = arr.reshape((lsz,) + (d1,) * n + (d2,) * n + (m,))
        order = [0, 1, n + 1] + list(range(2, n + 1)) + list(range(n + 2, 2 * n + 1)) + [2 * n + 1]
        out[k] = t.transpose(order).reshape(lsz, d1 * d2, (d1 * d2) ** k * m)
    return out


def k_v1(pair: StructuredPair, x: dict) -> dict:
    """``V1`` on ``{n: (L, d1, F_n)}``: shift after ``I (x) V2*``, plus ``U_L*`` on ``E1 (x) PW``."""
    d1, d2, m, p = pair.d1, pair.d2, pair.m, pair.p
    flat = {n: a.reshape(-1, a.shape[-1]) for n, a in x.items()}
    z = k_v2_adj(pair, flat)
    lsz = next(iter(x.values())).shape[0] if x else 0
    e = {n: a.reshape(lsz, d1 * d2, -1) for n, a in z.items()}
    out = k_shift(pair, e)
    if 0 in x and p:
        x0 = x[0] @ pair.w2_frame.columns.conj()
        _add(out, 0, x0.reshape(lsz, d1 * p) @ pair.ul.conj())
    return out


def k_v1_adj(pair: StructuredPair, y: dict) -> dict:
    """``V1*`` on ``{n: (L, F_n)}``, returning ``{n: (L, d1, F_n)}``."""
    d1, d2, m, p = pair.d1, pair.d2, pair.m, pair.p
    s = k_shift_adj(pair, y)
    out: dict = {}
    for n, arr in s.items():
        lsz = arr.shape[0]
        v = k_v2(pair, {n: arr.reshape(lsz * d1, d2, -1)})
        for k, a in v.items():
            _add(out, k, a.reshape(lsz, d1, -1))
    if 0 in y and p:
        lsz = y[0].shape[0]
        h = (y[0] @ pair.ul.T).reshape(lsz, d1, p) @ pair.w2_frame.columns.T
        _add(out, 0, h)
    return out


def k_twist(t: np.ndarray, d1: int, d2: int, x: dict, inverse: bool = False) -> dict:
    """``t (x) I`` on lead ``(b, a)`` giving lead ``(a, b)``; ``inverse`` maps back."""
    t4 = t.reshape(d1, d2, d2, d1)
    out = {}
    for n, arr in x.items():
        if inverse:
            out[n] = np.einsum("abcd,labf->lcdf", t4.conj(), arr)
        else:
            out[n] = np.einsum("abcd,lcdf->labf", t4, arr)
    return out


# ---------------------------------------------------------------------------
# public operators on GradedVector
# ---------------------------------------------------------------------------


def _unwrap(pair: StructuredPair, x: GradedVector, letter: int | None) -> tuple[dict, tuple]:
    if x.shape != (pair.d1, pair.d2, pair.m):
        raise InvalidInput(f"vector shape {x.shape} does not match pair {(pair.d1, pair.d2, pair.m)}")
    if letter is None:
        batch = x.lead
        return {n: a.reshape((-1, a.shape[-1])) for n, a in x.terms.items()}, batch
    if not x.lead or x.lead[-1] != letter:
        raise InvalidInput(f"expected a trailing letter axis of size {letter}, lead is {x.lead}")
    batch = x.lead[:-1]
    return {n: a.reshape((-1, letter, a.shape[-1])) for n, a in x.terms.items()}, batch


def _wrap(pair: StructuredPair, out: dict, batch: tuple, letter: int | None = None) -> GradedVector:
    lead = batch + ((letter,) if letter is not None else ())
    terms = {n: a.reshape(lead + (a.shape[-1],)) for n, a in out.items()}
    if terms and max(terms) > pair.max_degree:
        raise DegreeBudgetExceeded(
            f"result reaches degree {max(terms)}, above the budget {pair.max_degree}"
        )
    return GradedVector((pair.d1, pair.d2, pair.m), terms, lead).prune()


def apply_v2(pair: StructuredPair, x: GradedVector) -> GradedVector:
    """``V2`` on ``E2 (x) F(E) (x) W``; the last lead axis of ``x`` is the ``E2`` letter."""
    data, batch = _unwrap(pair, x, pair.d2)
    return _wrap(pair, k_v2(pair, data), batch)


def apply_v1(pair: StructuredPair, x: GradedVector) -> GradedVector:
    """``V1`` on ``E1 (x) F(E) (x) W``; the last lead axis of ``x`` is the ``E1`` letter."""
    data, batch = _unwrap(pair, x, pair.d1)
    return _wrap(pair, k_v1(pair, data), batch)


def v2_adjoint(pair: StructuredPair, y: GradedVector) -> GradedVector:
    data, batch = _unwrap(pair, y, None)
    return _wrap(pair, k_v2_adj(pair, data), batch, pair.d2)


def v1_adjoint(pair: StructuredPair, y: GradedVector) -> GradedVector:
    data, batch = _unwrap(pair, y, None)
    return _wrap(pair, k_v1_adj(pair, data), batch, pair.d1)


def shift(pair: StructuredPair, x: GradedVector) -> GradedVector:
    """The product isometry as letter concatenation; last lead axis is the ``E`` letter."""
    data, batch = _unwrap(pair, x, pair.d1 * pair.d2)
    return _wrap(pair, k_shift(pair, data), batch)


def shift_adjoint(pair: StructuredPair, y: GradedVector) -> GradedVector:
    data, batch = _unwrap(pair, y, None)
    return _wrap(pair, k_shift_adj(pair, data), batch, pair.d1 * pair.d2)


def apply_product(pair: StructuredPair, x: GradedVector) -> GradedVector:
    """``V1 (I (x) V2)`` on ``E1 (x) E2 (x) F(E) (x) W``; lead ends with ``(a, b)``."""
    d1, d2 = pair.d1, pair.d2
    if len(x.lead) < 2 or x.lead[-2:] != (d1, d2):
        raise InvalidInput(f"expected trailing letter axes {(d1, d2)}, lead is {x.lead}")
    inner = apply_v2(pair, x)
    return apply_v1(pair, inner)


def apply_twist(pair: StructuredPair, x: GradedVector, inverse: bool = False) -> GradedVector:
    """``t (x) I``: lead ``(..., b, a)`` to ``(..., a, b)`` (or back when ``inverse``)."""
    d1, d2 = pair.d1, pair.d2
    want = (d1, d2) if inverse else (d2, d1)
    if len(x.lead) < 2 or x.lead[-2:] != want:
        raise InvalidInput(f"expected trailing letter axes {want}, lead is {x.lead}")
    batch = x.lead[:-2]
    data = {n: a.reshape((-1,) + want + (a.shape[-1],)) for n, a in x.terms.items()}
    out = k_twist(pair.twist, d1, d2, data, inverse)
    new = (d2, d1) if inverse else (d1, d2)
    return GradedVector(x.shape, {n: a.reshape(batch + new + (a.shape[-1],)) for n, a in out.items()}, batch + new)


def letter_shuffle(n: int, triple: BclTriple | StructuredPair, mode: str = "interleaved") -> np.ndarray:
    """Matrix of the letter shuffle ``E2 (x) E^{(x)n} -> E^{(x)n} (x) E2``.

    Columns are indexed ``(c, a1..an, b1..bn)`` and rows
    ``(a1'..an', b1'..bn', c')``. The default ``"interleaved"`` mode pushes
    the incoming ``E2`` letter through each ``E`` letter in turn with the
    twist, handing the ``E2`` half of every letter on to the next step.
    """
    if n < 0:
        raise InvalidInput("n must be non-negative")
    t = triple.triple if isinstance(triple, StructuredPair) else triple
    d1, d2 = t.d1, t.d2
    size = d2 * (d1 * d2) ** n
    eye = np.eye(size, dtype=complex).reshape(size, d2, -1)
    out = _shuffle_fwd(eye, n, d1, d2, 1, t.twist, mode)
    return out.reshape(size, size).T


def fiber_basis(pair: StructuredPair, degree: int, letter: int | None = None) -> GradedVector:
    """All basis vectors of one fiber (optionally tensored with every letter) as a batch."""
    f = pair.fiber_size(degree)
    if letter is None:
        arr = np.eye(f, dtype=complex)
        return GradedVector((pair.d1, pair.d2, pair.m), {degree: arr}, (f,))
    arr = np.eye(letter * f, dtype=complex).reshape(letter * f, letter, f)
    return GradedVector((pair.d1, pair.d2, pair.m), {degree: arr}, (letter * f, letter))


def tensor_letters(vectors: Iterable[GradedVector]) -> GradedVector:
    """Stack vectors with identical shapes into a new trailing letter axis."""
    vs = list(vectors)
    base = vs[0]
    degs = sorted(set().union(*[v.terms.keys() for v in vs]))
    terms = {n: np.stack([v.coeff(n) for v in vs], axis=-2) for n in degs}
    return GradedVector(base.shape, terms, base.lead + (len(vs),))


__all__ = [
    "BclTriple",
    "StructuredPair",
    "GradedVector",
    "flip_twist",
    "scalar_twist",
    "haar_unitary",
    "feasible",
    "validate_triple",
    "random_triple",
    "scalar_triple",
    "t_id",
    "t_swap",
    "t_rot",
    "rotation",
    "direct_sum",
    "conjugate_triple",
    "derive_frames",
    "build_pair",
    "letter_shuffle",
    "apply_v1",
    "apply_v2",
    "v1_adjoint",
    "v2_adjoint",
    "shift",
    "shift_adjoint",
    "apply_product",
    "apply_twist",
    "fiber_basis",
    "tensor_letters",
]
