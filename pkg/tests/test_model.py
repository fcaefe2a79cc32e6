import numpy as np
import pytest

from bclkit.errors import DegreeBudgetExceeded, DimensionMismatch, InvalidInput, NotUnitary, TensorFormViolation
from bclkit.model import (
    GradedVector,
    apply_product,
    apply_twist,
    apply_v1,
    apply_v2,
    build_pair,
    conjugate_triple,
    direct_sum,
    feasible,
    flip_twist,
    haar_unitary,
    letter_shuffle,
    random_triple,
    rotation,
    scalar_triple,
    scalar_twist,
    shift,
    shift_adjoint,
    t_id,
    t_rot,
    t_swap,
    v1_adjoint,
    v2_adjoint,
    validate_triple,
)
from bclkit.numcore import projector, subspace_distance

SHAPES = [(1, 1, 3, 1), (2, 2, 3, 1), (1, 2, 4, 4), (2, 1, 3, 0), (2, 3, 5, 2)]


def _vec(pair, lead, rng, max_degree=2):
    return GradedVector.random((pair.d1, pair.d2, pair.m), max_degree, rng, lead)


def _dist(x, y):
    return (x - y).norm()


# ---------------------------------------------------------------------------
# triples
# ---------------------------------------------------------------------------


def test_scalar_identity_triple_is_valid():
    t = validate_triple(1, 1, np.eye(2), np.eye(2)[:, 1:])
    assert t.p == 1
    assert subspace_distance(t.l_frame, t.w2_frame) < 1e-14


def test_infeasible_dimensions_rejected():
    assert not feasible(2, 2, 3, 2)
    with pytest.raises(DimensionMismatch):
        random_triple(2, 2, 3, 2)
    with pytest.raises(DimensionMismatch):
        validate_triple(2, 2, np.eye(6), np.eye(3)[:, 1:])


def test_random_2231_has_tensor_form():
    t = random_triple(2, 2, 3, 1, seed=5)
    m, p, d1, d2 = t.m, t.p, t.d1, t.d2
    q2 = t.w2_frame.columns
    lower = t.u[m - p :, :]
    # U(E2 (x) L) lands in E2 (x) E1 (x) PW: the upper rows vanish there
    el = np.kron(np.eye(d2), t.l_frame.columns)
    assert np.linalg.norm(t.u[: m - p, :] @ el) < 1e-12
    # the E2 index is carried through: block (b, b') is delta_{bb'} U_L
    blocks = lower.reshape(d2, d1 * p, d2, m)
    assert np.linalg.norm(blocks[0, :, 1, :]) < 1e-12
    assert np.linalg.norm(blocks[0, :, 0, :] - blocks[1, :, 1, :]) < 1e-12
    assert q2.shape == (3, 1)


def test_non_unitary_and_tensor_violations_collected():
    t = random_triple(2, 2, 3, 1, seed=1)
    u = t.u.copy()
    u[0, 0] += 0.5
    with pytest.raises(NotUnitary) as exc:
        validate_triple(2, 2, u, t.w2_frame)
    assert len(exc.value.errors) >= 1
    u = t.u.copy()
    u[[3, 5], :] = u[[5, 3], :]
    with pytest.raises(TensorFormViolation):
        validate_triple(2, 2, u, t.w2_frame)
    loose = validate_triple(2, 2, u, t.w2_frame, strict=False)
    assert loose.residuals["problems"]


def test_derived_frames_scalar_examples():
    pid = build_pair(t_id())
    assert np.allclose(projector(pid.w1_frame), np.diag([1, 0]))
    assert np.allclose(projector(pid.w2_frame), np.diag([0, 1]))
    assert np.allclose(projector(pid.l_frame), np.diag([0, 1]))
    psw = build_pair(t_swap())
    assert np.allclose(projector(psw.w1_frame), np.diag([0, 1]))
    assert np.allclose(projector(psw.l_frame), np.diag([1, 0]))
    th = 0.4
    prot = build_pair(t_rot(th))
    v = np.array([np.cos(th), -np.sin(th)])
    assert np.allclose(projector(prot.w1_frame), np.outer(v, v))


def test_random_triple_examples():
    assert build_pair(random_triple(1, 1, 2, 1, seed=0)).m == 2
    assert build_pair(random_triple(2, 2, 3, 1, seed=3)).w1_frame.k == 1
    assert build_pair(random_triple(1, 2, 4, 4, seed=3)).w1_frame.k == 0
    with pytest.raises(DimensionMismatch):
        random_triple(1, 2, 4, 2)


def test_random_triple_deterministic():
    a, b = random_triple(2, 2, 3, 1, seed=9, twist="random"), random_triple(2, 2, 3, 1, seed=9, twist="random")
    assert np.array_equal(a.u, b.u) and np.array_equal(a.twist, b.twist)


def test_haar_unitary_is_unitary(rng):
    u = haar_unitary(5, rng)
    assert np.linalg.norm(u.conj().T @ u - np.eye(5)) < 1e-13


def test_direct_sum_and_conjugate(rng):
    a, b = random_triple(1, 1, 2, 1, seed=1, twist=np.exp(0.6j)), random_triple(1, 1, 3, 2, seed=2, twist=np.exp(0.6j))
    s = direct_sum(a, b)
    assert (s.m, s.p) == (5, 3)
    y = haar_unitary(5, rng)
    c = conjugate_triple(s, y)
    assert c.residuals["u_unitary"] < 1e-12


# ---------------------------------------------------------------------------
# letter shuffle
# ---------------------------------------------------------------------------


def test_letter_shuffle_degree_zero_is_identity():
    t = random_triple(2, 2, 3, 1, seed=0, twist="random")
    assert np.allclose(letter_shuffle(0, t), np.eye(2))


def test_letter_shuffle_scalar_power():
    lam = np.exp(1j * np.pi / 3)
    t = scalar_triple(np.eye(2), twist=lam)
    assert np.allclose(letter_shuffle(2, t), lam**2)


def _flip_perm(mapping):
    # columns (b, a1, b1), rows (a1', b1', c')
    p = np.zeros((8, 8))
    for b in range(2):
        for a1 in range(2):
            for b1 in range(2):
                out = mapping(b, a1, b1)
                p[out[0] * 4 + out[1] * 2 + out[2], b * 4 + a1 * 2 + b1] = 1
    return p


def test_letter_shuffle_flip_interleaved():
    t = random_triple(2, 2, 3, 1, seed=0)
    # the incoming E2 letter becomes the new b1; the old b1 trails
    assert np.array_equal(letter_shuffle(1, t).real, _flip_perm(lambda b, a1, b1: (a1, b, b1)))


def test_letter_shuffle_flip_block():
    t = random_triple(2, 2, 3, 1, seed=0)
    assert np.array_equal(letter_shuffle(1, t, mode="block").real, _flip_perm(lambda b, a1, b1: (a1, b1, b)))


def test_letter_shuffle_unitary():
    t = random_triple(2, 2, 3, 1, seed=2, twist="random")
    s = letter_shuffle(2, t)
    assert np.linalg.norm(s.conj().T @ s - np.eye(s.shape[0])) < 1e-12


# ---------------------------------------------------------------------------
# operators on graded vectors
# ---------------------------------------------------------------------------


def test_v2_on_t_id_examples():
    p = build_pair(t_id())
    sh = (1, 1, 2)
    e1 = GradedVector.basis(sh, 0, 0, (0,), (1,))
    out = apply_v2(p, e1)
    assert set(out.terms) == {0} and np.allclose(out.terms[0], [1, 0])
    e2 = GradedVector.basis(sh, 0, 1, (0,), (1,))
    out = apply_v2(p, e2)
    assert set(out.terms) == {1} and np.allclose(out.terms[1], [0, 1])
    assert apply_v2(p, GradedVector.zeros(sh, (1,))).norm() == 0


def test_v1_on_t_id_examples():
    p = build_pair(t_id())
    sh = (1, 1, 2)
    out = apply_v1(p, GradedVector.basis(sh, 0, 1, (0,), (1,)))
    assert set(out.terms) == {0} and np.allclose(out.terms[0], [0, 1])
    out = apply_v1(p, GradedVector.basis(sh, 0, 0, (0,), (1,)))
    assert set(out.terms) == {1} and np.allclose(out.terms[1], [1, 0])
    assert apply_v1(p, GradedVector.zeros(sh, (1,))).norm() == 0


@pytest.mark.parametrize("shape", SHAPES)
def test_shift_adjoint_kills_degree_zero(shape, rng):
    p = build_pair(random_triple(*shape, seed=1))
    y = GradedVector((p.d1, p.d2, p.m), {0: rng.normal(size=p.m)})
    assert shift_adjoint(p, y).norm() == 0


@pytest.mark.parametrize("shape", SHAPES)
@pytest.mark.parametrize("twist", [None, "random"])
def test_adjoints(shape, twist, rng):
    p = build_pair(random_triple(*shape, seed=2, twist=twist))
    for apply, adj, d in ((apply_v1, v1_adjoint, p.d1), (apply_v2, v2_adjoint, p.d2)):
        x = _vec(p, (d,), rng)
        y = _vec(p, (), rng, 3)
        lhs = apply(p, x).inner(y)
        rhs = x.inner(adj(p, y))
        assert abs(lhs - rhs) < 1e-10 * max(1, abs(lhs))


@pytest.mark.parametrize("shape", SHAPES)
@pytest.mark.parametrize("twist", [None, "random"])
def test_isometries(shape, twist, rng):
    p = build_pair(random_triple(*shape, seed=3, twist=twist))
    for apply, d in ((apply_v1, p.d1), (apply_v2, p.d2)):
        x = _vec(p, (d,), rng)
        assert abs(apply(p, x).norm() - x.norm()) < 1e-10 * x.norm()
    x = _vec(p, (p.d1, p.d2), rng)
    assert abs(apply_product(p, x).norm() - x.norm()) < 1e-10 * x.norm()


@pytest.mark.parametrize("shape", SHAPES)
@pytest.mark.parametrize("twist", [None, "random"])
def test_product_is_shift(shape, twist, rng):
    p = build_pair(random_triple(*shape, seed=4, twist=twist))
    x = _vec(p, (p.d1, p.d2), rng)
    flat = GradedVector(x.shape, {n: a.reshape(p.d1 * p.d2, -1) for n, a in x.terms.items()}, (p.d1 * p.d2,))
    assert _dist(apply_product(p, x), shift(p, flat)) < 1e-10 * x.norm()


def _commutation_residual(p, rng):
    # V1 (I (x) V2) x  against  V2 (I (x) V1) (t* (x) I) x
    x = _vec(p, (p.d1, p.d2), rng)
    lhs = apply_product(p, x)
    y = apply_twist(p, x, inverse=True)
    rhs = apply_v2(p, apply_v1(p, y))
    return _dist(lhs, rhs) / x.norm()


@pytest.mark.parametrize("shape", SHAPES)
@pytest.mark.parametrize("twist", [None, "random"])
def test_commutation_interleaved(shape, twist, rng):
    p = build_pair(random_triple(*shape, seed=5, twist=twist))
    assert _commutation_residual(p, rng) < 1e-10


@pytest.mark.parametrize("shape", [(2, 2, 3, 1), (1, 2, 4, 4)])
def test_block_convention_breaks_commutation(shape, rng):
    p = build_pair(random_triple(*shape, seed=5), shuffle="block")
    assert _commutation_residual(p, rng) > 1e-2


def test_block_convention_agrees_when_d2_is_one(rng):
    p = build_pair(random_triple(2, 1, 3, 0, seed=5, twist="random"), shuffle="block")
    assert _commutation_residual(p, rng) < 1e-10


def test_degree_budget():
    p = build_pair(t_id(), max_degree=1)
    x = GradedVector.basis((1, 1, 2), 1, 1, (0,), (1,))
    with pytest.raises(DegreeBudgetExceeded):
        apply_v2(p, x)


def test_shape_checks():
    p = build_pair(t_id())
    with pytest.raises(InvalidInput):
        apply_v2(p, GradedVector.zeros((1, 1, 3), (1,)))
    with pytest.raises(InvalidInput):
        apply_product(p, GradedVector.zeros((1, 1, 2), (1,)))


def test_graded_vector_dense_round_trip(rng):
    v = GradedVector.random((2, 2, 3), 2, rng, (2,))
    w = GradedVector.from_dense((2, 2, 3), v.to_dense(2), 2)
    assert _dist(v, w) == 0


def test_twist_helpers():
    f = flip_twist(2, 3)
    assert np.allclose(f.conj().T @ f, np.eye(6))
    assert np.allclose(scalar_twist(1j), [[1j]])
    assert np.allclose(rotation(np.pi / 2), [[0, -1], [1, 0]])
