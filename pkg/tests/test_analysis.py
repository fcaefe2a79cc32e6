import numpy as np
import pytest

from bclkit import analysis as A
from bclkit.errors import DimensionMismatch, IndexMismatch, InvalidInput, PairingViolation
from bclkit.model import (
    build_pair,
    conjugate_triple,
    flip_twist,
    haar_unitary,
    random_triple,
    t_id,
    t_rot,
    t_swap,
    validate_triple,
)
from bclkit.numcore import Frame, orthonormalize_columns

ANGLES = [np.pi / 6, np.pi / 4, np.pi / 2, 0.3]


def closed_form_defect(u, p=1):
    # scalar case: C = P - U* P U with P onto the last p coordinates
    m = u.shape[0]
    pr = np.diag([0.0] * (m - p) + [1.0] * p)
    return pr - u.conj().T @ pr @ u


# ---------------------------------------------------------------------------
# defect operator
# ---------------------------------------------------------------------------


def test_defect_t_id_is_zero():
    assert np.linalg.norm(A.defect_operator(build_pair(t_id()))) < 1e-15


def test_defect_t_swap():
    c = A.defect_operator(build_pair(t_swap()))
    assert np.allclose(c, np.diag([-1, 1]), atol=1e-12)
    assert np.allclose(c, closed_form_defect(t_swap().u), atol=1e-12)


@pytest.mark.parametrize("theta", ANGLES)
def test_defect_t_rot_eigenvalues(theta):
    pair = build_pair(t_rot(theta))
    c = A.defect_operator(pair)
    assert np.allclose(np.linalg.eigvalsh(c), [-np.sin(theta), np.sin(theta)], atol=1e-9)
    assert np.linalg.norm(c - closed_form_defect(pair.triple.u)) < 1e-12


@pytest.mark.parametrize("seed", range(6))
def test_defect_routes_agree(seed):
    pair = build_pair(random_triple(2, 2, 3, 1, seed=seed, twist="random"))
    assert np.linalg.norm(A.defect_operator(pair) - A.defect_operator_alt(pair)) < 1e-12
    assert max(A.wandering_residuals(pair).values()) < 1e-12


def test_defect_report_examples():
    r = A.defect_report(np.zeros((2, 2)))
    assert (r.dim_e1, r.dim_em1, r.signature, r.index) == (0, 0, (0, 0, 2), 0)
    r = A.defect_report(np.diag([-1.0, 1.0]))
    assert (r.dim_e1, r.dim_em1, r.signature, r.index) == (1, 1, (1, 1, 0), 0)
    r = A.defect_report(A.defect_operator(build_pair(t_rot(np.pi / 4))))
    assert np.allclose(r.eigenvalues, [-0.70710678118, 0.70710678118], atol=1e-9)
    assert (r.dim_e1, r.dim_em1, r.paired, r.index) == (0, 0, True, 0)


def test_defect_report_pairing_violation():
    with pytest.raises(PairingViolation):
        A.defect_report(np.diag([0.5, -0.2, 0.0]))
    r = A.defect_report(np.diag([0.5, -0.2, 0.0]), check_pairing=False)
    assert not r.paired


def test_h5_eigenspaces_on_swap():
    pair = build_pair(t_swap())
    r = A.defect_report(A.defect_operator(pair), pair=pair)
    assert r.h5["e1_distance"] < 1e-12 and r.h5["em1_distance"] < 1e-12
    assert r.h5["e1_dim_intersection"] == 1 and r.h5["em1_dim_intersection"] == 1


# ---------------------------------------------------------------------------
# fringe operators, commutators, index
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("theta", ANGLES)
def test_fringe_t_rot(theta):
    _, f2 = A.fringe_operators(build_pair(t_rot(theta)))
    assert f2.shape == (1, 1)
    assert abs(abs(f2[0, 0]) - abs(np.cos(theta))) < 1e-12


def test_fringe_t_rot_half_pi_kernel():
    pair = build_pair(t_rot(np.pi / 2))
    _, f2 = A.fringe_operators(pair)
    assert abs(f2[0, 0]) < 1e-12
    rec = A.fredholm_record(pair)
    assert (rec.ker_f2, rec.coker_f2, rec.index, rec.dim_em1) == (1, 1, 0, 1)


def test_fringe_t_id_unitary():
    f1, f2 = A.fringe_operators(build_pair(t_id()))
    assert np.allclose(np.abs(f2), 1) and np.allclose(np.abs(f1), 1)


def test_commutator_defect_examples():
    assert np.linalg.norm(A.commutator_defect(build_pair(t_id()), 1, 2)) < 1e-15
    for theta in (0.3, 1.1):
        m = A.commutator_defect(build_pair(t_rot(theta)), 1, 2)
        assert abs(np.linalg.norm(m) ** 2 - np.sin(theta) ** 2) < 1e-12
    with pytest.raises(InvalidInput):
        A.commutator_defect(build_pair(t_id()), 1, 1)


@pytest.mark.parametrize("shape", [(1, 1, 4, 2), (2, 2, 3, 1), (1, 2, 4, 4), (2, 3, 5, 2), (2, 1, 3, 0)])
def test_identities_random(shape):
    for seed in range(3):
        pair = build_pair(random_triple(*shape, seed=seed, twist="random" if seed % 2 else None))
        c = A.defect_operator(pair)
        for i in (1, 2):
            assert A.k7_residual(pair, i) < 1e-9
            assert A.kk7_residual(pair, i) < 1e-9
            assert A.k8_residual(pair, i, c) < 1e-9
            assert max(A.w4_residual(pair, i, c).values()) < 1e-9
        assert max(A.k5_residual(pair).values()) < 1e-7
        assert max(A.remark_k3_residual(pair).values()) < 1e-9


def test_scalar_index_is_zero():
    for seed in range(10):
        assert A.fredholm_index(build_pair(random_triple(1, 1, 4, seed % 5, seed=seed))) == 0


def test_generic_2231_index_is_one():
    for seed in range(5):
        assert A.fredholm_index(build_pair(random_triple(2, 2, 3, 1, seed=seed))) == 1


def test_index_mismatch_on_corrupted_triple():
    t = random_triple(2, 2, 3, 1, seed=1)
    u = t.u.copy()
    u[[3, 5], :] = 0
    bad = validate_triple(2, 2, u, t.w2_frame, strict=False)
    with pytest.raises(IndexMismatch):
        A.fredholm_index(build_pair(bad, check=False))


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------


def test_classify_t_id():
    r = A.classify(build_pair(t_id()))
    assert r.doubly_commuting and r.defect_zero and r.consistent
    assert all(r.condition_flags) and all(r.u1_flags)


def test_classify_t_rot_and_swap():
    for t in (t_rot(np.pi / 4), t_swap()):
        r = A.classify(build_pair(t))
        assert not r.doubly_commuting and not r.defect_zero and r.consistent


def test_classify_doubly_commuting_random():
    for shape in [(1, 1, 3, 1), (1, 2, 3, 3), (2, 1, 3, 0)]:
        r = A.classify(build_pair(random_triple(*shape, seed=4, doubly_commuting=True)))
        assert r.doubly_commuting and r.consistent


def _negative_defect_triple():
    # W2 = span e3 sits inside L = span(e1, e3)
    e = np.eye(3)
    ul = np.vstack([e[0], e[2]])
    upper = np.vstack([np.kron(np.eye(2)[b], e[1]) for b in range(2)])
    u = np.vstack([upper, np.kron(np.eye(2), ul)])
    return validate_triple(2, 2, u, e[:, 2:], twist=flip_twist(2, 2), name="neg")


def test_negative_defect_counterexample_to_tt():
    pair = build_pair(_negative_defect_triple())
    c = A.defect_operator(pair)
    assert np.allclose(np.linalg.eigvalsh(c), [-1, 0, 0], atol=1e-12)
    r = A.classify(pair)
    assert r.consistent and all(r.neg_flags)
    assert r.defect_negdef_on_supp
    assert not r.tt_ok


# ---------------------------------------------------------------------------
# congruence
# ---------------------------------------------------------------------------


def test_congruence_signature_examples():
    assert A.congruence_signature(np.diag([1.0, -1.0, 0.0])) == (1, 1, 1)
    assert A.congruence_signature(A.defect_operator(build_pair(t_rot(np.pi / 4)))) == (1, 1, 0)
    assert A.congruence_signature(np.zeros((3, 3))) == (0, 0, 3)


def test_congruence_witness_examples():
    c, c2 = np.diag([2.0, -3.0]), np.diag([1.0, -1.0])
    x = A.congruence_witness(c, c2)
    assert np.linalg.norm(x @ c @ x.conj().T - c2) < 1e-7
    assert A.congruence_witness(np.diag([1.0, -1.0]), np.eye(2)) is None
    ca = A.defect_operator(build_pair(t_rot(np.pi / 4)))
    cb = A.defect_operator(build_pair(t_swap()))
    x = A.congruence_witness(ca, cb)
    assert x is not None and np.linalg.norm(x @ ca @ x.conj().T - cb) < 1e-7
    with pytest.raises(DimensionMismatch):
        A.congruence_witness(np.eye(2), np.eye(3))


# ---------------------------------------------------------------------------
# reducing subspaces and intertwiners
# ---------------------------------------------------------------------------


def test_reducing_examples():
    assert A.is_reducing_subspace(t_rot(0.3), Frame.full(2), depth=5)
    assert A.is_reducing_subspace(t_id(), Frame.coordinates(2, [0]), depth=5)
    assert not A.is_reducing_subspace(t_rot(np.pi / 4), Frame.coordinates(2, [0]))
    with pytest.raises(DimensionMismatch):
        A.is_reducing_subspace(t_id(), Frame.full(3))


def test_reducing_generic_frame_fails(rng):
    t = random_triple(1, 1, 4, 2, seed=8)
    g = orthonormalize_columns(rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2)))
    assert not A.is_reducing_subspace(t, g)


def test_intertwiner_examples():
    pa = build_pair(random_triple(1, 1, 3, 1, seed=4, twist=np.exp(0.3j)))
    assert A.verify_intertwiner(pa, pa, np.eye(3))
    # Y commutes with P and maps the frames of W onto themselves
    y = np.eye(3, dtype=complex)
    y[:2, :2] = haar_unitary(2, np.random.default_rng(2))
    y[2, 2] = np.exp(1j)
    pb = build_pair(conjugate_triple(pa.triple, y))
    assert A.verify_intertwiner(pa, pb, y)
    assert not A.verify_intertwiner(build_pair(t_id()), build_pair(t_rot(np.pi / 4)), np.eye(2))
