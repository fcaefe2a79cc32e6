import numpy as np
import pytest

from bclkit.errors import BudgetExceeded, InvalidInput
from bclkit.model import build_pair, letter_shuffle, random_triple, t_id, t_rot, t_swap, validate_triple
from bclkit.numcore import Frame
from bclkit.oracle import (
    compare,
    invariance_leak,
    nnz_estimate,
    oracle_defect,
    oracle_frames,
    residuals,
    shuffle_matrix,
    truncate,
)


def test_m1_shift_structure():
    # W2 = W: V2 is a unimodular multiple of the unilateral shift, V1 of the identity
    tr = truncate(build_pair(random_triple(1, 1, 1, 1, seed=0)), N=3)
    v1, v2 = tr.v1.toarray(), tr.v2.toarray()
    assert abs(abs(v1[0, 0]) - 1) < 1e-14 and np.allclose(v1, v1[0, 0] * np.eye(4))
    assert abs(abs(v2[1, 0]) - 1) < 1e-14 and np.allclose(v2, v2[1, 0] * np.eye(4, k=-1))
    tr0 = truncate(build_pair(random_triple(1, 1, 1, 0, seed=0)), N=3)
    w1 = tr0.v1.toarray()
    assert np.allclose(w1, w1[1, 0] * np.eye(4, k=-1))


def test_t_id_product_is_shift():
    tr = truncate(build_pair(t_id()), N=4)
    assert abs(tr.v - tr.shift).max() < 1e-15


@pytest.mark.parametrize("shape", [(1, 1, 3, 1), (2, 2, 3, 1), (1, 2, 4, 4)])
def test_columns_are_unit_vectors(shape):
    tr = truncate(build_pair(random_triple(*shape, seed=3, twist="random")), N=3)
    d1, d2 = shape[:2]
    for op, letters in ((tr.v1, d1), (tr.v2, d2), (tr.v, d1 * d2)):
        norms = np.sqrt(np.asarray(abs(op.multiply(op.conj())).sum(axis=0))).ravel()
        assert np.allclose(norms[tr.interior(letters)], 1, atol=1e-12)


def test_oracle_defect_named():
    assert np.linalg.norm(oracle_defect(truncate(build_pair(t_id()), N=3))) < 1e-14
    assert np.allclose(oracle_defect(truncate(build_pair(t_swap()), N=3)), np.diag([-1, 1]), atol=1e-12)
    for theta in (np.pi / 6, np.pi / 4):
        c = oracle_defect(truncate(build_pair(t_rot(theta)), N=3))
        assert np.allclose(np.linalg.eigvalsh(c), [-np.sin(theta), np.sin(theta)], atol=1e-9)


def test_oracle_defect_needs_depth_three():
    with pytest.raises(InvalidInput):
        oracle_defect(truncate(build_pair(t_id()), N=2))


@pytest.mark.parametrize("shape", [(1, 1, 4, 2), (2, 2, 3, 1), (1, 2, 3, 3), (2, 1, 3, 0)])
def test_residuals_small_at_depth_five(shape):
    pair = build_pair(random_triple(*shape, seed=5))
    r = residuals(truncate(pair, N=5))
    assert r["ok"] and not r["reduced_coverage"]
    assert max(v for k, v in r.items() if k not in ("ok", "reduced_coverage")) <= 1e-9


def test_residuals_detect_corruption():
    t = random_triple(2, 2, 3, 1, seed=2)
    u = t.u.copy()
    u[0, 0] += 1e-3
    bad = validate_triple(2, 2, u, t.w2_frame, twist=t.twist, strict=False)
    r = residuals(truncate(build_pair(bad, check=False), N=3))
    assert not r["ok"]
    assert max(r["iso_v1"], r["iso_v2"], r["commute_12"]) >= 1e-4


def test_depth_two_is_reduced_coverage():
    r = residuals(truncate(build_pair(random_triple(1, 1, 3, 1, seed=0)), N=2))
    assert r["reduced_coverage"] and r["ok"]
    with pytest.raises(InvalidInput):
        truncate(build_pair(t_id()), N=1)


def test_apply_and_formula_routes_agree():
    pair = build_pair(random_triple(2, 2, 3, 1, seed=7, twist="random"))
    a = truncate(pair, N=3, method="formula")
    b = truncate(pair, N=3, method="apply")
    for name in ("v1", "v2", "v", "shift"):
        assert abs(getattr(a, name) - getattr(b, name)).max() < 1e-12


@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_shuffle_matrix_matches_model(n):
    t = random_triple(2, 2, 3, 1, seed=11, twist="random")
    s = shuffle_matrix(n, t.twist, 2, 2).toarray()
    assert np.allclose(s, letter_shuffle(n, t), atol=1e-13)
    assert np.allclose(s.conj().T @ s, np.eye(s.shape[0]), atol=1e-12)


def test_budgets():
    pair = build_pair(random_triple(2, 2, 3, 1, seed=0))
    with pytest.raises(BudgetExceeded):
        truncate(pair, N=5, budget=1000)
    dense = build_pair(random_triple(2, 3, 5, 2, seed=0, twist="random"))
    assert nnz_estimate(dense, 4) > 4_000_000
    with pytest.raises(BudgetExceeded):
        truncate(dense, N=4)
    with pytest.raises(InvalidInput):
        truncate(pair, N=3, method="nope")


def test_compare_t_id():
    pair = build_pair(t_id())
    out = compare(pair, truncate(pair, N=4))
    assert out["ok"] and out["max_deviation"] <= 1e-12


def test_compare_index_on_2231():
    for seed in range(3):
        pair = build_pair(random_triple(2, 2, 3, 1, seed=seed))
        out = compare(pair, truncate(pair, N=4))
        assert out["ok"]
        assert out["index_fringe"] == out["index_oracle"] == 1


def test_oracle_frames_swap():
    f = oracle_frames(truncate(build_pair(t_swap()), N=3))
    assert f["e_plus"].k == 1 and f["e_minus"].k == 1


def test_invariance_leak():
    assert invariance_leak(truncate(build_pair(t_id()), N=4), Frame.coordinates(2, [0])) < 1e-14
    assert invariance_leak(truncate(build_pair(t_rot(np.pi / 4)), N=4), Frame.coordinates(2, [0])) > 0.1
