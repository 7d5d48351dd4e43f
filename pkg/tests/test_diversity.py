import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from divskill.diversity import (
    cns_step_intrinsic,
    domino_intrinsic,
    domino_intrinsic_batch,
    knn_entropy,
    nearest_other,
    nn_diversity,
    step_intrinsic_series,
)


# -- brute force oracles -------------------------------------------------------


def brute_nn_diversity(x):
    n = len(x)
    total = 0.0
    for i in range(n):
        best = np.inf
        for j in range(n):
            if i != j:
                best = min(best, float(np.sum((x[i] - x[j]) ** 2)))
        total += best
    return total / n


def brute_knn_entropy(x, k, eps=1e-9):
    n = len(x)
    total = 0.0
    for i in range(n):
        dists = sorted(float(np.linalg.norm(x[i] - x[j])) for j in range(n) if j != i)
        total += np.log(dists[k - 1] + eps)
    return total


# -- nn_diversity ---------------------------------------------------------------


def test_duplicates_give_zero():
    assert nn_diversity([[1.0, 2.0], [1.0, 2.0]]) == 0.0


def test_three_four_five():
    assert nn_diversity([[0.0, 0.0], [3.0, 4.0]]) == 25.0


def test_three_points_on_line():
    assert nn_diversity([[0.0], [1.0], [3.0]]) == pytest.approx(2.0)


def test_nn_diversity_matches_oracle_random():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = rng.integers(2, 64)
        f = rng.integers(1, 16)
        x = rng.normal(size=(n, f))
        np.testing.assert_allclose(nn_diversity(x), brute_nn_diversity(x), rtol=0, atol=1e-12)


def test_nn_diversity_rejects_single():
    with pytest.raises(ValueError):
        nn_diversity([[1.0, 2.0]])


@settings(max_examples=40, deadline=None)
@given(arrays(float, (5, 3), elements=st.floats(-10, 10)))
def test_nn_diversity_nonnegative(x):
    assert nn_diversity(x) >= 0.0


# -- knn_entropy ------------------------------------------------------------------


def test_knn_entropy_line():
    assert knn_entropy([0.0, 1.0, 3.0], k=1) == pytest.approx(np.log(1) + np.log(1) + np.log(2), abs=1e-8)


def test_knn_entropy_degenerate_guard():
    val = knn_entropy(np.zeros((4, 2)), k=1)
    assert np.isfinite(val)
    assert val == pytest.approx(4 * np.log(1e-9))


def test_knn_entropy_matches_oracle_random_3d():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(50, 3))
    np.testing.assert_allclose(knn_entropy(x, k=1), brute_knn_entropy(x, 1), atol=1e-12)


def test_knn_entropy_various_k_match_oracle():
    rng = np.random.default_rng(2)
    for _ in range(100):
        n = rng.integers(4, 40)
        f = rng.integers(1, 8)
        k = int(rng.integers(1, min(4, n - 1) + 1))
        x = rng.normal(size=(n, f))
        np.testing.assert_allclose(knn_entropy(x, k=k), brute_knn_entropy(x, k), atol=1e-12)


def test_knn_entropy_rejects_small_sets():
    with pytest.raises(ValueError):
        knn_entropy([[0.0], [1.0]], k=2)


@settings(max_examples=30, deadline=None)
@given(arrays(float, (6, 2), elements=st.floats(-5, 5)), st.floats(-3, 3), st.floats(-3, 3))
def test_knn_entropy_translation_invariant(x, dx, dy):
    shifted = x + np.array([dx, dy])
    np.testing.assert_allclose(knn_entropy(x), knn_entropy(shifted), atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(arrays(float, (7, 2), elements=st.floats(-5, 5)), st.permutations(list(range(7))))
def test_knn_entropy_permutation_invariant(x, perm):
    np.testing.assert_allclose(knn_entropy(x), knn_entropy(x[perm]), atol=1e-9)


# -- step intrinsic ----------------------------------------------------------------


def test_step_intrinsic_zero_distance_guard():
    traj = np.array([[1.0], [2.0]])
    other = np.array([[1.0], [5.0]])
    assert cns_step_intrinsic(traj, [other], t=0) == pytest.approx(np.log(1e-9))


def test_step_intrinsic_single_pair():
    traj = np.array([[0.0]])
    other = np.array([[2.0]])
    assert cns_step_intrinsic(traj, [other], t=0) == pytest.approx(np.log(2.0 + 1e-9))


def test_step_intrinsic_min_over_skills():
    traj = np.array([[0.0]])
    others = [np.array([[1.0]]), np.array([[5.0]])]
    assert cns_step_intrinsic(traj, others, t=0) == pytest.approx(np.log(1.0 + 1e-9))


def test_step_intrinsic_length_mismatch():
    with pytest.raises(ValueError):
        step_intrinsic_series(np.zeros((3, 1)), [np.zeros((2, 1))])


def test_step_intrinsic_over_all_timesteps():
    traj = np.array([[0.0], [10.0]])
    other = np.array([[9.0], [100.0]])
    same_t = step_intrinsic_series(traj, [other])
    all_t = step_intrinsic_series(traj, [other], over_all_timesteps=True)
    assert same_t[1] == pytest.approx(np.log(90.0 + 1e-9))
    assert all_t[1] == pytest.approx(np.log(1.0 + 1e-9))


# -- domino intrinsic -----------------------------------------------------------------


def test_domino_duplicate_skills_zero():
    phi_bar = np.array([[1.0, 1.0], [1.0, 1.0]])
    assert domino_intrinsic([3.0, -2.0], 0, phi_bar) == 0.0


def test_domino_hand_computed():
    phi_bar = np.array([[2.0, 0.0], [0.0, 0.0], [5.0, 5.0]])
    assert domino_intrinsic([1.0, 0.0], 0, phi_bar) == pytest.approx(2.0)


def test_domino_linearity():
    rng = np.random.default_rng(3)
    phi_bar = rng.normal(size=(4, 3))
    p1, p2 = rng.normal(size=3), rng.normal(size=3)
    a, b = 0.3, -1.7
    lhs = domino_intrinsic(a * p1 + b * p2, 2, phi_bar)
    rhs = a * domino_intrinsic(p1, 2, phi_bar) + b * domino_intrinsic(p2, 2, phi_bar)
    assert lhs == pytest.approx(rhs)


def test_domino_accepts_stats_object():
    class Stats:
        phi_bar = np.array([[0.0, 0.0], [1.0, 0.0]])

    assert domino_intrinsic([1.0, 0.0], 1, Stats()) == pytest.approx(1.0)


def test_domino_alignment_positive_for_farthest_skill():
    phi_bar = np.array([[0.0, 0.0], [1.0, 0.0], [10.0, 10.0]])
    j = nearest_other(phi_bar)[2]
    direction = phi_bar[2] - phi_bar[j]
    assert domino_intrinsic(0.5 * direction, 2, phi_bar) > 0.0


def test_domino_purity():
    rng = np.random.default_rng(4)
    phi_bar = rng.normal(size=(5, 2))
    phi = rng.normal(size=2)
    assert domino_intrinsic(phi, 3, phi_bar) == domino_intrinsic(phi, 3, phi_bar)


def test_domino_batch_matches_scalar():
    rng = np.random.default_rng(5)
    phi_bar = rng.normal(size=(6, 3))
    phis = rng.normal(size=(20, 3))
    zs = rng.integers(0, 6, size=20)
    batch = domino_intrinsic_batch(phis, zs, phi_bar)
    for i in range(20):
        assert batch[i] == pytest.approx(domino_intrinsic(phis[i], int(zs[i]), phi_bar))


def test_domino_rejects_single_skill():
    with pytest.raises(ValueError):
        domino_intrinsic([1.0], 0, np.array([[1.0]]))
