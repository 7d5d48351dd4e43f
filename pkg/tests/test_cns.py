import numpy as np
import pytest

from divskill.cns import (
    CnsConfig,
    LagrangeState,
    SkillStats,
    blend_fitness,
    lambda_update,
    run_cns,
    sigmoid,
)
from divskill.envs import MazeEnv, MazeConfig


# -- blend_fitness ------------------------------------------------------------


def test_blend_equal_weights_at_lambda_zero():
    r_int = np.array([0.0, 1.0])
    r_ext = np.array([1.0, 0.0])
    out = blend_fitness(r_int, r_ext, sigmoid(0.0))
    np.testing.assert_allclose(out, [0.0, 0.0], atol=1e-12)


def test_blend_pure_extrinsic_ranking():
    rng = np.random.default_rng(0)
    r_int = rng.normal(size=6)
    r_ext = rng.normal(size=6)
    out = blend_fitness(r_int, r_ext, 1.0)
    assert (np.argsort(out) == np.argsort(r_ext)).all()


def test_blend_near_extrinsic_at_lambda_max():
    rng = np.random.default_rng(1)
    r_int = rng.normal(size=8)
    r_ext = rng.normal(size=8)
    out = blend_fitness(r_int, r_ext, sigmoid(6.0))
    assert (np.argsort(out) == np.argsort(r_ext)).all()


def test_blend_rejects_mismatch():
    with pytest.raises(ValueError):
        blend_fitness(np.zeros(3), np.zeros(4), 0.5)


def test_blend_constant_vectors_degenerate():
    out = blend_fitness(np.ones(4), np.full(4, 2.0), 0.5)
    np.testing.assert_allclose(out, 0.0)


# -- lambda update ------------------------------------------------------------


def test_lambda_fixed_point_at_constraint():
    lag = LagrangeState.init(2, lr=5e-4, inner_steps=200)
    new = lambda_update(lag, v=[8.0, 8.0], v_star=10.0, alpha=0.8)
    np.testing.assert_array_equal(new.raw, lag.raw)


def test_lambda_arithmetic_example():
    lag = LagrangeState.init(2, lr=5e-4, inner_steps=200)
    new = lambda_update(lag, v=[0.0, 0.0], v_star=10.0, alpha=0.8)
    # step = 5e-4 * 200 * (0 - 8) = -0.8, so lambda increases by 0.8
    np.testing.assert_allclose(new.raw, [0.8, 0.8])


def test_lambda_clamps_at_bounds():
    lag = LagrangeState(raw=np.array([5.9, -5.9]), lr=1.0, inner_steps=100)
    new = lambda_update(lag, v=[0.0, 100.0], v_star=10.0, alpha=1.0)
    np.testing.assert_allclose(new.raw, [6.0, -6.0])


def test_lambda_pinned_first_skill():
    lag = LagrangeState.init(3, lr=1.0, inner_steps=10, pin_first=True)
    new = lambda_update(lag, v=[0.0, 0.0, 0.0], v_star=10.0, alpha=1.0)
    assert new.raw[0] == 0.0
    assert new.ext_weights()[0] == 1.0
    assert (new.raw[1:] > 0).all()


def test_lambda_sign_direction():
    lag = LagrangeState.init(2, lr=0.1, inner_steps=1)
    new = lambda_update(lag, v=[0.0, 10.0], v_star=10.0, alpha=0.5)
    assert new.raw[0] > 0  # violated -> toward extrinsic
    assert new.raw[1] < 0  # satisfied -> toward diversity


def test_lambda_delay_skips():
    lag = LagrangeState.init(2, lr=0.1, inner_steps=1, delay=3)
    unchanged = lambda_update(lag, [0.0, 0.0], 10.0, 0.8, iteration=2)
    np.testing.assert_array_equal(unchanged.raw, lag.raw)
    changed = lambda_update(lag, [0.0, 0.0], 10.0, 0.8, iteration=3)
    assert (changed.raw != lag.raw).all()


def test_fixed_weight_short_circuits():
    lag = LagrangeState.init(2, lr=0.1, fixed_weight=0.5)
    np.testing.assert_array_equal(lag.ext_weights(), [0.5, 0.5])


# -- SkillStats ----------------------------------------------------------------


def test_skill_stats_ema_fold():
    stats = SkillStats.init(2, 2, kappa_phi=0.25, kappa_v=0.5)
    stats = stats.with_skill_update(0, [1.0, 2.0], 4.0)
    np.testing.assert_allclose(stats.phi_bar[0], [0.25, 0.5])
    assert stats.v[0] == 2.0
    stats = stats.with_skill_update(0, [1.0, 2.0], 4.0)
    np.testing.assert_allclose(stats.phi_bar[0], [0.4375, 0.875])
    assert stats.v[0] == 3.0


def test_vstar_running_max():
    stats = SkillStats.init(2, 1, 0.5, 0.5).with_vstar(2.0)
    stats = replaced = stats.with_skill_update(0, [0.0], 6.0)  # v0 EMA = 3.0
    stats = stats.with_vstar_max()
    assert stats.v_star == 3.0
    stats = stats.with_skill_update(0, [0.0], 0.0).with_vstar_max()
    assert stats.v_star == 3.0  # never decreases


# -- run_cns -------------------------------------------------------------------


def small_env():
    return MazeEnv(MazeConfig(episode_len=30))


def small_config(**kw):
    defaults = dict(
        n_skills=3,
        iterations=8,
        popsize=4,
        elite_ratio=0.5,
        sigma0=0.6,
        spline_controls=4,
        kappa_phi=0.3,
        kappa_v=0.3,
        lambda_inner_steps=50,
    )
    defaults.update(kw)
    return CnsConfig(**defaults)


def test_run_cns_archive_count():
    cfg = small_config(n_skills=2, iterations=5)
    result = run_cns(cfg, small_env(), alpha=0.8, seed=0)
    assert len(result.archive) == 2 * 5 * 4


def test_run_cns_rejects_single_skill():
    with pytest.raises(ValueError):
        CnsConfig(n_skills=1)


def test_run_cns_vstar_monotone():
    result = run_cns(small_config(), small_env(), alpha=0.8, seed=1)
    trace = result.v_star_trace
    assert all(b >= a for a, b in zip(trace, trace[1:]))


def test_run_cns_pinned_weight_every_iteration():
    result = run_cns(small_config(), small_env(), alpha=0.8, seed=2)
    for row in result.metrics:
        assert row["sigma_lambda"][0] == 1.0
        assert (row["sigma_lambda"] > 0).all() and (row["sigma_lambda"] <= 1).all()


def test_run_cns_lambda_bounds_and_signs():
    result = run_cns(small_config(), small_env(), alpha=0.8, seed=3)
    lo, hi = -6.0, 6.0
    for gap, dlam in result.lambda_events:
        # skill 0 pinned; others move against the gap sign unless clamped
        for g, d in zip(gap[1:], dlam[1:]):
            if g > 0:
                assert d <= 0
            elif g < 0:
                assert d >= 0
            else:
                assert d == 0
    assert (result.lagrange.raw >= lo).all() and (result.lagrange.raw <= hi).all()


def test_run_cns_deterministic():
    a = run_cns(small_config(), small_env(), alpha=0.8, seed=7)
    b = run_cns(small_config(), small_env(), alpha=0.8, seed=7)
    np.testing.assert_array_equal(a.archive.returns(), b.archive.returns())
    np.testing.assert_array_equal(a.mean_controls, b.mean_controls)
    assert a.archive.content_hash() == b.archive.content_hash()


def test_run_cns_seeds_differ():
    a = run_cns(small_config(), small_env(), alpha=0.8, seed=7)
    b = run_cns(small_config(), small_env(), alpha=0.8, seed=8)
    assert a.archive.content_hash() != b.archive.content_hash()


def test_run_cns_fixed_blend_unpins():
    cfg = small_config(fixed_blend=0.5)
    result = run_cns(cfg, small_env(), alpha=0.8, seed=4)
    for row in result.metrics:
        np.testing.assert_array_equal(row["sigma_lambda"], 0.5)
