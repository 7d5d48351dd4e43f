import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from divskill.envs import (
    EnvSpec,
    EpisodeFinishedError,
    MazeConfig,
    MazeEnv,
    MazeState,
    PushEnv,
    corridor_class,
    count_corridor_classes,
    make_env,
    maze_reset,
    maze_step,
    push_step,
    rollout,
    rollout_open_loop_batch,
)


def test_env_spec_validation():
    with pytest.raises(ValueError):
        EnvSpec(obs_dim=0, action_dim=2, episode_len=10, feature_dim=2)


# -- maze reset ---------------------------------------------------------------


def test_reset_no_jitter_exact():
    s = maze_reset(seed=0, jitter=False)
    np.testing.assert_array_equal(s.q, np.array(MazeConfig().start))
    np.testing.assert_array_equal(s.qdot, np.zeros(2))
    assert s.t == 0


def test_reset_jitter_deterministic_and_bounded():
    a = maze_reset(seed=42, jitter=True)
    b = maze_reset(seed=42, jitter=True)
    np.testing.assert_array_equal(a.q, b.q)
    offsets = [maze_reset(seed=s, jitter=True).q - np.array(MazeConfig().start) for s in range(50)]
    assert np.abs(np.stack(offsets)).max() <= 0.5


# -- maze step reward ---------------------------------------------------------


def test_reward_at_target_non_final():
    env = MazeEnv()
    # Place the agent so a zero action keeps it at the target x with no obstacle contact.
    state = MazeState(q=np.array([4.5, -4.0]), qdot=np.zeros(2), t=0)
    res = env.step(state, np.zeros(2))
    assert res.reward == 2.0


def test_reward_inside_obstacle_clips_to_floor():
    env = MazeEnv()
    state = MazeState(q=np.array([0.0, 0.0]), qdot=np.zeros(2), t=0)
    res = env.step(state, np.zeros(2))
    assert res.reward == -1.0


def test_zero_action_keeps_position():
    env = MazeEnv()
    state = MazeState(q=np.array([-2.0, 1.0]), qdot=np.zeros(2), t=3)
    res = env.step(state, np.zeros(2))
    np.testing.assert_array_equal(res.next_state.q, state.q)


def test_step_after_done_raises():
    env = MazeEnv(MazeConfig(episode_len=5))
    state = MazeState(q=np.zeros(2), qdot=np.zeros(2), t=5)
    with pytest.raises(EpisodeFinishedError):
        env.step(state, np.zeros(2))


def test_final_step_uses_final_beta():
    cfg = MazeConfig(episode_len=1)
    env = MazeEnv(cfg)
    state = MazeState(q=np.array([-3.5, -4.0]), qdot=np.zeros(2), t=0)
    res = env.step(state, np.zeros(2))
    # 10 * (-3.5 - 4.5) + 4.5 = -75.5, clipped to the floor
    assert res.done
    assert res.reward == -1.0


@settings(max_examples=60, deadline=None)
@given(
    x=st.floats(-4.5, 4.5),
    y=st.floats(-4.5, 4.5),
    ax=st.floats(-1, 1),
    ay=st.floats(-1, 1),
    t=st.integers(0, 99),
)
def test_maze_reward_and_position_bounds(x, y, ax, ay, t):
    env = MazeEnv()
    res = env.step(MazeState(q=np.array([x, y]), qdot=np.zeros(2), t=t), np.array([ax, ay]))
    assert -1.0 <= res.reward <= 2.0
    assert (np.abs(res.next_state.q) <= 4.5).all()


def test_high_penalty_scaling_visible():
    cfg = MazeConfig().scaled_penalty(10.0)
    env = MazeEnv(cfg)
    state = MazeState(q=np.array([0.0, 0.0]), qdot=np.zeros(2), t=0)
    assert env.step(state, np.zeros(2)).reward == -10.0
    assert cfg.beta_coll == 1000.0


# -- push ---------------------------------------------------------------------


def test_push_no_contact_reward_and_static_puck():
    env = PushEnv()
    state = env.reset()
    far = state.pusher + np.array([-2.0, 0.0])
    state = type(state)(pusher=far, puck=state.puck, puck0=state.puck0, t=0)
    res = push_step(state, np.array([0.0, 0.0]))
    np.testing.assert_array_equal(res.next_state.puck, state.puck)
    assert 0.0 < res.reward <= 0.01


def test_push_straight_line_telescoping():
    env = PushEnv()
    state = env.reset()
    dist_total = 0.0
    for _ in range(30):
        res = env.step(state, np.array([1.0, 0.0]))
        dist_total += res.reward
        state = res.next_state
    delta_k = np.linalg.norm(state.puck - state.puck0)
    touch_part = sum_touch = None  # telescoping applies to the distance term only
    # subtract the touch bonus per step to isolate the telescoped distance sum
    sum_touch = 0.0
    s = env.reset()
    for _ in range(30):
        r = env.step(s, np.array([1.0, 0.0]))
        sep = np.linalg.norm(r.next_state.puck - r.next_state.pusher)
        sum_touch += 0.01 * (1.0 - np.tanh(sep**2))
        s = r.next_state
    np.testing.assert_allclose(dist_total - sum_touch, 5.0 * delta_k, atol=1e-9)
    assert state.puck[1] == 0.0  # pushed along the x axis


def test_push_zero_action_no_overlap_static():
    env = PushEnv()
    state = env.reset()
    res = env.step(state, np.zeros(2))
    np.testing.assert_array_equal(res.next_state.pusher, state.pusher)
    np.testing.assert_array_equal(res.next_state.puck, state.puck)


def test_push_resolves_penetration():
    env = PushEnv()
    rng = np.random.default_rng(0)
    state = env.reset()
    min_gap = env.config.pusher_radius + env.config.puck_radius
    for _ in range(200):
        res = env.step(state, rng.uniform(-1, 1, 2))
        state = env.reset() if res.done else res.next_state
        assert np.linalg.norm(state.puck - state.pusher) >= min_gap - 1e-9


def test_push_puck_only_moves_on_contact():
    env = PushEnv()
    rng = np.random.default_rng(1)
    state = env.reset()
    for _ in range(100):
        prev_puck = state.puck.copy()
        res = env.step(state, rng.uniform(-1, 1, 2))
        state = res.next_state
        moved = not np.array_equal(prev_puck, state.puck)
        if moved:
            gap = np.linalg.norm(state.puck - state.pusher)
            np.testing.assert_allclose(
                gap, env.config.pusher_radius + env.config.puck_radius, atol=1e-9
            )


# -- rollout ------------------------------------------------------------------


def test_rollout_zero_action_from_center_start():
    cfg = MazeConfig(start=(0.0, -4.0))  # x = x_target - 4.5, away from obstacles
    env = MazeEnv(cfg)
    r = rollout(env, actions=np.zeros((100, 2)))
    assert r.ret == -1.0
    np.testing.assert_allclose(r.rewards[:-1], 0.0)
    assert r.rewards[-1] == -1.0


def test_rollout_determinism():
    env = MazeEnv()

    def policy(obs, rng):
        return rng.uniform(-1, 1, 2)

    a = rollout(env, policy=policy, seed=9, jitter=True)
    b = rollout(env, policy=policy, seed=9, jitter=True)
    np.testing.assert_array_equal(a.obs, b.obs)
    np.testing.assert_array_equal(a.rewards, b.rewards)


def test_rollout_return_is_reward_sum_and_constant_state_features():
    cfg = MazeConfig(start=(3.0, -4.0))
    env = MazeEnv(cfg)
    r = rollout(env, actions=np.zeros((100, 2)))
    assert r.ret == r.rewards.sum()
    np.testing.assert_allclose(r.mean_features, np.array([3.0, -4.0]))


def test_rollout_batch_matches_single():
    env = MazeEnv()
    rng = np.random.default_rng(2)
    seqs = rng.uniform(-1, 1, size=(5, 100, 2))
    batch = rollout_open_loop_batch(env, seqs)
    for i in range(5):
        single = rollout(env, actions=seqs[i])
        np.testing.assert_array_equal(batch[i].obs, single.obs)
        np.testing.assert_array_equal(batch[i].rewards, single.rewards)
        np.testing.assert_array_equal(batch[i].features, single.features)


def test_rollout_batch_matches_single_push():
    env = PushEnv()
    rng = np.random.default_rng(3)
    seqs = rng.uniform(-1, 1, size=(4, 100, 2))
    batch = rollout_open_loop_batch(env, seqs)
    for i in range(4):
        single = rollout(env, actions=seqs[i])
        np.testing.assert_allclose(batch[i].rewards, single.rewards, atol=1e-12)


def test_rollout_rejects_wrong_length():
    with pytest.raises(ValueError):
        rollout(MazeEnv(), actions=np.zeros((50, 2)))


# -- corridor classes ---------------------------------------------------------


def _straight_line(y):
    xs = np.linspace(-4.0, 4.0, 120)
    return np.stack([xs, np.full_like(xs, y)], axis=1)


def test_corridor_class_distinguishes_gaps():
    hi = corridor_class(_straight_line(1.35))
    lo = corridor_class(_straight_line(-1.35))
    assert hi is not None and lo is not None
    assert hi != lo


def test_corridor_class_incomplete_is_none():
    xs = np.linspace(-4.0, -1.0, 30)
    xy = np.stack([xs, np.zeros_like(xs)], axis=1)
    assert corridor_class(xy) is None


def test_count_corridor_classes():
    trajs = [_straight_line(y) for y in (1.35, 1.35, -1.35, 3.9)]
    trajs.append(np.stack([np.linspace(-4, -2, 10), np.zeros(10)], axis=1))
    assert count_corridor_classes(trajs) == 3


def test_make_env():
    assert isinstance(make_env("maze"), MazeEnv)
    assert isinstance(make_env("push"), PushEnv)
    assert make_env("maze", episode_len=7).config.episode_len == 7
    with pytest.raises(ValueError):
        make_env("cartpole")
