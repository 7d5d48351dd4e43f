"""Desk-scale deterministic environments: 2-D maze navigation and planar disk pushing.

Both environments are value types: states are immutable, stepping is a pure
function of (config, state, action), and batched array kernels back both the
single-step API and the vectorized rollout helpers, so the two paths agree
bit-for-bit.

Maze reward per step (evaluated at the post-step position):
    r = clip(beta_target * (x - x_target) - beta_coll * 1_coll + x_max, clip_lo, clip_hi)
with beta_target = 10 on the final step of an episode and 1 otherwise,
beta_coll = 100, x_max the admissible x bound, and clip range [-1, 2].

Push reward per step:
    r = 5 * (delta_t - delta_{t-1}) + 0.01 * (1 - tanh ||puck - pusher||^2)
with delta_t the puck's distance from its initial position (quasi-static
sticking contact: the puck is displaced along the contact normal just enough
to resolve penetration).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


class EpisodeFinishedError(RuntimeError):
    """Raised when stepping a state whose episode already ended."""


@dataclass(frozen=True)
class EnvSpec:
    obs_dim: int
    action_dim: int
    episode_len: int
    feature_dim: int

    def __post_init__(self):
        for name in ("obs_dim", "action_dim", "episode_len", "feature_dim"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class StepResult:
    next_state: object
    observation: np.ndarray
    reward: float
    features: np.ndarray
    done: bool


# ---------------------------------------------------------------------------
# Maze
# ---------------------------------------------------------------------------

# Two staggered obstacle columns; placed at x > -1 so the reward clip floor
# never masks the collision penalty. (x, y, radius) per circle.
MAZE_OBSTACLES = (
    (0.0, -2.7, 0.55),
    (0.0, 0.0, 0.55),
    (0.0, 2.7, 0.55),
    (2.25, -1.35, 0.55),
    (2.25, 1.35, 0.55),
    (2.25, 4.05, 0.55),
)


@dataclass(frozen=True)
class MazeConfig:
    episode_len: int = 100
    delta: float = 0.15
    bound: float = 4.5
    x_target: float = 4.5
    x_max: float = 4.5
    beta_coll: float = 100.0
    beta_target_final: float = 10.0
    beta_target_step: float = 1.0
    clip_lo: float = -1.0
    clip_hi: float = 2.0
    agent_radius: float = 0.1
    start: tuple[float, float] = (-3.5, 0.0)
    jitter_mag: float = 0.5
    obstacles: tuple[tuple[float, float, float], ...] = MAZE_OBSTACLES

    def scaled_penalty(self, factor: float) -> "MazeConfig":
        """Scale the collision penalty and the clip floor together.

        The floor must track beta_coll: with the default clip at -1, any
        penalty >= ~6 saturates identically and scaling would be a no-op.
        """
        return replace(self, beta_coll=self.beta_coll * factor, clip_lo=self.clip_lo * factor)


@dataclass(frozen=True)
class MazeState:
    q: np.ndarray  # position, shape (2,)
    qdot: np.ndarray  # last position delta, shape (2,)
    t: int


class MazeEnv:
    """Point navigation among penalized circular obstacles, velocity control."""

    name = "maze"

    def __init__(self, config: MazeConfig = MazeConfig()):
        self.config = config
        obs = np.asarray(config.obstacles, dtype=float)
        self._centers = obs[:, :2]
        self._radii = obs[:, 2] + config.agent_radius

    def spec(self) -> EnvSpec:
        return EnvSpec(obs_dim=4, action_dim=2, episode_len=self.config.episode_len, feature_dim=2)

    def reset(self, rng: np.random.Generator | None = None, jitter: bool = False) -> MazeState:
        q = np.array(self.config.start, dtype=float)
        if jitter:
            if rng is None:
                raise ValueError("jittered reset needs a Generator")
            q = q + rng.uniform(-self.config.jitter_mag, self.config.jitter_mag, size=2)
        q = np.clip(q, -self.config.bound, self.config.bound)
        return MazeState(q=q, qdot=np.zeros(2), t=0)

    def observe(self, state: MazeState) -> np.ndarray:
        return np.concatenate([state.q, state.qdot])

    def features(self, state: MazeState) -> np.ndarray:
        return state.q.copy()

    def collides(self, q) -> np.ndarray:
        """Collision indicator for one position (2,) or a batch (..., 2)."""
        q = np.asarray(q, dtype=float)
        d = np.linalg.norm(q[..., None, :] - self._centers, axis=-1)
        return (d < self._radii).any(axis=-1)

    def step_arrays(self, q, qdot, t, action):
        """Vectorized step kernel over leading batch axes.

        Returns (q_next, qdot_next, t_next, reward, done, collided).
        """
        cfg = self.config
        a = np.clip(np.asarray(action, dtype=float), -1.0, 1.0)
        q_next = np.clip(q + cfg.delta * a, -cfg.bound, cfg.bound)
        qdot_next = q_next - q
        t_next = t + 1
        final = t_next >= cfg.episode_len
        beta_t = np.where(final, cfg.beta_target_final, cfg.beta_target_step)
        coll = self.collides(q_next)
        r = beta_t * (q_next[..., 0] - cfg.x_target) - cfg.beta_coll * coll + cfg.x_max
        r = np.clip(r, cfg.clip_lo, cfg.clip_hi)
        return q_next, qdot_next, t_next, r, final, coll

    def step(self, state: MazeState, action) -> StepResult:
        if state.t >= self.config.episode_len:
            raise EpisodeFinishedError(f"episode ended at t={state.t}")
        q, qdot, t, r, done, _ = self.step_arrays(state.q, state.qdot, np.asarray(state.t), action)
        nxt = MazeState(q=q, qdot=qdot, t=int(t))
        return StepResult(
            next_state=nxt,
            observation=self.observe(nxt),
            reward=float(r),
            features=self.features(nxt),
            done=bool(done),
        )


def maze_reset(seed: int, jitter: bool, config: MazeConfig = MazeConfig()) -> MazeState:
    return MazeEnv(config).reset(np.random.default_rng(seed), jitter=jitter)


def maze_step(state: MazeState, action, config: MazeConfig = MazeConfig()) -> StepResult:
    return MazeEnv(config).step(state, action)


# ---------------------------------------------------------------------------
# Push
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PushConfig:
    episode_len: int = 100
    delta: float = 0.1
    pusher_radius: float = 0.25
    puck_radius: float = 0.35
    pusher_start: tuple[float, float] = (-0.6, 0.0)
    puck_start: tuple[float, float] = (0.0, 0.0)
    jitter_mag: float = 0.1
    dist_scale: float = 5.0
    touch_scale: float = 0.01


@dataclass(frozen=True)
class PushState:
    pusher: np.ndarray
    puck: np.ndarray
    puck0: np.ndarray
    t: int


class PushEnv:
    """Quasi-static planar pushing: move a puck as far from its start as possible."""

    name = "push"

    def __init__(self, config: PushConfig = PushConfig()):
        self.config = config

    def spec(self) -> EnvSpec:
        return EnvSpec(obs_dim=8, action_dim=2, episode_len=self.config.episode_len, feature_dim=2)

    def reset(self, rng: np.random.Generator | None = None, jitter: bool = False) -> PushState:
        pusher = np.array(self.config.pusher_start, dtype=float)
        if jitter:
            if rng is None:
                raise ValueError("jittered reset needs a Generator")
            pusher = pusher + rng.uniform(-self.config.jitter_mag, self.config.jitter_mag, size=2)
        puck = np.array(self.config.puck_start, dtype=float)
        return PushState(pusher=pusher, puck=puck, puck0=puck.copy(), t=0)

    def observe(self, state: PushState) -> np.ndarray:
        return np.concatenate(
            [state.pusher, state.puck, state.puck - state.pusher, state.puck - state.puck0]
        )

    def features(self, state: PushState) -> np.ndarray:
        return state.puck.copy()

    def step_arrays(self, pusher, puck, puck0, t, action):
        cfg = self.config
        a = np.clip(np.asarray(action, dtype=float), -1.0, 1.0)
        contact_dist = cfg.pusher_radius + cfg.puck_radius
        delta_prev = np.linalg.norm(puck - puck0, axis=-1)

        pusher_next = pusher + cfg.delta * a
        gap = puck - pusher_next
        dist = np.linalg.norm(gap, axis=-1)
        overlap = dist < contact_dist
        # Degenerate coincident centers: push along +x by convention.
        safe = np.where(dist[..., None] > 1e-12, gap, np.array([1.0, 0.0]))
        normal = safe / np.linalg.norm(safe, axis=-1, keepdims=True)
        puck_next = np.where(
            overlap[..., None], pusher_next + contact_dist * normal, puck
        )

        delta_now = np.linalg.norm(puck_next - puck0, axis=-1)
        sep = np.linalg.norm(puck_next - pusher_next, axis=-1)
        r = cfg.dist_scale * (delta_now - delta_prev) + cfg.touch_scale * (1.0 - np.tanh(sep**2))
        t_next = t + 1
        done = t_next >= cfg.episode_len
        return pusher_next, puck_next, t_next, r, done, overlap

    def step(self, state: PushState, action) -> StepResult:
        if state.t >= self.config.episode_len:
            raise EpisodeFinishedError(f"episode ended at t={state.t}")
        pusher, puck, t, r, done, _ = self.step_arrays(
            state.pusher, state.puck, state.puck0, np.asarray(state.t), action
        )
        nxt = PushState(pusher=pusher, puck=puck, puck0=state.puck0, t=int(t))
        return StepResult(
            next_state=nxt,
            observation=self.observe(nxt),
            reward=float(r),
            features=self.features(nxt),
            done=bool(done),
        )


def push_step(state: PushState, action, config: PushConfig = PushConfig()) -> StepResult:
    return PushEnv(config).step(state, action)


def make_env(name: str, episode_len: int | None = None, collision_penalty_scale: float = 1.0):
    if name == "maze":
        cfg = MazeConfig()
        if episode_len is not None:
            cfg = replace(cfg, episode_len=episode_len)
        if collision_penalty_scale != 1.0:
            cfg = cfg.scaled_penalty(collision_penalty_scale)
        return MazeEnv(cfg)
    if name == "push":
        cfg = PushConfig()
        if episode_len is not None:
            cfg = replace(cfg, episode_len=episode_len)
        return PushEnv(cfg)
    raise ValueError(f"unknown environment '{name}'")


# ---------------------------------------------------------------------------
# Rollouts
# ---------------------------------------------------------------------------


@dataclass
class Rollout:
    """One episode. Feature row t and reward t describe the state reached at step t."""

    obs: np.ndarray  # (T+1, obs_dim)
    actions: np.ndarray  # (T, action_dim)
    rewards: np.ndarray  # (T,)
    features: np.ndarray  # (T, feature_dim)

    @property
    def ret(self) -> float:
        return float(self.rewards.sum())

    @property
    def mean_features(self) -> np.ndarray:
        return self.features.mean(axis=0)


def rollout(env, actions=None, policy=None, seed: int = 0, jitter: bool = False) -> Rollout:
    """Run one full episode, open-loop from an action sequence or closed-loop from a policy.

    Exactly one of `actions` (T x u array) and `policy` (callable obs, rng -> action)
    must be given. Deterministic given (env, actions/policy, seed).
    """
    if (actions is None) == (policy is None):
        raise ValueError("provide exactly one of actions or policy")
    spec = env.spec()
    rng = np.random.default_rng(seed)
    if actions is not None:
        actions = np.asarray(actions, dtype=float)
        if actions.shape != (spec.episode_len, spec.action_dim):
            raise ValueError(
                f"open-loop actions must have shape ({spec.episode_len}, {spec.action_dim})"
            )
    state = env.reset(rng, jitter=jitter)
    obs = [env.observe(state)]
    acts, rews, feats = [], [], []
    for t in range(spec.episode_len):
        a = actions[t] if actions is not None else np.asarray(policy(obs[-1], rng), dtype=float)
        res = env.step(state, a)
        state = res.next_state
        obs.append(res.observation)
        acts.append(a)
        rews.append(res.reward)
        feats.append(res.features)
    return Rollout(
        obs=np.stack(obs),
        actions=np.stack(acts),
        rewards=np.array(rews),
        features=np.stack(feats),
    )


def rollout_open_loop_batch(env, action_seqs: np.ndarray, start_offsets=None) -> list[Rollout]:
    """Roll out a (k, T, u) batch of open-loop action sequences in one vector pass.

    start_offsets, when given, shifts each rollout's reset position (the same
    displacement a jittered reset would apply); by default the batch shares the
    nominal start. Results agree with rollout() element-wise.
    """
    seqs = np.asarray(action_seqs, dtype=float)
    if seqs.ndim != 3:
        raise ValueError("action_seqs must be (k, T, u)")
    k, horizon, _ = seqs.shape
    spec = env.spec()
    if horizon != spec.episode_len:
        raise ValueError(f"trajectory length {horizon} != episode_len {spec.episode_len}")
    if start_offsets is not None:
        start_offsets = np.asarray(start_offsets, dtype=float)
        if start_offsets.shape != (k, 2):
            raise ValueError("start_offsets must be (k, 2)")

    if isinstance(env, MazeEnv):
        q = np.tile(np.array(env.config.start, dtype=float), (k, 1))
        if start_offsets is not None:
            q = q + start_offsets
        q = np.clip(q, -env.config.bound, env.config.bound)
        qdot = np.zeros((k, 2))
        t = np.zeros(k, dtype=int)
        obs = [np.concatenate([q, qdot], axis=1)]
        rews, feats = [], []
        for step_i in range(horizon):
            q, qdot, t, r, _, _ = env.step_arrays(q, qdot, t, seqs[:, step_i])
            obs.append(np.concatenate([q, qdot], axis=1))
            rews.append(r)
            feats.append(q.copy())
    elif isinstance(env, PushEnv):
        pusher = np.tile(np.array(env.config.pusher_start, dtype=float), (k, 1))
        if start_offsets is not None:
            pusher = pusher + start_offsets
        puck = np.tile(np.array(env.config.puck_start, dtype=float), (k, 1))
        puck0 = puck.copy()
        t = np.zeros(k, dtype=int)
        obs = [np.concatenate([pusher, puck, puck - pusher, puck - puck0], axis=1)]
        rews, feats = [], []
        for step_i in range(horizon):
            pusher, puck, t, r, _, _ = env.step_arrays(pusher, puck, puck0, t, seqs[:, step_i])
            obs.append(np.concatenate([pusher, puck, puck - pusher, puck - puck0], axis=1))
            rews.append(r)
            feats.append(puck.copy())
    else:
        return [rollout(env, actions=seqs[i]) for i in range(k)]

    obs_arr = np.stack(obs, axis=1)  # (k, T+1, obs)
    rew_arr = np.stack(rews, axis=1)  # (k, T)
    feat_arr = np.stack(feats, axis=1)  # (k, T, f)
    return [
        Rollout(obs=obs_arr[i], actions=seqs[i], rewards=rew_arr[i], features=feat_arr[i])
        for i in range(k)
    ]


# ---------------------------------------------------------------------------
# Maze behavioral descriptor
# ---------------------------------------------------------------------------


def corridor_class(xy: np.ndarray, config: MazeConfig = MazeConfig()):
    """Which side of every obstacle a trajectory passes, column by column.

    For each obstacle column (grouped by x), the first left-to-right crossing
    of the column's x gives an interpolated y; the class element is the sign of
    (y - center_y) per obstacle in that column, which encodes the gap taken.
    Returns None for trajectories that never cross every column.
    """
    xy = np.asarray(xy, dtype=float)
    xs = sorted({ob[0] for ob in config.obstacles})
    pattern = []
    for col_x in xs:
        col = [ob for ob in config.obstacles if ob[0] == col_x]
        crossing = None
        for t in range(len(xy) - 1):
            x0, x1 = xy[t, 0], xy[t + 1, 0]
            if x0 <= col_x < x1:
                frac = (col_x - x0) / (x1 - x0) if x1 > x0 else 0.0
                crossing = xy[t, 1] + frac * (xy[t + 1, 1] - xy[t, 1])
                break
        if crossing is None:
            return None
        pattern.append(tuple(1 if crossing >= ob[1] else -1 for ob in col))
    return tuple(pattern)


def count_corridor_classes(xy_trajectories, config: MazeConfig = MazeConfig()) -> int:
    """Number of distinct complete-passage corridor classes among trajectories."""
    classes = {corridor_class(xy, config) for xy in xy_trajectories}
    classes.discard(None)
    return len(classes)
