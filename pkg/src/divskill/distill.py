"""Stage two: distill the trajectory archive into skill-conditioned reactive policies.

Entropy-regularized actor-critic with two critic families (task reward and
diversity reward), a stratified replay buffer mixing online experience 50/50
with the filtered offline archive, per-skill sigmoid-bounded multipliers
blending the two critics in the policy objective, a running-max estimate of
the optimal value for the near-optimality constraint, and multiple policy
updates per batched environment step.

Diversity rewards are non-stationary (they depend on the current per-skill
feature EMAs), so they are recomputed from stored features at update time
rather than stored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .archive import Archive
from .cns import LagrangeState, SkillStats, lambda_update, sigmoid
from .diversity import domino_intrinsic_batch, nn_diversity
from .envs import rollout
from .nets import (
    RunningNorm,
    TrainableNet,
    adam_init,
    adam_step,
    init_mlp,
    mlp_backward,
    mlp_forward,
    mlp_input_grad,
    split_policy_output,
    squash_sample,
    squashed_log_prob,
    squashed_log_prob_grads,
)

DTYPE = np.float32


class EmptyBufferError(RuntimeError):
    """Raised when a batch is requested and no stratum has data."""


# ---------------------------------------------------------------------------
# Replay storage
# ---------------------------------------------------------------------------


@dataclass
class Batch:
    obs: np.ndarray  # (B, obs_dim)
    actions: np.ndarray  # (B, u)
    r_ext: np.ndarray  # (B,)
    features: np.ndarray  # (B, f)
    next_obs: np.ndarray  # (B, obs_dim)
    skills: np.ndarray  # (B,) int
    done: np.ndarray  # (B,) bool
    n_online: int
    n_offline: int

    def __len__(self) -> int:
        return self.obs.shape[0]


class _FlatStore:
    """Transition fields in flat row-indexed arrays, gathered by fancy indexing."""

    def __init__(self, rows: int, obs_dim: int, action_dim: int, feature_dim: int):
        self.obs = np.zeros((rows, obs_dim))
        self.actions = np.zeros((rows, action_dim))
        self.r_ext = np.zeros(rows)
        self.features = np.zeros((rows, feature_dim))
        self.next_obs = np.zeros((rows, obs_dim))
        self.done = np.zeros(rows, dtype=bool)

    def gather(self, rows: np.ndarray) -> tuple:
        return (
            self.obs[rows],
            self.actions[rows],
            self.r_ext[rows],
            self.features[rows],
            self.next_obs[rows],
            self.done[rows],
        )

    def freeze(self) -> None:
        for a in (self.obs, self.actions, self.r_ext, self.features, self.next_obs, self.done):
            a.setflags(write=False)


class StratifiedBuffer:
    """Frozen offline store plus per-skill online rings, sampled half and half.

    Within each stratum a draw picks a skill uniformly among skills that have
    data, then a transition uniformly (with replacement) within that skill.
    """

    def __init__(self, n_skills: int, obs_dim: int, action_dim: int, feature_dim: int, capacity: int, archive: Archive | None):
        self.n_skills = n_skills
        self._cap = max(1, capacity // n_skills)
        self._online = _FlatStore(n_skills * self._cap, obs_dim, action_dim, feature_dim)
        self._pos = np.zeros(n_skills, dtype=np.int64)
        self._sizes = np.zeros(n_skills, dtype=np.int64)
        self._offline = None
        if archive is not None and len(archive) > 0:
            skills = archive.skills()
            counts = {s: sum(len(r.rewards) for r in archive.by_skill(s)) for s in skills}
            store = _FlatStore(sum(counts.values()), obs_dim, action_dim, feature_dim)
            offsets, pos = {}, 0
            for s in skills:
                offsets[s] = pos
                for r in archive.by_skill(s):
                    t = len(r.rewards)
                    store.obs[pos : pos + t] = r.obs[:-1]
                    store.next_obs[pos : pos + t] = r.obs[1:]
                    store.actions[pos : pos + t] = r.actions
                    store.r_ext[pos : pos + t] = r.rewards
                    store.features[pos : pos + t] = r.features
                    store.done[pos + t - 1] = True
                    pos += t
            store.freeze()
            self._offline = store
            self._off_skills = np.array(skills)
            self._off_offsets = np.array([offsets[s] for s in skills])
            self._off_sizes = np.array([counts[s] for s in skills])
        self.counters = {"batches": 0, "split_5050": 0, "offline_only": 0, "online_only": 0}

    @property
    def has_offline(self) -> bool:
        return self._offline is not None

    @property
    def online_size(self) -> int:
        return int(self._sizes.sum())

    def add_online(self, skill, obs, action, r_ext, features, next_obs, done):
        row = skill * self._cap + self._pos[skill]
        st = self._online
        st.obs[row] = obs
        st.actions[row] = action
        st.r_ext[row] = r_ext
        st.features[row] = features
        st.next_obs[row] = next_obs
        st.done[row] = done
        self._pos[skill] = (self._pos[skill] + 1) % self._cap
        self._sizes[skill] = min(self._sizes[skill] + 1, self._cap)

    def offline_hash(self) -> str:
        import hashlib

        h = hashlib.sha256()
        if self._offline is None:
            return h.hexdigest()
        st = self._offline
        for a in (st.obs, st.actions, st.r_ext, st.features, st.next_obs):
            h.update(np.ascontiguousarray(a, dtype=np.float64).tobytes())
        return h.hexdigest()

    def _draw_offline(self, k: int, rng) -> tuple:
        pick = rng.integers(0, len(self._off_skills), size=k)
        idx = (rng.random(k) * self._off_sizes[pick]).astype(np.int64)
        rows = self._off_offsets[pick] + idx
        obs, act, r, feat, nxt, d = self._offline.gather(rows)
        return obs, act, r, feat, nxt, self._off_skills[pick], d

    def _draw_online(self, k: int, rng) -> tuple:
        avail = np.flatnonzero(self._sizes > 0)
        skills = avail[rng.integers(0, len(avail), size=k)]
        idx = (rng.random(k) * self._sizes[skills]).astype(np.int64)
        rows = skills * self._cap + idx
        obs, act, r, feat, nxt, d = self._online.gather(rows)
        return obs, act, r, feat, nxt, skills, d

    def sample_batch(self, batch_size: int, rng, symmetric: bool = True) -> Batch:
        """Half online, half offline; documented fallbacks while a stratum is empty."""
        if batch_size % 2 != 0:
            raise ValueError("batch_size must be even")
        online_ok = self.online_size > 0
        offline_ok = self.has_offline and symmetric
        if not online_ok and not offline_ok:
            raise EmptyBufferError("no data in either stratum")
        if online_ok and offline_ok:
            n_off = n_on = batch_size // 2
            self.counters["split_5050"] += 1
        elif offline_ok:
            n_off, n_on = batch_size, 0
            self.counters["offline_only"] += 1
        else:
            n_off, n_on = 0, batch_size
            self.counters["online_only"] += 1
        self.counters["batches"] += 1

        parts = []
        if n_off:
            parts.append(self._draw_offline(n_off, rng))
        if n_on:
            parts.append(self._draw_online(n_on, rng))
        obs, act, r, feat, nxt, skills, done = (
            np.concatenate([p[i] for p in parts]) for i in range(7)
        )
        return Batch(
            obs=obs,
            actions=act,
            r_ext=r,
            features=feat,
            next_obs=nxt,
            skills=skills.astype(int),
            done=done,
            n_online=n_on,
            n_offline=n_off,
        )


# ---------------------------------------------------------------------------
# Losses with exact gradients
# ---------------------------------------------------------------------------


def critic_loss_grads(params: dict, qin: np.ndarray, y: np.ndarray):
    """Mean squared TD error over the whole ensemble; returns (loss, grads).

    y is one target vector (B,) shared by every member, or per-member targets
    (M, B) when two families live in one fused ensemble.
    """
    q, tape = mlp_forward(params, qin)  # (M, B, 1)
    y = np.asarray(y)
    if y.ndim == 1:
        y = y[None, :]
    err = q - y.astype(q.dtype)[:, :, None]
    loss = float(np.mean(err**2))
    dq = (2.0 / err.size) * err
    grads, _ = mlp_backward(params, tape, dq)
    return loss, grads


def policy_loss_grads(
    policy_params: dict,
    s_in: np.ndarray,
    eps_noise: np.ndarray,
    critic_params: dict,
    n_ext: int,
    ext_weight: np.ndarray,
    xi: float,
):
    """J = mean over the batch of [xi log pi(a~|s) - Q_mix(s, a~)], with exact grads.

    a~ is the reparameterized sample (eps_noise frozen). critic_params holds a
    fused ensemble whose first n_ext members are the task critics and the rest
    the diversity critics; Q_mix blends the two halves' mean Q with the
    per-sample extrinsic weight (pure task when there is no diversity half).
    Returns (loss, grads, mean log-prob).
    """
    action_dim = eps_noise.shape[-1]
    batch = s_in.shape[0]
    y, tape = mlp_forward(policy_params, s_in)
    mean, log_std, pass_mask = split_policy_output(y, action_dim)
    a, pre = squash_sample(mean, log_std, eps_noise)
    logp = squashed_log_prob(mean, log_std, pre)

    qin = np.concatenate([s_in, a], axis=-1).astype(s_in.dtype)
    w = ext_weight.astype(np.float64)

    q_all, q_tape = mlp_forward(critic_params, qin)  # (M, B, 1)
    members = q_all.shape[0]
    q_ext = q_all[:n_ext].mean(axis=0)[:, 0]
    dy = np.empty(q_all.shape, dtype=q_all.dtype)
    dy[:n_ext] = (-w / (batch * n_ext))[None, :, None]
    if members > n_ext:
        q_int = q_all[n_ext:].mean(axis=0)[:, 0]
        q_mix = (1.0 - w) * q_int + w * q_ext
        dy[n_ext:] = (-(1.0 - w) / (batch * (members - n_ext)))[None, :, None]
    else:
        q_mix = w * q_ext
    da = mlp_input_grad(critic_params, q_tape, dy).sum(axis=0)[:, -action_dim:]

    loss = float(np.mean(xi * logp - q_mix))

    d_mean_lp, d_logstd_lp = squashed_log_prob_grads(mean, log_std, pre)
    da_dmean = 1.0 - np.tanh(pre) ** 2
    da_dlogstd = da_dmean * (pre - mean)
    d_mean = (xi / batch) * d_mean_lp + da * da_dmean
    d_logstd = ((xi / batch) * d_logstd_lp + da * da_dlogstd) * pass_mask
    dy_policy = np.concatenate([d_mean, d_logstd], axis=-1).astype(y.dtype)
    grads, _ = mlp_backward(policy_params, tape, dy_policy)
    return loss, grads, float(logp.mean())


def critic_targets(
    target_params: dict,
    policy_params: dict,
    next_in: np.ndarray,
    rewards_std: np.ndarray,
    gamma: float,
    xi: float,
    subset: np.ndarray,
    eps_next: np.ndarray,
):
    """Soft TD target: r + gamma * (min over a critic subset at a' - xi log pi(a'|s'))."""
    y_pol, _ = mlp_forward(policy_params, next_in)
    mean, log_std, _ = split_policy_output(y_pol, eps_next.shape[-1])
    a_next, pre = squash_sample(mean, log_std, eps_next)
    logp_next = squashed_log_prob(mean, log_std, pre)
    tin = np.concatenate([next_in, a_next], axis=-1).astype(next_in.dtype)
    q_t, _ = mlp_forward(target_params, tin)  # (E, B, 1)
    q_next = q_t[subset].min(axis=0)[:, 0] - xi * logp_next
    return rewards_std + gamma * q_next


def vmax_update(stats: SkillStats, values) -> SkillStats:
    """Running-max optimal-value estimate: v* <- max(v*, max_i v_i)."""
    v = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("values must be finite")
    return replace(stats, v_star=max(stats.v_star, float(v.max())))


# ---------------------------------------------------------------------------
# Configuration and result
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DistillConfig:
    total_steps: int = 200_000
    num_envs: int = 32
    batch_size: int = 256
    utd_policy: int = 4
    utd_critic: int = 4
    lr_actor: float = 3e-4
    lr_critic: float = 3e-4
    lr_temperature: float = 3e-4
    lambda_lr: float = 5e-4
    lambda_bounds: tuple[float, float] = (-6.0, 6.0)
    alpha_phi: float = 0.995
    alpha_v: float = 0.992
    gamma: float = 0.975
    num_critics: int = 10
    critic_subset: int = 2
    hidden_depth: int = 4
    hidden_size: int = 64
    buffer_capacity: int = 1_000_000
    polyak: float = 5e-3
    start_steps: int = 1_000
    eval_interval: int = 2_000
    init_temperature: float = 1.0
    target_entropy: float | None = None  # None -> action_dim / 2
    offline_warmup_rounds: int = 0  # update rounds on offline-only batches before env steps
    expert_pinned: bool = False
    no_vmax: bool = False
    no_symmetric: bool = False
    no_diversity: bool = False
    debug: bool = False

    def __post_init__(self):
        if self.batch_size % 2 != 0:
            raise ValueError("batch_size must be even")
        if self.critic_subset > self.num_critics:
            raise ValueError("critic_subset cannot exceed num_critics")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")

    @property
    def hidden(self) -> tuple[int, ...]:
        return (self.hidden_size,) * self.hidden_depth


@dataclass
class DistillResult:
    policy: dict
    ext_critics: dict
    int_critics: dict
    stats: SkillStats
    lagrange: LagrangeState
    temperature: float
    metrics: list[dict] = field(default_factory=list)
    v_star_trace: list[float] = field(default_factory=list)
    counters: dict = field(default_factory=dict)
    offline_hash: tuple[str, str] | None = None
    lambda_events: list | None = None
    ema_events: list | None = None


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


class _VecEnvs:
    """num_envs independent env instances; a skill is drawn once per episode."""

    def __init__(self, env, n_skills: int, num_envs: int, rng, jitter: bool):
        self.env = env
        self.n = n_skills
        self.rng = rng
        self.jitter = jitter
        self.states = [env.reset(rng, jitter=jitter) for _ in range(num_envs)]
        self.skills = rng.integers(0, n_skills, size=num_envs)
        self.obs = np.stack([env.observe(s) for s in self.states])
        self.ep_return = np.zeros(num_envs)
        self.ep_feat_sum = np.zeros((num_envs, env.spec().feature_dim))
        self.ep_len = np.zeros(num_envs, dtype=int)

    def step(self, actions):
        """Advance every env; returns (transitions, finished episode summaries)."""
        transitions, finished = [], []
        for i, a in enumerate(actions):
            res = self.env.step(self.states[i], a)
            transitions.append(
                (int(self.skills[i]), self.obs[i], a, res.reward, res.features, res.observation, res.done)
            )
            self.ep_return[i] += res.reward
            self.ep_feat_sum[i] += res.features
            self.ep_len[i] += 1
            if res.done:
                finished.append(
                    (int(self.skills[i]), self.ep_return[i], self.ep_feat_sum[i] / self.ep_len[i])
                )
                self.states[i] = self.env.reset(self.rng, jitter=self.jitter)
                self.skills[i] = self.rng.integers(0, self.n)
                self.obs[i] = self.env.observe(self.states[i])
                self.ep_return[i] = 0.0
                self.ep_feat_sum[i] = 0.0
                self.ep_len[i] = 0
            else:
                self.states[i] = res.next_state
                self.obs[i] = res.observation
        return transitions, finished


def _check_finite(name: str, value: float, step: int):
    if not math.isfinite(value):
        raise FloatingPointError(f"{name} became non-finite at env step {step}")


def run_distill(
    cfg: DistillConfig,
    env,
    archive: Archive | None,
    n_skills: int,
    alpha: float,
    seed: int,
    jitter: bool = True,
) -> DistillResult:
    """Train the skill-conditioned policy set against the filtered archive.

    Stage-two loop per batched env step: act and store transitions, run the
    critic and policy update schedules, dual-descend the multipliers, fold
    finished episodes into the per-skill EMAs, and take the running max for
    v*. Stats are reset at stage start (feature EMAs to the per-skill archive
    means, values and v* to zero).
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    if n_skills < 2:
        raise ValueError("need at least 2 skills")
    spec = env.spec()
    rng = np.random.default_rng(seed)
    n = n_skills
    u = spec.action_dim
    pol_in = spec.obs_dim + n
    q_in = pol_in + u

    policy_params = init_mlp(rng, pol_in, cfg.hidden, 2 * u, dtype=DTYPE)
    # start exploration at moderate noise: the log-std head otherwise inits
    # near sigma = 1, and entropy pressure anneals it down only slowly
    policy_params[f"b{cfg.hidden_depth}"][u:] = -1.0
    policy = TrainableNet(policy_params)
    n_ext = cfg.num_critics
    families = 1 if cfg.no_diversity else 2
    critics = TrainableNet(
        init_mlp(rng, q_in, cfg.hidden, 1, ensemble=families * n_ext, dtype=DTYPE)
    )
    critics.sync_target(1.0)
    log_xi = {"log_xi": np.array([math.log(cfg.init_temperature)])}
    xi_opt = adam_init(log_xi)
    target_entropy = u / 2.0 if cfg.target_entropy is None else cfg.target_entropy

    stats = SkillStats.init(n, spec.feature_dim, 1.0 - cfg.alpha_phi, 1.0 - cfg.alpha_v)
    if archive is not None and len(archive) > 0:
        phi0 = np.zeros((n, spec.feature_dim))
        for skill, mf in archive.mean_features_per_skill().items():
            if skill < n:
                phi0[skill] = mf
        stats = stats.with_phi_init(phi0)
    lo, hi = cfg.lambda_bounds
    raw0 = np.zeros(n)
    raw0[0] = hi  # dedicated task expert starts fully extrinsic (not pinned by default)
    lag = LagrangeState(raw=raw0, lr=cfg.lambda_lr, lo=lo, hi=hi, pin_first=cfg.expert_pinned)

    buffer = StratifiedBuffer(n, spec.obs_dim, u, spec.feature_dim, cfg.buffer_capacity, archive)
    result = DistillResult(
        policy=policy.params,
        ext_critics={},
        int_critics={},
        stats=stats,
        lagrange=lag,
        temperature=cfg.init_temperature,
        offline_hash=None,
        lambda_events=[] if cfg.debug else None,
        ema_events=[] if cfg.debug else None,
    )
    hash_start = buffer.offline_hash() if cfg.debug else None

    onehot = np.eye(n, dtype=DTYPE)
    norm_ext = RunningNorm()
    norm_int = RunningNorm()
    vec = _VecEnvs(env, n, cfg.num_envs, rng, jitter)

    def policy_inputs(obs, skills):
        return np.concatenate([obs.astype(DTYPE), onehot[skills]], axis=-1)

    def sample_actions(obs, skills):
        y, _ = mlp_forward(policy.params, policy_inputs(obs, skills))
        mean, log_std, _ = split_policy_output(y, u)
        eps = rng.standard_normal(mean.shape).astype(DTYPE)
        a, _ = squash_sample(mean, log_std, eps)
        return a

    def critic_update(batch, xi):
        """One TD step for the fused critic bank off a shared next-action sample."""
        next_in = policy_inputs(batch.next_obs, batch.skills)
        y_pol, _ = mlp_forward(policy.params, next_in)
        mean, log_std, _ = split_policy_output(y_pol, u)
        eps_next = rng.standard_normal(mean.shape).astype(DTYPE)
        a_next, pre = squash_sample(mean, log_std, eps_next)
        logp_next = squashed_log_prob(mean, log_std, pre)
        tin = np.concatenate([next_in, a_next], axis=-1)
        qin = np.concatenate(
            [policy_inputs(batch.obs, batch.skills), batch.actions.astype(DTYPE)], axis=-1
        )
        q_t, _ = mlp_forward(critics.target, tin)  # (families * E, B, 1)

        rewards = [(batch.r_ext, norm_ext, "extrinsic")]
        if families == 2:
            r_int = domino_intrinsic_batch(batch.features, batch.skills, stats.phi_bar)
            rewards.append((r_int, norm_int, "intrinsic"))
        y = np.empty((families * n_ext, len(batch)))
        for f, (raw, norm, name) in enumerate(rewards):
            norm.update(raw)
            r_std = norm.normalize(raw, center=False)
            subset = f * n_ext + rng.choice(n_ext, size=cfg.critic_subset, replace=False)
            q_min = q_t[subset].min(axis=0)[:, 0]
            y[f * n_ext : (f + 1) * n_ext] = r_std + cfg.gamma * (q_min - xi * logp_next)
        loss, grads = critic_loss_grads(critics.params, qin, y)
        _check_finite("critic loss", loss, env_steps)
        critics.apply(grads, cfg.lr_critic)
        critics.sync_target(cfg.polyak)

    env_steps = 0

    def policy_update(xi):
        batch = buffer.sample_batch(cfg.batch_size, rng, symmetric=not cfg.no_symmetric)
        s_in = policy_inputs(batch.obs, batch.skills)
        eps = rng.standard_normal((len(batch), u)).astype(DTYPE)
        w = np.ones(len(batch)) if cfg.no_diversity else lag.ext_weights()[batch.skills]
        loss_p, grads, logp_mean = policy_loss_grads(
            policy.params, s_in, eps, critics.params, n_ext, w, xi
        )
        _check_finite("policy loss", loss_p, env_steps)
        policy.apply(grads, cfg.lr_actor)
        return logp_mean

    # Optional warm start: update rounds on offline-only batches (the documented
    # fallback regime before any online data exists). Gives the critics and the
    # policy corridor competence before the first environment interaction.
    if buffer.has_offline and not cfg.no_symmetric:
        for _ in range(cfg.offline_warmup_rounds):
            xi = float(np.exp(log_xi["log_xi"][0]))
            for _ in range(cfg.utd_critic):
                batch = buffer.sample_batch(cfg.batch_size, rng, symmetric=True)
                critic_update(batch, xi)
            for _ in range(cfg.utd_policy):
                logp_mean = policy_update(xi)
                g_xi = {"log_xi": np.array([-(logp_mean + target_entropy)])}
                log_xi, xi_opt = adam_step(log_xi, g_xi, xi_opt, cfg.lr_temperature)
                xi = float(np.exp(log_xi["log_xi"][0]))

    total_batched = max(1, cfg.total_steps // cfg.num_envs)
    next_metrics_at = 0

    for batched_step in range(total_batched):
        if env_steps < cfg.start_steps:
            actions = rng.uniform(-1.0, 1.0, size=(cfg.num_envs, u))
        else:
            actions = np.asarray(sample_actions(vec.obs, vec.skills), dtype=float)
        transitions, finished = vec.step(actions)
        for skill, obs, a, r, feat, nxt, done in transitions:
            buffer.add_online(skill, obs, a, r, feat, nxt, done)
        env_steps += cfg.num_envs

        xi = float(np.exp(log_xi["log_xi"][0]))

        # critic updates
        can_update = buffer.online_size > 0 or (buffer.has_offline and not cfg.no_symmetric)
        if can_update:
            for _ in range(cfg.utd_critic):
                batch = buffer.sample_batch(cfg.batch_size, rng, symmetric=not cfg.no_symmetric)
                critic_update(batch, xi)
            for _ in range(cfg.utd_policy):
                logp_mean = policy_update(xi)
                # temperature dual step toward the target entropy
                g_xi = {"log_xi": np.array([-(logp_mean + target_entropy)])}
                log_xi, xi_opt = adam_step(log_xi, g_xi, xi_opt, cfg.lr_temperature)
                xi = float(np.exp(log_xi["log_xi"][0]))

        # multiplier dual descent (every batched step)
        gap = stats.v - alpha * stats.v_star
        new_lag = lambda_update(lag, stats.v, stats.v_star, alpha)
        if cfg.debug:
            result.lambda_events.append((gap.copy(), new_lag.raw - lag.raw))
        lag = new_lag

        # per-episode EMA folds, then the v* update
        for skill, ep_ret, ep_phi in finished:
            stats = stats.with_skill_update(skill, ep_phi, ep_ret)
            if cfg.debug:
                result.ema_events.append((skill, ep_phi.copy(), float(ep_ret)))
        if cfg.no_vmax:
            stats = stats.with_vstar(float(stats.v[0]))
        else:
            stats = vmax_update(stats, stats.v)
        result.v_star_trace.append(stats.v_star)

        if env_steps >= next_metrics_at:
            sig = lag.ext_weights()
            result.metrics.append(
                {
                    "step": env_steps,
                    "v": stats.v.copy(),
                    "sigma_lambda": sig.copy(),
                    "v_star": stats.v_star,
                    "diversity": nn_diversity(stats.phi_bar),
                }
            )
            next_metrics_at += cfg.eval_interval

    result.policy = policy.params
    result.ext_critics = {k: v[:n_ext] for k, v in critics.params.items()}
    result.int_critics = (
        {} if families == 1 else {k: v[n_ext:] for k, v in critics.params.items()}
    )
    result.stats = stats
    result.lagrange = lag
    result.temperature = float(np.exp(log_xi["log_xi"][0]))
    result.counters = dict(buffer.counters)
    if cfg.debug:
        result.offline_hash = (hash_start, buffer.offline_hash())
    return result


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


@dataclass
class EvalResult:
    returns: np.ndarray  # (n,) mean undiscounted return per skill
    phi_set: np.ndarray  # (n, f) mean features per skill
    trajectories: list[dict]  # per episode: skill, episode, return, features path

    @property
    def diversity(self) -> float:
        return nn_diversity(self.phi_set)

    @property
    def mean_return(self) -> float:
        return float(self.returns.mean())


def deterministic_policy(policy_params: dict, n_skills: int, skill: int, action_dim: int):
    """Closed-loop mean action for one skill (no sampling)."""
    onehot = np.eye(n_skills, dtype=DTYPE)[skill]

    def act(obs, rng):
        x = np.concatenate([np.asarray(obs, dtype=DTYPE), onehot])[None, :]
        y, _ = mlp_forward(policy_params, x)
        mean, _, _ = split_policy_output(y, action_dim)
        return np.tanh(mean[0].astype(float))

    return act


def evaluate_policies(
    policy_params: dict,
    env,
    n_skills: int,
    episodes_per_skill: int = 1,
    seed: int = 0,
    jitter: bool = False,
) -> EvalResult:
    """Deterministic evaluation: per-skill mean returns, feature set, trajectory dumps."""
    spec = env.spec()
    returns = np.zeros(n_skills)
    phi = np.zeros((n_skills, spec.feature_dim))
    trajectories = []
    for skill in range(n_skills):
        pol = deterministic_policy(policy_params, n_skills, skill, spec.action_dim)
        rets, feats = [], []
        for ep in range(episodes_per_skill):
            r = rollout(env, policy=pol, seed=seed * 100_003 + skill * 101 + ep, jitter=jitter)
            rets.append(r.ret)
            feats.append(r.mean_features)
            trajectories.append(
                {"skill": skill, "episode": ep, "ret": r.ret, "features": r.features}
            )
        returns[skill] = np.mean(rets)
        phi[skill] = np.mean(feats, axis=0)
    return EvalResult(returns=returns, phi_set=phi, trajectories=trajectories)
