"""Constrained novelty search over spline trajectories (stage one).

Each skill owns a CMA-ES search distribution over flattened spline control
points. Candidates are decoded to open-loop trajectories, rolled out, and
scored with a blend of a per-step diversity reward (log distance to the
nearest other skill's representative trajectory at the same timestep) and
the undiscounted task return. Per-skill sigmoid-bounded Lagrange multipliers
steer the blend so every skill tracks the near-optimality constraint
v_i >= alpha * v_star; skill 0 is pinned to pure task reward and anchors the
v_star estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .archive import Archive, TrajectoryRecord
from .cmaes import CmaState, cma_ask, cma_init, cma_tell
from .diversity import step_intrinsic_series
from .envs import rollout_open_loop_batch
from .splines import eval_trajectory_batch


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class LagrangeState:
    """Per-skill dual variables, stored pre-sigmoid and clamped to bounds.

    ext_weights() maps to the extrinsic blend weight sigma(lambda); a pinned
    first skill reports weight exactly 1, and fixed_weight short-circuits the
    whole mechanism (the hand-tuned scalar ablation).
    """

    raw: np.ndarray
    lr: float
    lo: float = -6.0
    hi: float = 6.0
    delay: int = 1
    inner_steps: int = 1
    pin_first: bool = False
    fixed_weight: float | None = None

    def __post_init__(self):
        r = np.asarray(self.raw, dtype=float)
        if self.lo >= self.hi:
            raise ValueError("lambda bounds must satisfy lo < hi")
        object.__setattr__(self, "raw", np.clip(r, self.lo, self.hi))

    @classmethod
    def init(cls, n: int, lr: float, **kw) -> "LagrangeState":
        return cls(raw=np.zeros(n), lr=lr, **kw)

    @property
    def n(self) -> int:
        return self.raw.shape[0]

    def ext_weights(self) -> np.ndarray:
        if self.fixed_weight is not None:
            return np.full(self.n, float(self.fixed_weight))
        w = sigmoid(self.raw)
        if self.pin_first:
            w[0] = 1.0
        return w


def lambda_update(lag: LagrangeState, v, v_star: float, alpha: float, iteration: int | None = None) -> LagrangeState:
    """Dual descent on the suboptimality gap: lambda_i -= lr * (v_i - alpha v_star).

    A violated constraint (v_i < alpha v_star) raises lambda_i, shifting weight
    toward the task reward; a satisfied one lowers it. The inner gradient steps
    share one direction, so they apply in closed form before the bound clamp.
    Skipped entirely when `iteration` does not land on the update period.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    if iteration is not None and iteration % lag.delay != 0:
        return lag
    v = np.asarray(v, dtype=float)
    step = lag.lr * lag.inner_steps * (v - alpha * v_star)
    new_raw = np.clip(lag.raw - step, lag.lo, lag.hi)
    if lag.pin_first:
        new_raw[0] = lag.raw[0]
    return replace(lag, raw=new_raw)


@dataclass(frozen=True)
class SkillStats:
    """Per-skill EMAs of expected features and value, plus the running optimum."""

    phi_bar: np.ndarray  # (n, f)
    v: np.ndarray  # (n,)
    v_star: float
    kappa_phi: float
    kappa_v: float

    @classmethod
    def init(cls, n: int, feature_dim: int, kappa_phi: float, kappa_v: float) -> "SkillStats":
        return cls(
            phi_bar=np.zeros((n, feature_dim)),
            v=np.zeros(n),
            v_star=0.0,
            kappa_phi=float(kappa_phi),
            kappa_v=float(kappa_v),
        )

    @property
    def n(self) -> int:
        return self.v.shape[0]

    def with_skill_update(self, skill: int, phi_mean, value: float) -> "SkillStats":
        phi_bar = self.phi_bar.copy()
        v = self.v.copy()
        phi_bar[skill] = (1.0 - self.kappa_phi) * phi_bar[skill] + self.kappa_phi * np.asarray(phi_mean, dtype=float)
        v[skill] = (1.0 - self.kappa_v) * v[skill] + self.kappa_v * float(value)
        return replace(self, phi_bar=phi_bar, v=v)

    def with_phi_init(self, phi_bar: np.ndarray) -> "SkillStats":
        return replace(self, phi_bar=np.asarray(phi_bar, dtype=float).copy())

    def with_vstar_max(self) -> "SkillStats":
        """Running-max update: v_star <- max(v_star, max_i v_i)."""
        return replace(self, v_star=max(self.v_star, float(self.v.max())))

    def with_vstar(self, value: float) -> "SkillStats":
        return replace(self, v_star=float(value))


def blend_fitness(r_int, r_ext, ext_weight: float) -> np.ndarray:
    """Z-score both fitness vectors within the subpopulation, then mix convexly.

    ext_weight is the extrinsic weight: sigma(lambda_i), exactly 1 for the
    pinned skill, or the fixed scalar in the no-multiplier ablation.
    """
    ri = np.asarray(r_int, dtype=float)
    re = np.asarray(r_ext, dtype=float)
    if ri.shape != re.shape or ri.ndim != 1:
        raise ValueError("fitness vectors must be 1-D and share a length")
    if not (np.all(np.isfinite(ri)) and np.all(np.isfinite(re))):
        raise ValueError("fitness must be finite")
    zi = (ri - ri.mean()) / max(ri.std(), 1e-8)
    ze = (re - re.mean()) / max(re.std(), 1e-8)
    w = float(ext_weight)
    return (1.0 - w) * zi + w * ze


@dataclass(frozen=True)
class CnsConfig:
    n_skills: int
    iterations: int = 110
    popsize: int = 4
    elite_ratio: float = 0.5
    sigma0: float = 0.6
    spline_controls: int = 5
    spline_degree: int = 3
    lambda_lr: float = 3e-3
    lambda_bounds: tuple[float, float] = (-6.0, 6.0)
    lambda_delay: int = 1
    lambda_inner_steps: int = 200
    kappa_phi: float = 0.2
    kappa_v: float = 0.4
    keep_fraction: float = 0.25
    intrinsic_over_all_timesteps: bool = False
    fixed_blend: float | None = None  # set to 0.5 for the scalar-weight ablation
    jitter_starts: bool = False  # candidate rollouts from jittered resets (archive coverage)

    def __post_init__(self):
        if self.n_skills < 2:
            raise ValueError("need at least 2 skills: diversity is undefined for one")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.popsize < 2:
            raise ValueError("popsize must be >= 2")
        if not 0.0 < self.keep_fraction <= 1.0:
            raise ValueError("keep_fraction must be in (0, 1]")


@dataclass
class CnsResult:
    archive: Archive
    stats: SkillStats
    lagrange: LagrangeState
    mean_controls: np.ndarray  # (n, m*u) final CMA means (flattened spline controls)
    metrics: list[dict] = field(default_factory=list)
    v_star_trace: list[float] = field(default_factory=list)
    lambda_events: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)

    def spline_shapes(self):
        return self.mean_controls.shape


def run_cns(config: CnsConfig, env, alpha: float, seed: int) -> CnsResult:
    """Stage one: evolve n diverse, near-optimal open-loop trajectories.

    Per iteration and skill: sample a subpopulation of control matrices,
    decode through the spline, roll out, blend diversity and return fitness
    under the current multiplier, and update the search distribution. EMAs,
    v_star, multipliers, and the archive are updated at a fixed-order barrier
    for determinism.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    spec = env.spec()
    n = config.n_skills
    m, u, horizon = config.spline_controls, spec.action_dim, spec.episode_len
    degree = min(config.spline_degree, m - 1)
    dim = m * u

    seeds = np.random.SeedSequence(seed).spawn(n + 1)
    cma_states: list[CmaState] = [
        cma_init(dim, config.popsize, config.elite_ratio, config.sigma0, np.zeros(dim), seed=s)
        for s in seeds[:n]
    ]
    jitter_rng = np.random.default_rng(seeds[n])
    jitter_mag = getattr(env.config, "jitter_mag", 0.0)
    stats = SkillStats.init(n, spec.feature_dim, config.kappa_phi, config.kappa_v)
    lo, hi = config.lambda_bounds
    lag = LagrangeState.init(
        n,
        lr=config.lambda_lr,
        lo=lo,
        hi=hi,
        delay=config.lambda_delay,
        inner_steps=config.lambda_inner_steps,
        pin_first=config.fixed_blend is None,
        fixed_weight=config.fixed_blend,
    )
    archive = Archive()
    result = CnsResult(archive=archive, stats=stats, lagrange=lag, mean_controls=np.zeros((n, dim)))

    for it in range(1, config.iterations + 1):
        # Representative trajectory per skill: the current mean's rollout.
        rep_trajs = eval_trajectory_batch(
            np.stack([s.mean for s in cma_states]), m, u, degree, horizon
        )
        rep_feats = np.stack([r.features for r in rollout_open_loop_batch(env, rep_trajs)])

        asks = [cma_ask(cma_states[i]) for i in range(n)]
        flat = np.concatenate([a.candidates for a in asks], axis=0)
        trajs = eval_trajectory_batch(flat, m, u, degree, horizon)
        offsets = None
        if config.jitter_starts and jitter_mag > 0:
            offsets = jitter_rng.uniform(-jitter_mag, jitter_mag, size=(len(flat), 2))
        rollouts = rollout_open_loop_batch(env, trajs, start_offsets=offsets)

        weights = lag.ext_weights()
        for i in range(n):
            members = rollouts[i * config.popsize : (i + 1) * config.popsize]
            others = [rep_feats[j] for j in range(n) if j != i]
            r_ext = np.array([mr.ret for mr in members])
            r_int = np.array(
                [
                    step_intrinsic_series(
                        mr.features, others, over_all_timesteps=config.intrinsic_over_all_timesteps
                    ).sum()
                    for mr in members
                ]
            )
            fitness = blend_fitness(r_int, r_ext, weights[i])
            if not np.all(np.isfinite(fitness)):
                raise FloatingPointError(f"non-finite fitness for skill {i} at iteration {it}")
            cma_states[i] = cma_tell(cma_states[i], asks[i], fitness)

            stats = stats.with_skill_update(
                i, np.mean([mr.mean_features for mr in members], axis=0), r_ext.mean()
            )
            stats = stats.with_vstar_max()
            result.v_star_trace.append(stats.v_star)

            archive.extend(
                TrajectoryRecord(
                    skill=i,
                    ret=mr.ret,
                    actions=mr.actions,
                    obs=mr.obs,
                    rewards=mr.rewards,
                    features=mr.features,
                )
                for mr in members
            )

        gap = stats.v - alpha * stats.v_star
        new_lag = lambda_update(lag, stats.v, stats.v_star, alpha, iteration=it)
        result.lambda_events.append((gap, new_lag.raw - lag.raw))
        lag = new_lag

        sig = lag.ext_weights()
        result.metrics.append(
            {
                "iteration": it,
                "v": stats.v.copy(),
                "sigma_lambda": sig.copy(),
                "v_star": stats.v_star,
            }
        )

    result.stats = stats
    result.lagrange = lag
    result.mean_controls = np.stack([s.mean for s in cma_states])
    return result


def mean_rollout_features(config: CnsConfig, env, mean_controls: np.ndarray) -> np.ndarray:
    """Feature trajectories of the final CMA means (one rollout per skill)."""
    spec = env.spec()
    degree = min(config.spline_degree, config.spline_controls - 1)
    trajs = eval_trajectory_batch(
        mean_controls, config.spline_controls, spec.action_dim, degree, spec.episode_len
    )
    return np.stack([r.features for r in rollout_open_loop_batch(env, trajs)])
