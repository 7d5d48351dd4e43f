"""End-to-end smoke tests on the planar push task (small budgets)."""

import numpy as np

from divskill.archive import filter_archive
from divskill.cns import CnsConfig, run_cns
from divskill.distill import DistillConfig, evaluate_policies, run_distill
from divskill.envs import PushConfig, PushEnv


def test_push_pipeline_smoke():
    env = PushEnv(PushConfig(episode_len=30))
    cns_cfg = CnsConfig(
        n_skills=3,
        iterations=10,
        popsize=4,
        spline_controls=4,
        lambda_inner_steps=20,
        jitter_starts=True,
    )
    cns = run_cns(cns_cfg, env, alpha=0.8, seed=0)
    assert len(cns.archive) == 3 * 10 * 4
    # pushing moves the puck: the best rollouts should have clearly positive returns
    filt = filter_archive(cns.archive, 0.25)
    assert np.mean([r.ret for r in filt.records]) > 0.5

    cfg = DistillConfig(
        total_steps=2_000,
        num_envs=4,
        batch_size=32,
        utd_policy=1,
        utd_critic=1,
        hidden_depth=1,
        hidden_size=16,
        num_critics=2,
        critic_subset=2,
        buffer_capacity=5_000,
        start_steps=200,
        eval_interval=500,
    )
    res = run_distill(cfg, env, filt, n_skills=3, alpha=0.8, seed=0)
    assert all(b >= a for a, b in zip(res.v_star_trace, res.v_star_trace[1:]))
    ev = evaluate_policies(res.policy, env, n_skills=3, episodes_per_skill=1, seed=0)
    assert ev.returns.shape == (3,)
    assert np.isfinite(ev.diversity)


def test_push_cns_skills_spread_direction():
    env = PushEnv(PushConfig(episode_len=40))
    cns_cfg = CnsConfig(n_skills=4, iterations=40, popsize=4, spline_controls=4, lambda_inner_steps=50)
    cns = run_cns(cns_cfg, env, alpha=0.8, seed=1)
    # final mean features per skill (puck displacement direction) should not all agree
    phi = cns.stats.phi_bar
    spread = np.linalg.norm(phi - phi.mean(axis=0), axis=1)
    assert spread.max() > 0.2
