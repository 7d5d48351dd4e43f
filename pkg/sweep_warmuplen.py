import time

import numpy as np

from divskill.archive import filter_archive
from divskill.cns import CnsConfig, run_cns
from divskill.distill import DistillConfig, run_distill, evaluate_policies
from divskill.envs import MazeConfig, MazeEnv, corridor_class

env = MazeEnv(MazeConfig(start=(-2.75, 0.0), delta=0.25))
cns = run_cns(CnsConfig(n_skills=10, jitter_starts=True), env, alpha=0.8, seed=1)
filt = filter_archive(cns.archive, 0.25)

for rounds in (600, 1500, 3000):
    cfg = DistillConfig(
        total_steps=24, num_envs=24, batch_size=128, utd_policy=4, utd_critic=4,
        lr_actor=1e-3, lr_critic=1e-3, polyak=0.05, gamma=0.95,
        hidden_depth=2, hidden_size=32, num_critics=3, critic_subset=2,
        buffer_capacity=300_000, start_steps=0, eval_interval=1_000_000,
        target_entropy=-2.0, alpha_v=0.95, alpha_phi=0.995, lambda_lr=5e-4,
        offline_warmup_rounds=rounds)
    t0 = time.time()
    res = run_distill(cfg, env, filt, n_skills=10, alpha=0.8, seed=1)
    ev = evaluate_policies(res.policy, env, n_skills=10, episodes_per_skill=1, seed=1)
    classes = [corridor_class(t["features"], env.config) for t in ev.trajectories]
    n_classes = len({c for c in classes if c is not None})
    print(f"rounds {rounds}: {time.time()-t0:.0f}s post-warmup eval {ev.returns.mean():7.1f} "
          f"classes {n_classes} div {ev.diversity:6.1f} xi {res.temperature:.3f}", flush=True)
    print("  eval:", np.round(ev.returns, 0), flush=True)
