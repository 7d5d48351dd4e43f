import time

import numpy as np

from divskill.archive import filter_archive
from divskill.cns import CnsConfig, run_cns
from divskill.distill import DistillConfig, run_distill, evaluate_policies
from divskill.envs import MazeConfig, MazeEnv, corridor_class

env = MazeEnv(MazeConfig(start=(-2.75, 0.0), delta=0.25))
for seed in (0, 1, 2):
    cns = run_cns(CnsConfig(n_skills=10, jitter_starts=True), env, alpha=0.8, seed=seed)
    filt = filter_archive(cns.archive, 0.25)
    cfg = DistillConfig(
        total_steps=140_000, num_envs=24, batch_size=128, utd_policy=4, utd_critic=4,
        lr_actor=1e-3, lr_critic=1e-3, polyak=0.05, gamma=0.95,
        hidden_depth=2, hidden_size=32, num_critics=3, critic_subset=2,
        buffer_capacity=300_000, start_steps=0, eval_interval=20_000,
        target_entropy=-2.0, alpha_v=0.95, alpha_phi=0.97, lambda_lr=5e-4,
        lambda_bounds=(-1.5, 6.0),
        offline_warmup_rounds=3000)
    t0 = time.time()
    res = run_distill(cfg, env, filt, n_skills=10, alpha=0.8, seed=seed)
    ev = evaluate_policies(res.policy, env, n_skills=10, episodes_per_skill=1, seed=seed)
    classes = [corridor_class(t["features"], env.config) for t in ev.trajectories]
    n_classes = len({c for c in classes if c is not None})
    thr = 0.7 * res.stats.v_star
    sat = int((ev.returns >= thr).sum())
    print(f"combo seed {seed}: {time.time()-t0:.0f}s eval {ev.returns.mean():7.1f} "
          f"classes {n_classes} div {ev.diversity:6.1f} sat {sat}/10 v* {res.stats.v_star:6.1f}",
          flush=True)
    print("  eval:", np.round(ev.returns, 0), flush=True)
    print("  sig: ", np.round(res.lagrange.ext_weights(), 2), flush=True)
