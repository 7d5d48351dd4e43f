import time

import numpy as np

from divskill.archive import filter_archive
from divskill.cns import CnsConfig, run_cns
from divskill.distill import DistillConfig, run_distill, evaluate_policies
from divskill.envs import MazeConfig, MazeEnv

env = MazeEnv(MazeConfig(start=(-2.75, 0.0), delta=0.25))
cns = run_cns(CnsConfig(n_skills=10, jitter_starts=True), env, alpha=0.8, seed=0)
filt = filter_archive(cns.archive, 0.25)

base = dict(
    total_steps=100_000, num_envs=24, batch_size=128, utd_policy=4, utd_critic=4,
    lr_actor=1e-3, lr_critic=1e-3, polyak=0.05, gamma=0.95,
    num_critics=3, critic_subset=2,
    buffer_capacity=300_000, start_steps=0, eval_interval=25_000,
    target_entropy=-2.0, alpha_v=0.95, alpha_phi=0.97, lambda_lr=2e-4,
    lambda_bounds=(-1.5, 6.0), offline_warmup_rounds=3000)

variants = {
    "no_diversity_h32": dict(hidden_depth=2, hidden_size=32, no_diversity=True),
    "full_h64": dict(hidden_depth=2, hidden_size=64),
}
for name, extra in variants.items():
    cfg = DistillConfig(**{**base, **extra})
    t0 = time.time()
    res = run_distill(cfg, env, filt, n_skills=10, alpha=0.8, seed=0)
    ev = evaluate_policies(res.policy, env, n_skills=10, episodes_per_skill=1, seed=0)
    print(f"{name}: {time.time()-t0:.0f}s eval {ev.returns.mean():7.1f} "
          f"div {ev.diversity:6.1f} v* {res.stats.v_star:6.1f}", flush=True)
    print("  eval:", np.round(ev.returns, 0), flush=True)
    for row in res.metrics[::1]:
        print(f"    step {row['step']:>7} v_mean {row['v'].mean():7.1f} "
              f"v {np.array2string(row['v'], precision=0, suppress_small=True, max_line_width=200)}",
              flush=True)
