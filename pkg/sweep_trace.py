import numpy as np

from divskill.archive import filter_archive
from divskill.cns import CnsConfig, run_cns
from divskill.distill import DistillConfig, run_distill, evaluate_policies
from divskill.envs import MazeConfig, MazeEnv

env = MazeEnv(MazeConfig(start=(-2.75, 0.0), delta=0.25))
cns = run_cns(CnsConfig(n_skills=10, jitter_starts=True), env, alpha=0.8, seed=0)
filt = filter_archive(cns.archive, 0.25)
cfg = DistillConfig(
    total_steps=100_000, num_envs=24, batch_size=128, utd_policy=4, utd_critic=4,
    lr_actor=1e-3, lr_critic=1e-3, polyak=0.05, gamma=0.95,
    hidden_depth=2, hidden_size=32, num_critics=3, critic_subset=2,
    buffer_capacity=300_000, start_steps=0, eval_interval=5_000,
    target_entropy=-2.0, alpha_v=0.95, alpha_phi=0.97, lambda_lr=2e-4,
    lambda_bounds=(-1.5, 6.0), offline_warmup_rounds=3000)
res = run_distill(cfg, env, filt, n_skills=10, alpha=0.8, seed=0)
for row in res.metrics:
    print(f"step {row['step']:>7} v* {row['v_star']:6.1f} div {row['diversity']:7.2f} "
          f"v {np.array2string(row['v'], precision=0, suppress_small=True, max_line_width=200)} "
          f"sig {np.array2string(row['sigma_lambda'], precision=2, max_line_width=200)}", flush=True)
ev = evaluate_policies(res.policy, env, n_skills=10, episodes_per_skill=1, seed=0)
print("final eval:", np.round(ev.returns, 0))
