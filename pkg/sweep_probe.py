import numpy as np

from divskill.archive import filter_archive
from divskill.cns import CnsConfig, run_cns
from divskill.distill import DistillConfig, run_distill, evaluate_policies
from divskill.envs import MazeConfig, MazeEnv
from divskill.nets import mlp_forward, split_policy_output

env = MazeEnv(MazeConfig(start=(-2.75, 0.0), delta=0.25))
cns = run_cns(CnsConfig(n_skills=10, jitter_starts=True), env, alpha=0.8, seed=0)
filt = filter_archive(cns.archive, 0.25)
onehot = np.eye(10, dtype=np.float32)


def probe(res, label):
    ev = evaluate_policies(res.policy, env, n_skills=10, episodes_per_skill=1, seed=0)
    print(f"{label}: eval mean {ev.returns.mean():7.1f}", np.round(ev.returns, 0), flush=True)
    for z in (0, 1):
        for x, y in ((-2.75, 0.0), (0.0, -1.35), (2.25, -3.0)):
            obs = np.array([x, y, 0, 0], dtype=np.float32)
            pin = np.concatenate([obs, onehot[z]])[None]
            out, _ = mlp_forward(res.policy, pin)
            mean, log_std, _ = split_policy_output(out, 2)
            act = np.tanh(mean[0])
            qs = []
            for a in ([1, 0], [-1, 0], [0, 0]):
                qin = np.concatenate([obs, onehot[z], np.array(a, np.float32)])[None]
                q, _ = mlp_forward(res.ext_critics, qin)
                qs.append(round(float(q.mean()), 1))
            print(f"  z{z} ({x:+.2f},{y:+.2f}): act ({act[0]:+.2f},{act[1]:+.2f}) "
                  f"std {np.exp(log_std[0]).round(2)} Q[R,L,0] {qs}", flush=True)


base = dict(
    num_envs=24, batch_size=128, utd_policy=4, utd_critic=4,
    lr_actor=1e-3, lr_critic=1e-3, polyak=0.05, gamma=0.95,
    hidden_depth=2, hidden_size=32, num_critics=3, critic_subset=2,
    buffer_capacity=300_000, start_steps=0, eval_interval=50_000,
    target_entropy=-2.0, alpha_v=0.95, alpha_phi=0.97, lambda_lr=2e-4,
    lambda_bounds=(-1.5, 6.0), offline_warmup_rounds=3000, no_diversity=True)

for steps in (24, 5_000, 15_000, 30_000):
    cfg = DistillConfig(total_steps=steps, **base)
    res = run_distill(cfg, env, filt, n_skills=10, alpha=0.8, seed=0)
    probe(res, f"after {steps} online steps")
