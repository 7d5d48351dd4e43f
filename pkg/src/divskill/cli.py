"""Experiment runner: run / ablate / export / eval verbs over JSON run configs.

A run executes, per seed: trajectory search, top-fraction filtering,
distillation, and deterministic evaluation, leaving four artifacts plus a
manifest in out/seed_<s>/:

    archive.jsonl   every search-stage trajectory (one JSON record per line)
    metrics.csv     distillation metrics per interval
    checkpoint.npz  policy and critic parameter map
    eval.jsonl      evaluation episodes (skill, return, feature path)
    manifest.json   effective config echo, content hashes, version string
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import subprocess
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .aggregates import iqm
from .archive import filter_archive, load_jsonl, save_jsonl
from .cns import run_cns
from .config import ConfigError, RunConfig, config_to_dict, load_config, sync_config
from .distill import evaluate_policies, run_distill
from .envs import make_env
from .nets import load_checkpoint, save_checkpoint

ABLATION_FLAGS = ("no_vmax", "no_symmetric", "no_diversity", "utd_1", "fixed_blend", "high_penalty")


def _version_string() -> str:
    try:
        rev = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            capture_output=True,
            text=True,
            timeout=5,
            check=True,
        ).stdout.strip()
        return f"{__version__}+g{rev}"
    except Exception:
        return __version__


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _build_env(cfg: RunConfig):
    scale = 10.0 if (cfg.ablations.high_penalty and cfg.env.name == "maze") else 1.0
    scale *= cfg.env.collision_penalty_scale
    return make_env(cfg.env.name, episode_len=cfg.env.episode_len, collision_penalty_scale=scale)


def _write_metrics_csv(path: Path, metrics: list[dict], n_skills: int) -> None:
    cols = (
        ["step"]
        + [f"v_{i}" for i in range(n_skills)]
        + [f"sigma_lambda_{i}" for i in range(n_skills)]
        + ["v_star", "diversity"]
    )
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(cols)
        for row in metrics:
            writer.writerow(
                [row["step"]]
                + [repr(float(v)) for v in row["v"]]
                + [repr(float(s)) for s in row["sigma_lambda"]]
                + [repr(float(row["v_star"])), repr(float(row["diversity"]))]
            )


def _write_eval_jsonl(path: Path, eval_result) -> None:
    with open(path, "w") as f:
        for t in eval_result.trajectories:
            f.write(
                json.dumps(
                    {
                        "skill": int(t["skill"]),
                        "episode": int(t["episode"]),
                        "ret": float(t["ret"]),
                        "features": np.asarray(t["features"]).tolist(),
                    }
                )
            )
            f.write("\n")


def run_seed(cfg: RunConfig, seed: int, seed_dir: Path) -> dict:
    """One full pipeline pass; returns the manifest dict (also written to disk)."""
    seed_dir.mkdir(parents=True, exist_ok=True)
    env = _build_env(cfg)

    scratch = cfg.cns is None or cfg.cns.iterations == 0
    if scratch:
        archive = None
        filtered = None
    else:
        cns_result = run_cns(cfg.cns, env, alpha=cfg.alpha, seed=seed)
        archive = cns_result.archive
        filtered = filter_archive(archive, cfg.keep_fraction)
        save_jsonl(archive, seed_dir / "archive.jsonl")

    distill_result = run_distill(
        cfg.distill, env, filtered, n_skills=cfg.n_skills, alpha=cfg.alpha, seed=seed
    )
    _write_metrics_csv(seed_dir / "metrics.csv", distill_result.metrics, cfg.n_skills)

    groups = {"policy": distill_result.policy, "ext": distill_result.ext_critics}
    if distill_result.int_critics:
        groups["int"] = distill_result.int_critics
    save_checkpoint(
        seed_dir / "checkpoint.npz",
        groups,
        meta={
            "n_skills": cfg.n_skills,
            "env": cfg.env.name,
            "v_star": distill_result.stats.v_star,
        },
    )

    eval_result = evaluate_policies(
        distill_result.policy,
        env,
        n_skills=cfg.n_skills,
        episodes_per_skill=cfg.eval_episodes,
        seed=seed,
        jitter=cfg.eval_jitter,
    )
    _write_eval_jsonl(seed_dir / "eval.jsonl", eval_result)

    artifacts = {
        name: _sha256(seed_dir / name)
        for name in ("metrics.csv", "checkpoint.npz", "eval.jsonl")
        if (seed_dir / name).exists()
    }
    if not scratch:
        artifacts["archive.jsonl"] = _sha256(seed_dir / "archive.jsonl")
    manifest = {
        "version": _version_string(),
        "seed": seed,
        "config": config_to_dict(cfg),
        "artifacts": artifacts,
        "summary": {
            "mean_return": eval_result.mean_return,
            "diversity": eval_result.diversity,
            "v_star": float(distill_result.stats.v_star),
            "per_skill_return": [float(r) for r in eval_result.returns],
        },
    }
    with open(seed_dir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return manifest


def cmd_run(config_path, out_dir, overrides=None) -> int:
    cfg = sync_config(load_config(config_path, overrides))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for seed in cfg.seeds:
        manifest = run_seed(cfg, seed, out / f"seed_{seed}")
        s = manifest["summary"]
        print(
            f"seed {seed}: return {s['mean_return']:.2f} diversity {s['diversity']:.3f} "
            f"v* {s['v_star']:.2f}"
        )
    return 0


def cmd_ablate(config_path, flag, out_dir, overrides=None) -> int:
    if flag not in ABLATION_FLAGS:
        raise ConfigError(f"unknown ablation flag '{flag}' (choose from {ABLATION_FLAGS})")
    overrides = list(overrides or [])
    if flag == "utd_1":
        overrides.append("distill.utd_policy=1")
    else:
        overrides.append(f"ablations.{flag}=true")
    return cmd_run(config_path, out_dir, overrides)


def _seed_dirs(run_dir: Path) -> list[Path]:
    dirs = sorted(run_dir.glob("seed_*"), key=lambda p: int(p.name.split("_")[1]))
    if not dirs:
        raise FileNotFoundError(f"no seed_* directories under {run_dir}")
    return dirs


def _read_metrics(path: Path) -> dict[str, list[float]]:
    with open(path) as f:
        rows = list(csv.DictReader(f))
    if not rows:
        raise FileNotFoundError(f"empty metrics file {path}")
    out: dict[str, list[float]] = {k: [] for k in rows[0]}
    for row in rows:
        for k, v in row.items():
            out[k].append(float(v))
    return out


def cmd_export(run_dir, what, out_dir=None) -> int:
    run = Path(run_dir)
    out = Path(out_dir) if out_dir else run / "export"
    out.mkdir(parents=True, exist_ok=True)
    seeds = _seed_dirs(run)

    if what == "paths":
        for sd in seeds:
            with open(sd / "eval.jsonl") as f:
                records = [json.loads(line) for line in f if line.strip()]
            by_skill: dict[int, dict] = {}
            for r in records:
                by_skill.setdefault(r["skill"], r)  # first episode per skill
            for skill, r in sorted(by_skill.items()):
                path = out / f"paths_{sd.name}_skill_{skill}.csv"
                with open(path, "w", newline="") as f:
                    writer = csv.writer(f)
                    writer.writerow(["t", "x", "y"])
                    for t, xy in enumerate(r["features"]):
                        writer.writerow([t, repr(float(xy[0])), repr(float(xy[1]))])
    elif what == "curves":
        per_seed = [_read_metrics(sd / "metrics.csv") for sd in seeds]
        n = min(len(m["step"]) for m in per_seed)
        with open(out / "curves.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["step", "return_iqm", "diversity_iqm"])
            for i in range(n):
                step = per_seed[0]["step"][i]
                v_cols = [k for k in per_seed[0] if k.startswith("v_") and k != "v_star"]
                rets = [float(np.mean([m[c][i] for c in v_cols])) for m in per_seed]
                divs = [m["diversity"][i] for m in per_seed]
                writer.writerow([int(step), repr(iqm(rets)), repr(iqm(divs))])
    elif what == "scatter":
        with open(out / "scatter.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["seed", "return", "diversity"])
            for sd in seeds:
                with open(sd / "manifest.json") as mf:
                    s = json.load(mf)["summary"]
                writer.writerow(
                    [sd.name.split("_")[1], repr(s["mean_return"]), repr(s["diversity"])]
                )
    else:
        raise ConfigError(f"unknown export kind '{what}' (paths|curves|scatter)")
    return 0


def cmd_eval(seed_dir, episodes=None, jitter=None, seed=None) -> int:
    sd = Path(seed_dir)
    with open(sd / "manifest.json") as f:
        manifest = json.load(f)
    from .config import config_from_dict

    cfg = sync_config(config_from_dict(manifest["config"]))
    groups, meta = load_checkpoint(sd / "checkpoint.npz")
    env = _build_env(cfg)
    result = evaluate_policies(
        groups["policy"],
        env,
        n_skills=int(meta["n_skills"]),
        episodes_per_skill=episodes or cfg.eval_episodes,
        seed=manifest["seed"] if seed is None else seed,
        jitter=cfg.eval_jitter if jitter is None else jitter,
    )
    _write_eval_jsonl(sd / "eval.jsonl", result)
    print(f"return {result.mean_return:.2f} diversity {result.diversity:.3f}")
    for skill, r in enumerate(result.returns):
        print(f"  skill {skill}: {r:.2f}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="divskill",
        description="Diverse near-optimal skills: spline trajectory search distilled into policies",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="run the full pipeline for every seed in the config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--seed", type=int, default=None, help="run only this seed")
    p_run.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")

    p_abl = sub.add_parser("ablate", help="run the pipeline with one ablation flag toggled")
    p_abl.add_argument("--config", required=True)
    p_abl.add_argument("--flag", required=True, choices=ABLATION_FLAGS)
    p_abl.add_argument("--out", required=True)
    p_abl.add_argument("--seed", type=int, default=None)
    p_abl.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")

    p_exp = sub.add_parser("export", help="emit plot-ready CSVs from a completed run")
    p_exp.add_argument("--run", required=True)
    p_exp.add_argument("--what", required=True, choices=["paths", "curves", "scatter"])
    p_exp.add_argument("--out", default=None)

    p_ev = sub.add_parser("eval", help="re-evaluate a checkpoint in a seed directory")
    p_ev.add_argument("--run", required=True, help="seed directory (out/seed_N)")
    p_ev.add_argument("--episodes", type=int, default=None)
    p_ev.add_argument("--jitter", action="store_true", default=None)
    p_ev.add_argument("--seed", type=int, default=None)

    args = parser.parse_args(argv)
    try:
        if args.verb == "run":
            overrides = list(args.overrides)
            if args.seed is not None:
                overrides.append(f"seeds=[{args.seed}]")
            return cmd_run(args.config, args.out, overrides)
        if args.verb == "ablate":
            overrides = list(args.overrides)
            if args.seed is not None:
                overrides.append(f"seeds=[{args.seed}]")
            return cmd_ablate(args.config, args.flag, args.out, overrides)
        if args.verb == "export":
            return cmd_export(args.run, args.what, args.out)
        if args.verb == "eval":
            return cmd_eval(args.run, episodes=args.episodes, jitter=args.jitter, seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
