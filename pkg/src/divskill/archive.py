"""Trajectory archive produced by the search stage and consumed by distillation.

One record per episode: skill id, undiscounted return, and the per-step
action/observation/reward/feature arrays. Serialized as JSON-lines, one
record per line, so external tools can stream it.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class TrajectoryRecord:
    skill: int
    ret: float
    actions: np.ndarray  # (T, u)
    obs: np.ndarray  # (T+1, obs_dim)
    rewards: np.ndarray  # (T,)
    features: np.ndarray  # (T, f)

    def __post_init__(self):
        if self.skill < 0:
            raise ValueError("skill id must be non-negative")
        if not math.isfinite(self.ret):
            raise ValueError("return must be finite")

    @property
    def mean_features(self) -> np.ndarray:
        return self.features.mean(axis=0)


@dataclass
class Archive:
    records: list[TrajectoryRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: TrajectoryRecord) -> None:
        self.records.append(record)

    def extend(self, records) -> None:
        self.records.extend(records)

    def skills(self) -> list[int]:
        return sorted({r.skill for r in self.records})

    def by_skill(self, skill: int) -> list[TrajectoryRecord]:
        return [r for r in self.records if r.skill == skill]

    def returns(self) -> np.ndarray:
        return np.array([r.ret for r in self.records])

    def mean_features_per_skill(self) -> dict[int, np.ndarray]:
        return {
            s: np.mean([r.mean_features for r in self.by_skill(s)], axis=0)
            for s in self.skills()
        }

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for r in self.records:
            h.update(np.int64(r.skill).tobytes())
            h.update(np.float64(r.ret).tobytes())
            for arr in (r.actions, r.obs, r.rewards, r.features):
                h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
        return h.hexdigest()


def filter_archive(archive: Archive, keep_fraction: float) -> Archive:
    """Keep the top ceil(keep_fraction * count) trajectories per skill by return.

    Sorting is stable descending, so equal returns keep insertion order.
    """
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError("keep_fraction must be in (0, 1]")
    if len(archive) == 0:
        raise ValueError("cannot filter an empty archive")
    out = Archive()
    for skill in archive.skills():
        group = archive.by_skill(skill)
        keep = math.ceil(keep_fraction * len(group))
        ranked = sorted(group, key=lambda r: -r.ret)  # stable: ties by insertion order
        out.extend(ranked[:keep])
    return out


def save_jsonl(archive: Archive, path) -> None:
    with open(path, "w") as f:
        for r in archive.records:
            f.write(
                json.dumps(
                    {
                        "skill": int(r.skill),
                        "ret": float(r.ret),
                        "actions": r.actions.tolist(),
                        "obs": r.obs.tolist(),
                        "rewards": r.rewards.tolist(),
                        "features": r.features.tolist(),
                    }
                )
            )
            f.write("\n")


def load_jsonl(path) -> Archive:
    archive = Archive()
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            archive.append(
                TrajectoryRecord(
                    skill=int(d["skill"]),
                    ret=float(d["ret"]),
                    actions=np.array(d["actions"], dtype=float),
                    obs=np.array(d["obs"], dtype=float),
                    rewards=np.array(d["rewards"], dtype=float),
                    features=np.array(d["features"], dtype=float),
                )
            )
    return archive
