"""Diverse near-optimal skill discovery.

Two stages: evolutionary constrained novelty search over B-spline action
trajectories, then distillation of the resulting archive into a set of
skill-conditioned reactive policies via constrained off-policy learning.
"""

__version__ = "0.1.0"

from .archive import Archive, TrajectoryRecord, filter_archive
from .cns import CnsConfig, CnsResult, LagrangeState, SkillStats, run_cns
from .distill import DistillConfig, DistillResult, evaluate_policies, run_distill
from .diversity import domino_intrinsic, knn_entropy, nn_diversity
from .envs import MazeEnv, PushEnv, make_env, rollout
from .splines import SplineParams, basis_matrix, eval_trajectory

__all__ = [
    "Archive",
    "TrajectoryRecord",
    "filter_archive",
    "CnsConfig",
    "CnsResult",
    "LagrangeState",
    "SkillStats",
    "run_cns",
    "DistillConfig",
    "DistillResult",
    "evaluate_policies",
    "run_distill",
    "domino_intrinsic",
    "knn_entropy",
    "nn_diversity",
    "MazeEnv",
    "PushEnv",
    "make_env",
    "rollout",
    "SplineParams",
    "basis_matrix",
    "eval_trajectory",
    "__version__",
]
