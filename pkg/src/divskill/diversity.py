"""Feature-space diversity measures.

Four related quantities:
  * nn_diversity    — mean squared distance of each skill's expected feature
                      vector to its nearest-neighbor skill (the set-level
                      diversity objective; squared distance).
  * knn_entropy     — particle-based entropy estimate: sum of log k-th
                      nearest-neighbor distances (unsquared).
  * step intrinsic  — per-timestep trajectory-search reward: log distance to
                      the nearest other skill's state features at the same
                      timestep.
  * domino_intrinsic— per-state policy-stage reward: feature dot product with
                      the difference to the nearest-neighbor skill's mean
                      features (the gradient of nn_diversity in phi_bar).

Every log carries an epsilon guard so coincident points stay finite.
"""

from __future__ import annotations

import numpy as np

EPS_LOG = 1e-9


def _as_matrix(points) -> np.ndarray:
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError("points must form an (n, f) matrix")
    if not np.all(np.isfinite(x)):
        raise ValueError("points must be finite")
    return x


def _pairwise_sq_dists(x: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - x[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def nn_diversity(phis) -> float:
    """Mean over skills of the squared distance to the nearest other skill."""
    x = _as_matrix(phis)
    n = x.shape[0]
    if n < 2:
        raise ValueError("diversity needs at least 2 feature vectors")
    d2 = _pairwise_sq_dists(x)
    np.fill_diagonal(d2, np.inf)
    return float(d2.min(axis=1).mean())


def knn_entropy(points, k: int = 1, eps: float = EPS_LOG) -> float:
    """Sum of log distances to each point's k-th nearest neighbor."""
    x = _as_matrix(points)
    n = x.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if n <= k:
        raise ValueError(f"need more than k={k} points, got {n}")
    d2 = _pairwise_sq_dists(x)
    np.fill_diagonal(d2, np.inf)
    d2.sort(axis=1)
    kth = np.sqrt(d2[:, k - 1])
    return float(np.log(kth + eps).sum())


def step_intrinsic_series(
    traj: np.ndarray,
    others,
    eps: float = EPS_LOG,
    over_all_timesteps: bool = False,
) -> np.ndarray:
    """Per-timestep log nearest-skill feature distance for a whole trajectory.

    traj is (T, f); others is a sequence of (T, f) feature trajectories from
    the remaining skills. By default states are matched at the same timestep;
    with over_all_timesteps the minimum also runs over every other timestep.
    """
    x = np.asarray(traj, dtype=float)
    if not others:
        raise ValueError("need at least one other skill")
    o = np.stack([np.asarray(t, dtype=float) for t in others])  # (J, T, f)
    if o.shape[1] != x.shape[0] or o.shape[2] != x.shape[1]:
        raise ValueError("feature trajectories must share (T, f)")
    if over_all_timesteps:
        diff = x[:, None, None, :] - o[None, :, :, :]  # (T, J, T, f)
        dists = np.linalg.norm(diff, axis=-1).min(axis=(1, 2))
    else:
        diff = x[:, None, :] - o.transpose(1, 0, 2)  # (T, J, f)
        dists = np.linalg.norm(diff, axis=-1).min(axis=1)
    return np.log(eps + dists)


def cns_step_intrinsic(traj_i, others, t: int, eps: float = EPS_LOG) -> float:
    """Step-t intrinsic reward: log distance to the nearest other skill at time t."""
    series = step_intrinsic_series(traj_i, others, eps=eps)
    if not 0 <= t < len(series):
        raise ValueError(f"t={t} outside trajectory of length {len(series)}")
    return float(series[t])


def nearest_other(phi_bar: np.ndarray) -> np.ndarray:
    """Index of the nearest-neighbor skill (squared distance, self excluded) per skill."""
    x = _as_matrix(phi_bar)
    if x.shape[0] < 2:
        raise ValueError("need at least 2 skills")
    d2 = _pairwise_sq_dists(x)
    np.fill_diagonal(d2, np.inf)
    return d2.argmin(axis=1)


def domino_intrinsic(phi_s, z: int, stats) -> float:
    """Dot product of phi(s) with (phi_bar_z - phi_bar_j), j the nearest skill to z.

    `stats` is either an (n, f) matrix of per-skill mean features or any object
    with a `phi_bar` attribute holding one. The nearest neighbor is recomputed
    on every call.
    """
    phi_bar = _as_matrix(getattr(stats, "phi_bar", stats))
    j = nearest_other(phi_bar)[z]
    return float(np.dot(np.asarray(phi_s, dtype=float), phi_bar[z] - phi_bar[j]))


def domino_intrinsic_batch(phis: np.ndarray, zs: np.ndarray, phi_bar: np.ndarray) -> np.ndarray:
    """Vectorized domino_intrinsic for a batch of (phi, skill) pairs."""
    pb = _as_matrix(phi_bar)
    nn = nearest_other(pb)
    direction = pb - pb[nn]  # (n, f)
    return np.einsum("bf,bf->b", np.asarray(phis, dtype=float), direction[zs])
