"""Clamped uniform B-splines over action trajectories.

Open-loop trajectories are parameterized by a small control-point matrix and
interpolated to one control per timestep with a precomputed basis matrix.
The basis uses a clamped uniform knot vector, so the curve interpolates its
first and last control points exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class SplineParams:
    """Control points defining one open-loop trajectory.

    controls: (m, u) matrix of control points, one row per control point.
    degree: spline degree; must satisfy m >= degree + 1.
    horizon: number of timesteps T the trajectory is evaluated at.
    """

    controls: np.ndarray
    degree: int
    horizon: int

    def __post_init__(self):
        c = np.asarray(self.controls, dtype=float)
        if c.ndim != 2:
            raise ValueError("controls must be a 2-D (m, u) matrix")
        if not np.all(np.isfinite(c)):
            raise ValueError("controls must be finite")
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        if c.shape[0] < self.degree + 1:
            raise ValueError(
                f"need at least degree+1={self.degree + 1} control points, got {c.shape[0]}"
            )
        if self.horizon < 2:
            raise ValueError("horizon must be >= 2")
        object.__setattr__(self, "controls", c)

    @property
    def num_controls(self) -> int:
        return self.controls.shape[0]

    @property
    def control_dim(self) -> int:
        return self.controls.shape[1]


def make_spline_params(controls, horizon: int, degree: int = 3) -> SplineParams:
    """Build SplineParams, reducing the degree when there are few control points.

    With fewer than degree+1 control points the degree drops to m-1, so 4-5
    controls give a cubic and 2 controls degenerate to a straight line.
    """
    c = np.asarray(controls, dtype=float)
    if c.ndim != 2:
        raise ValueError("controls must be a 2-D (m, u) matrix")
    eff_degree = min(degree, c.shape[0] - 1)
    return SplineParams(controls=c, degree=eff_degree, horizon=horizon)


def clamped_knots(m: int, degree: int) -> np.ndarray:
    """Clamped uniform knot vector on [0, 1] for m control points."""
    inner = np.linspace(0.0, 1.0, m - degree + 1)[1:-1]
    return np.concatenate(
        [np.zeros(degree + 1), inner, np.ones(degree + 1)]
    )


def _basis(m: int, degree: int, horizon: int) -> np.ndarray:
    """Cox-de Boor basis table evaluated at T uniform parameters."""
    knots = clamped_knots(m, degree)
    t = np.linspace(0.0, 1.0, horizon)

    # Degree-0 indicators; the last non-empty interval is closed on the right
    # so t = 1 lands in it instead of nowhere.
    n0 = ((knots[:-1][None, :] <= t[:, None]) & (t[:, None] < knots[1:][None, :])).astype(float)
    last = np.flatnonzero(np.diff(knots) > 0)[-1]
    at_end = t == knots[-1]
    n0[at_end, :] = 0.0
    n0[at_end, last] = 1.0

    n = n0
    for d in range(1, degree + 1):
        cols = len(knots) - 1 - d
        left_den = knots[d : d + cols] - knots[:cols]
        right_den = knots[d + 1 : d + 1 + cols] - knots[1 : 1 + cols]
        left_num = t[:, None] - knots[None, :cols]
        right_num = knots[None, d + 1 : d + 1 + cols] - t[:, None]
        with np.errstate(invalid="ignore", divide="ignore"):
            left = np.where(left_den > 0, left_num / left_den * n[:, :cols], 0.0)
            right = np.where(right_den > 0, right_num / right_den * n[:, 1 : 1 + cols], 0.0)
        n = left + right
    return n


@lru_cache(maxsize=64)
def _basis_cached(m: int, degree: int, horizon: int) -> np.ndarray:
    b = _basis(m, degree, horizon)
    b.setflags(write=False)
    return b


def basis_matrix(m: int, degree: int, horizon: int) -> np.ndarray:
    """T x m matrix of basis weights; row t evaluates the spline at t/(T-1).

    Rows sum to 1 (partition of unity); the first and last rows are unit
    vectors because the knot vector is clamped. Cached per (m, degree, horizon).

    Raises ValueError if m < degree + 1 or horizon < 2.
    """
    if degree < 1:
        raise ValueError("degree must be >= 1")
    if m < degree + 1:
        raise ValueError(f"need m >= degree+1 ({degree + 1}), got m={m}")
    if horizon < 2:
        raise ValueError("horizon must be >= 2")
    return _basis_cached(int(m), int(degree), int(horizon))


def eval_trajectory(params: SplineParams, clip: bool = True) -> np.ndarray:
    """Interpolate control points to a (T, u) action sequence.

    The result is B @ controls, clamped to the [-1, 1] action box unless
    clip=False (the unclipped curve is what satisfies linearity and the
    convex-hull property exactly).
    """
    b = basis_matrix(params.num_controls, params.degree, params.horizon)
    traj = b @ params.controls
    if clip:
        traj = np.clip(traj, -1.0, 1.0)
    return traj


def eval_trajectory_batch(flat_controls: np.ndarray, m: int, u: int, degree: int, horizon: int, clip: bool = True) -> np.ndarray:
    """Decode a (k, m*u) batch of flattened control matrices to (k, T, u) trajectories."""
    flat = np.asarray(flat_controls, dtype=float)
    if flat.ndim != 2 or flat.shape[1] != m * u:
        raise ValueError(f"expected shape (k, {m * u}), got {flat.shape}")
    b = basis_matrix(m, degree, horizon)
    trajs = np.einsum("tm,kmu->ktu", b, flat.reshape(-1, m, u))
    if clip:
        trajs = np.clip(trajs, -1.0, 1.0)
    return trajs
