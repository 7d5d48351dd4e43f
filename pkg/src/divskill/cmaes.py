"""(mu/mu_w, lambda)-CMA-ES with the canonical tutorial constants.

Maximization convention throughout: higher fitness is better, ties are broken
by ascending candidate index. The covariance eigendecomposition is refreshed
every generation (search dimensions here are tiny), eigenvalues are clamped to
1e-12 of the largest, and the step-size exponent is capped at 1 so sigma stays
finite under arbitrary fitness sequences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class AskResult:
    """One generation of candidates plus the standard-normal draws behind them."""

    candidates: np.ndarray  # (popsize, dim)
    z_samples: np.ndarray  # (popsize, dim)


@dataclass(frozen=True)
class CmaState:
    mean: np.ndarray
    sigma: float
    cov: np.ndarray
    path_sigma: np.ndarray
    path_c: np.ndarray
    weights: np.ndarray  # (mu,) positive, decreasing, sums to 1
    mu: int
    popsize: int
    mu_eff: float
    c_sigma: float
    d_sigma: float
    c_c: float
    c_1: float
    c_mu: float
    chi_n: float
    generation: int
    rng: np.random.Generator

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def cma_init(
    dim: int,
    popsize: int,
    elite_ratio: float,
    sigma0: float,
    mean0=None,
    seed: int | None = None,
) -> CmaState:
    """Fresh search state: identity covariance, zero paths, log-linear weights.

    mu = ceil(elite_ratio * popsize); recombination weights are proportional to
    ln(mu + 1/2) - ln(k) for rank k. Raises on sigma0 <= 0, dim < 1, popsize < 2
    or elite_ratio outside (0, 1].
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if popsize < 2:
        raise ValueError("popsize must be >= 2")
    if not 0.0 < elite_ratio <= 1.0:
        raise ValueError("elite_ratio must be in (0, 1]")
    if not sigma0 > 0:
        raise ValueError("sigma0 must be positive")

    mu = int(math.ceil(elite_ratio * popsize))
    raw = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    weights = raw / raw.sum()
    mu_eff = 1.0 / np.sum(weights**2)

    n = float(dim)
    c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0)
    d_sigma = 1.0 + 2.0 * max(0.0, math.sqrt((mu_eff - 1.0) / (n + 1.0)) - 1.0) + c_sigma
    c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n)
    c_1 = 2.0 / ((n + 1.3) ** 2 + mu_eff)
    c_mu = min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0) ** 2 + mu_eff))
    chi_n = math.sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n**2))

    mean = np.zeros(dim) if mean0 is None else np.array(mean0, dtype=float)
    if mean.shape != (dim,):
        raise ValueError(f"mean0 must have shape ({dim},)")

    return CmaState(
        mean=mean,
        sigma=float(sigma0),
        cov=np.eye(dim),
        path_sigma=np.zeros(dim),
        path_c=np.zeros(dim),
        weights=weights,
        mu=mu,
        popsize=int(popsize),
        mu_eff=float(mu_eff),
        c_sigma=float(c_sigma),
        d_sigma=float(d_sigma),
        c_c=float(c_c),
        c_1=float(c_1),
        c_mu=float(c_mu),
        chi_n=float(chi_n),
        generation=0,
        rng=np.random.default_rng(seed),
    )


def _eig_decomposition(cov: np.ndarray):
    """Symmetrized eigendecomposition with the relative eigenvalue floor."""
    sym = (cov + cov.T) / 2.0
    vals, vecs = np.linalg.eigh(sym)
    top = vals[-1]
    if not np.isfinite(top) or top <= 0.0:
        raise FloatingPointError("covariance eigendecomposition failed (non-positive spectrum)")
    vals = np.maximum(vals, top * 1e-12)
    return vals, vecs


def cma_ask(state: CmaState, rng: np.random.Generator | None = None) -> AskResult:
    """Sample popsize candidates from N(mean, sigma^2 * C)."""
    gen = rng if rng is not None else state.rng
    vals, vecs = _eig_decomposition(state.cov)
    z = gen.standard_normal((state.popsize, state.dim))
    y = (z * np.sqrt(vals)) @ vecs.T
    return AskResult(candidates=state.mean + state.sigma * y, z_samples=z)


def cma_tell(state: CmaState, result: AskResult, fitness) -> CmaState:
    """One generation update from evaluated candidates (higher fitness wins).

    Weighted recombination of the top-mu candidates, cumulative step-size
    adaptation, and the rank-one plus rank-mu covariance update.
    """
    fit = np.asarray(fitness, dtype=float)
    if fit.shape != (state.popsize,):
        raise ValueError(f"fitness must have shape ({state.popsize},)")
    if np.isnan(fit).any():
        raise ValueError("fitness contains NaN")
    if result.candidates.shape != (state.popsize, state.dim):
        raise ValueError("ask result does not match state")

    order = np.argsort(-fit, kind="stable")
    elite = result.candidates[order[: state.mu]]

    mean_new = state.weights @ elite
    y_w = (mean_new - state.mean) / state.sigma

    vals, vecs = _eig_decomposition(state.cov)
    inv_sqrt = (vecs / np.sqrt(vals)) @ vecs.T

    p_sigma = (1.0 - state.c_sigma) * state.path_sigma + math.sqrt(
        state.c_sigma * (2.0 - state.c_sigma) * state.mu_eff
    ) * (inv_sqrt @ y_w)

    gen = state.generation + 1
    p_norm = float(np.linalg.norm(p_sigma))
    h_thresh = (1.4 + 2.0 / (state.dim + 1.0)) * state.chi_n * math.sqrt(
        1.0 - (1.0 - state.c_sigma) ** (2 * gen)
    )
    h_sigma = 1.0 if p_norm < h_thresh else 0.0

    p_c = (1.0 - state.c_c) * state.path_c + h_sigma * math.sqrt(
        state.c_c * (2.0 - state.c_c) * state.mu_eff
    ) * y_w

    y_elite = (elite - state.mean) / state.sigma
    rank_mu = (state.weights[:, None] * y_elite).T @ y_elite
    old_factor = (
        1.0
        - state.c_1
        - state.c_mu
        + (1.0 - h_sigma) * state.c_1 * state.c_c * (2.0 - state.c_c)
    )
    cov = old_factor * state.cov + state.c_1 * np.outer(p_c, p_c) + state.c_mu * rank_mu
    cov = (cov + cov.T) / 2.0

    sigma = state.sigma * math.exp(
        min(1.0, (state.c_sigma / state.d_sigma) * (p_norm / state.chi_n - 1.0))
    )

    return replace(
        state,
        mean=mean_new,
        sigma=sigma,
        cov=cov,
        path_sigma=p_sigma,
        path_c=p_c,
        generation=gen,
    )
