"""Minimal feedforward machinery: layer-normalized MLPs with analytic gradients.

The architecture set is closed — linear, layer norm, relu, tanh — so the
backward pass is hand-derived per layer instead of going through a general
tape. Parameters live in flat dicts of arrays ("w0", "b0", "ln_w0", "ln_b0",
..., "wK", "bK"); an extra leading axis on every array turns the same code
into a critic ensemble via batched matmul broadcasting.

Also here: the Adam optimizer, Polyak target averaging, running
mean/variance normalizers, and the tanh-squashed Gaussian policy head
(sampling, log-probs and their exact parameter gradients).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LN_EPS = 1e-5
LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0


# ---------------------------------------------------------------------------
# MLP
# ---------------------------------------------------------------------------


def num_hidden(params: dict) -> int:
    return sum(1 for k in params if k.startswith("ln_w"))


def init_mlp(
    rng: np.random.Generator,
    in_dim: int,
    hidden: tuple[int, ...],
    out_dim: int,
    ensemble: int | None = None,
    dtype=np.float32,
) -> dict[str, np.ndarray]:
    """Fan-in uniform init; layer norm (gain 1, offset 0) after every hidden linear."""
    params: dict[str, np.ndarray] = {}
    sizes = (in_dim, *hidden, out_dim)
    lead = () if ensemble is None else (ensemble,)
    for i in range(len(sizes) - 1):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        bound = 1.0 / np.sqrt(fan_in)
        params[f"w{i}"] = rng.uniform(-bound, bound, size=(*lead, fan_in, fan_out)).astype(dtype)
        params[f"b{i}"] = rng.uniform(-bound, bound, size=(*lead, fan_out)).astype(dtype)
        if i < len(sizes) - 2:
            params[f"ln_w{i}"] = np.ones((*lead, fan_out), dtype=dtype)
            params[f"ln_b{i}"] = np.zeros((*lead, fan_out), dtype=dtype)
    return params


def mlp_forward(params: dict, x: np.ndarray):
    """Forward pass; returns (output, tape) with every intermediate the backward needs.

    x is (..., batch, in_dim). With ensemble parameters (E, in, out) a plain
    (batch, in) input broadcasts to an (E, batch, out) output.
    """
    n_h = num_hidden(params)
    if x.shape[-1] != params["w0"].shape[-2]:
        raise ValueError(f"input dim {x.shape[-1]} != expected {params['w0'].shape[-2]}")
    if params["w0"].ndim == 3 and x.ndim == 2:
        # materialize the ensemble axis up front: every matmul then takes the
        # fast batched path instead of the broadcast fallback
        x = np.ascontiguousarray(np.broadcast_to(x, (params["w0"].shape[0],) + x.shape))
    tape = {"x": [], "xhat": [], "inv_std": [], "pre_act": []}
    h = x
    for i in range(n_h):
        tape["x"].append(h)
        z = h @ params[f"w{i}"] + np.expand_dims(params[f"b{i}"], -2)
        mu = z.mean(axis=-1, keepdims=True)
        zc = z - mu
        var = (zc * zc).mean(axis=-1, keepdims=True)
        inv_std = 1.0 / np.sqrt(var + LN_EPS)
        xhat = zc * inv_std
        zn = np.expand_dims(params[f"ln_w{i}"], -2) * xhat + np.expand_dims(params[f"ln_b{i}"], -2)
        tape["xhat"].append(xhat)
        tape["inv_std"].append(inv_std)
        tape["pre_act"].append(zn)
        h = np.maximum(zn, 0.0)
    tape["x"].append(h)
    y = h @ params[f"w{n_h}"] + np.expand_dims(params[f"b{n_h}"], -2)
    return y, tape


def mlp_input_grad(params: dict, tape: dict, dy: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. the forward input only (no parameter gradients).

    Cheaper than mlp_backward when a net is differentiated through rather
    than trained, e.g. critics inside the policy objective.
    """
    n_h = num_hidden(params)
    dh = dy @ np.swapaxes(params[f"w{n_h}"], -1, -2)
    for i in reversed(range(n_h)):
        dzn = dh * (tape["pre_act"][i] > 0)
        xhat = tape["xhat"][i]
        dxhat = dzn * np.expand_dims(params[f"ln_w{i}"], -2)
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        dz = tape["inv_std"][i] * (dxhat - m1 - xhat * m2)
        dh = dz @ np.swapaxes(params[f"w{i}"], -1, -2)
    return dh


def mlp_backward(params: dict, tape: dict, dy: np.ndarray):
    """Exact gradients of a scalar loss given dLoss/doutput.

    Returns (grads, dx): grads matches the params dict, dx is the gradient
    with respect to the forward input (per ensemble member if ensembled).
    """
    n_h = num_hidden(params)
    if len(tape["x"]) != n_h + 1:
        raise ValueError("tape does not match parameter layout")
    grads: dict[str, np.ndarray] = {}
    h_last = tape["x"][n_h]
    grads[f"w{n_h}"] = np.swapaxes(h_last, -1, -2) @ dy
    grads[f"b{n_h}"] = dy.sum(axis=-2)
    dh = dy @ np.swapaxes(params[f"w{n_h}"], -1, -2)
    for i in reversed(range(n_h)):
        dzn = dh * (tape["pre_act"][i] > 0)
        xhat = tape["xhat"][i]
        grads[f"ln_w{i}"] = (dzn * xhat).sum(axis=-2)
        grads[f"ln_b{i}"] = dzn.sum(axis=-2)
        dxhat = dzn * np.expand_dims(params[f"ln_w{i}"], -2)
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        dz = tape["inv_std"][i] * (dxhat - m1 - xhat * m2)
        x_in = tape["x"][i]
        grads[f"w{i}"] = np.swapaxes(x_in, -1, -2) @ dz
        grads[f"b{i}"] = dz.sum(axis=-2)
        dh = dz @ np.swapaxes(params[f"w{i}"], -1, -2)
    return grads, dh


# ---------------------------------------------------------------------------
# Optimizer / targets
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0


def adam_init(params: dict) -> AdamState:
    return AdamState(
        m={k: np.zeros_like(p) for k, p in params.items()},
        v={k: np.zeros_like(p) for k, p in params.items()},
    )


def adam_step(
    params: dict,
    grads: dict,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
):
    """Bias-corrected adaptive-moment update; returns (new_params, new_state)."""
    t = state.t + 1
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    new_params, new_m, new_v = {}, {}, {}
    for k, p in params.items():
        g = grads[k]
        m = beta1 * state.m[k] + (1.0 - beta1) * g
        v = beta2 * state.v[k] + (1.0 - beta2) * g * g
        new_params[k] = p - lr * (m / c1) / (np.sqrt(v / c2) + eps)
        new_m[k] = m
        new_v[k] = v
    return new_params, AdamState(m=new_m, v=new_v, t=t)


def polyak(target: dict, online: dict, rho: float) -> dict:
    """target' = (1 - rho) * target + rho * online, elementwise."""
    if not 0.0 < rho <= 1.0:
        raise ValueError("rho must be in (0, 1]")
    return {k: (1.0 - rho) * target[k] + rho * online[k] for k in target}


# ---------------------------------------------------------------------------
# Running normalizer
# ---------------------------------------------------------------------------


@dataclass
class RunningNorm:
    """Streaming mean/variance with a variance floor, parallel (batch) updates."""

    count: float = 0.0
    mean: np.ndarray | float = 0.0
    m2: np.ndarray | float = 0.0
    var_floor: float = 1e-8

    def update(self, batch) -> None:
        x = np.asarray(batch, dtype=float)
        x = x.reshape(-1, *np.shape(self.mean)) if np.ndim(self.mean) else x.reshape(-1)
        n = x.shape[0]
        if n == 0:
            return
        b_mean = x.mean(axis=0)
        b_m2 = ((x - b_mean) ** 2).sum(axis=0)
        if self.count == 0:
            self.count = float(n)
            self.mean = b_mean
            self.m2 = b_m2
            return
        delta = b_mean - self.mean
        tot = self.count + n
        self.mean = self.mean + delta * (n / tot)
        self.m2 = self.m2 + b_m2 + delta**2 * (self.count * n / tot)
        self.count = tot

    @classmethod
    def vector(cls, dim: int) -> "RunningNorm":
        return cls(mean=np.zeros(dim), m2=np.zeros(dim))

    @property
    def var(self):
        if self.count == 0:
            return 1.0  # identity scale before any data
        return np.maximum(self.m2 / self.count, self.var_floor)

    @property
    def std(self):
        return np.sqrt(self.var)

    def normalize(self, x, center: bool = True):
        """Standardize x; with center=False only divide by the running std.

        Scale-only mode keeps reward signs and zero-points stable when the
        stream's mean drifts (e.g. offline-to-online reward shifts).
        """
        if self.count == 0:
            return np.asarray(x, dtype=float)
        if center:
            return (np.asarray(x, dtype=float) - self.mean) / self.std
        return np.asarray(x, dtype=float) / self.std


# ---------------------------------------------------------------------------
# Tanh-squashed Gaussian policy head
# ---------------------------------------------------------------------------


def split_policy_output(y: np.ndarray, action_dim: int):
    """Split the policy MLP output into (mean, clamped log_std, clamp mask)."""
    mean = y[..., :action_dim]
    raw = y[..., action_dim:]
    log_std = np.clip(raw, LOG_STD_MIN, LOG_STD_MAX)
    pass_mask = (raw > LOG_STD_MIN) & (raw < LOG_STD_MAX)
    return mean, log_std, pass_mask


def squash_sample(mean: np.ndarray, log_std: np.ndarray, eps_noise: np.ndarray):
    """Reparameterized draw: pre_tanh = mean + std * eps, action = tanh(pre_tanh)."""
    pre = mean + np.exp(log_std) * eps_noise
    return np.tanh(pre), pre


def squashed_log_prob(mean: np.ndarray, log_std: np.ndarray, pre_tanh: np.ndarray) -> np.ndarray:
    """log pi(a|s) for a = tanh(pre_tanh) under N(mean, exp(log_std)^2), summed over dims.

    The change-of-variables term uses the exact identity
    log(1 - tanh(u)^2) = 2 (log 2 - u - softplus(-2u)), which stays finite for
    saturated actions without an epsilon fudge.
    """
    std = np.exp(log_std)
    z = (pre_tanh - mean) / std
    gauss = -0.5 * z**2 - log_std - 0.5 * np.log(2.0 * np.pi)
    correction = 2.0 * (np.log(2.0) - pre_tanh - np.logaddexp(0.0, -2.0 * pre_tanh))
    return (gauss - correction).sum(axis=-1)


def squashed_log_prob_grads(mean: np.ndarray, log_std: np.ndarray, pre_tanh: np.ndarray):
    """d log pi / d mean and d log pi / d log_std through the reparameterized sample.

    pre_tanh is mean + exp(log_std) * eps with eps held fixed. The Gaussian
    density's direct parameter terms cancel against the sample path, leaving
    only the squash correction: d/dmean = 2 tanh(u), d/dlog_std = 2 tanh(u)
    (u - mean) - 1, per dimension.
    """
    a = np.tanh(pre_tanh)
    diff = pre_tanh - mean
    return 2.0 * a, 2.0 * a * diff - 1.0


def action_grads(pre_tanh: np.ndarray):
    """da/dmean and da/dlog_std for a = tanh(mean + exp(log_std) * eps), eps fixed."""
    a = np.tanh(pre_tanh)
    return 1.0 - a**2  # multiply by 1 for mean, by (pre - mean) for log_std


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(path, groups: dict[str, dict[str, np.ndarray]], meta: dict | None = None):
    """Write grouped parameter dicts as one flat key->tensor .npz map.

    Keys are '<group>/<param>'; metadata scalars go under 'meta/<key>'.
    """
    flat: dict[str, np.ndarray] = {}
    for group, params in groups.items():
        for k, v in params.items():
            flat[f"{group}/{k}"] = v
    for k, v in (meta or {}).items():
        flat[f"meta/{k}"] = np.asarray(v)
    np.savez(path, **flat)


def load_checkpoint(path):
    """Inverse of save_checkpoint: returns (groups, meta)."""
    try:
        data = np.load(path, allow_pickle=False)
    except Exception as exc:  # zip/format corruption
        raise ValueError(f"unreadable checkpoint {path}: {exc}") from exc
    groups: dict[str, dict[str, np.ndarray]] = {}
    meta: dict = {}
    for key in data.files:
        group, name = key.split("/", 1)
        if group == "meta":
            meta[name] = data[key][()] if data[key].ndim == 0 else data[key]
        else:
            groups.setdefault(group, {})[name] = data[key]
    return groups, meta


@dataclass
class TrainableNet:
    """Bundle of params, Adam state, and an optional Polyak target copy."""

    params: dict[str, np.ndarray]
    opt: AdamState = field(default=None)
    target: dict[str, np.ndarray] | None = None

    def __post_init__(self):
        if self.opt is None:
            self.opt = adam_init(self.params)

    def apply(self, grads: dict, lr: float) -> None:
        self.params, self.opt = adam_step(self.params, grads, self.opt, lr)

    def sync_target(self, rho: float) -> None:
        if self.target is None:
            self.target = {k: v.copy() for k, v in self.params.items()}
        else:
            self.target = polyak(self.target, self.params, rho)
