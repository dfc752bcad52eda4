"""Noise schedule, forward process, reverse samplers, and bound diagnostics.

Timesteps are 1-based: t runs over {1, ..., T}, with the convention
alpha_bar(0) == 1 so the t=1 formulas need no special casing. Schedule
arrays are float64; sample tensors are float32.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadRange,
    BadSubsequence,
    NonZeroFinalNoise,
    ShapeMismatch,
    StepOutOfRange,
)
from .rng import RngStream

DEFAULT_T = 1000
DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02


@dataclass
class NoiseSchedule:
    """Per-step beta/alpha tables; index 0 holds step t=1."""

    beta: np.ndarray

    alpha: np.ndarray = field(init=False)
    alpha_bar: np.ndarray = field(init=False)

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=np.float64)
        if self.beta.ndim != 1 or self.beta.size < 1:
            raise BadRange("beta table must be a nonempty vector")
        if np.any(self.beta <= 0.0) or np.any(self.beta >= 1.0):
            raise BadRange("beta values must lie in (0, 1)")
        self.alpha = 1.0 - self.beta
        self.alpha_bar = np.cumprod(self.alpha)

    @property
    def T(self) -> int:
        return int(self.beta.size)

    def _check_step(self, t: int, lo: int = 1) -> int:
        t = int(t)
        if t < lo or t > self.T:
            raise StepOutOfRange(f"t={t} outside [{lo}, {self.T}]")
        return t

    def beta_at(self, t: int) -> float:
        return float(self.beta[self._check_step(t) - 1])

    def alpha_at(self, t: int) -> float:
        return float(self.alpha[self._check_step(t) - 1])

    def alpha_bar_at(self, t: int) -> float:
        """alpha_bar(t) with alpha_bar(0) == 1."""
        t = int(t)
        if t == 0:
            return 1.0
        return float(self.alpha_bar[self._check_step(t) - 1])

    def posterior_variance(self, t: int) -> float:
        """beta_tilde(t) = beta_t * (1 - alpha_bar(t-1)) / (1 - alpha_bar(t))."""
        t = self._check_step(t)
        ab_prev = self.alpha_bar_at(t - 1)
        return self.beta_at(t) * (1.0 - ab_prev) / (1.0 - self.alpha_bar_at(t))


def linear_schedule(T: int, beta_start: float = DEFAULT_BETA_START,
                    beta_end: float = DEFAULT_BETA_END) -> NoiseSchedule:
    """Linearly interpolated beta from beta_start (t=1) to beta_end (t=T)."""
    if T < 1:
        raise BadRange(f"T must be >= 1, got {T}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise BadRange(f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})")
    return NoiseSchedule(beta=np.linspace(beta_start, beta_end, T))


@dataclass
class SamplerConfig:
    """Reverse-sampler selection: ancestral DDPM or subsequence DDIM."""

    kind: str = "ddpm"
    steps: int = 0          # 0 means "use the schedule's T"
    eta: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("ddpm", "ddim"):
            raise ValueError(f"sampler kind must be ddpm or ddim, got {self.kind!r}")
        if not (0.0 <= self.eta <= 1.0):
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeMismatch(f"shape {a.shape} vs {b.shape}")


def forward_sample(x0: np.ndarray, t: int, eps: np.ndarray,
                   sched: NoiseSchedule) -> np.ndarray:
    """x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps."""
    x0 = np.asarray(x0, dtype=np.float32)
    eps = np.asarray(eps, dtype=np.float32)
    _check_same_shape(x0, eps)
    ab = sched.alpha_bar_at(sched._check_step(t))
    return (np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps).astype(np.float32)


def posterior_params(x0: np.ndarray, xt: np.ndarray, t: int, sched: NoiseSchedule):
    """Mean and variance of q(x_{t-1} | x_t, x_0) for t >= 2."""
    x0 = np.asarray(x0, dtype=np.float64)
    xt = np.asarray(xt, dtype=np.float64)
    _check_same_shape(x0, xt)
    t = sched._check_step(t, lo=2)
    ab_prev = sched.alpha_bar_at(t - 1)
    ab = sched.alpha_bar_at(t)
    beta = sched.beta_at(t)
    alpha = sched.alpha_at(t)
    mean = (np.sqrt(ab_prev) * beta * x0 + np.sqrt(alpha) * (1.0 - ab_prev) * xt) / (1.0 - ab)
    var = beta * (1.0 - ab_prev) / (1.0 - ab)
    return mean.astype(np.float32), float(var)


def eps_to_mean(xt: np.ndarray, t: int, eps_hat: np.ndarray, sched: NoiseSchedule) -> np.ndarray:
    """Reverse-step mean implied by a noise prediction (float64)."""
    alpha = sched.alpha_at(t)
    ab = sched.alpha_bar_at(t)
    xt = np.asarray(xt, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    return (xt - (1.0 - alpha) / np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(alpha)


def ddpm_step(xt: np.ndarray, t: int, eps_hat: np.ndarray, z: np.ndarray,
              sched: NoiseSchedule) -> np.ndarray:
    """One ancestral reverse step with sigma_t = sqrt(posterior variance)."""
    xt = np.asarray(xt, dtype=np.float32)
    eps_hat = np.asarray(eps_hat, dtype=np.float32)
    z = np.asarray(z, dtype=np.float32)
    _check_same_shape(xt, eps_hat)
    _check_same_shape(xt, z)
    t = sched._check_step(t)
    if t == 1 and np.any(z != 0.0):
        raise NonZeroFinalNoise("z must be the zero tensor at t == 1")
    mean = eps_to_mean(xt, t, eps_hat, sched)
    sigma = np.sqrt(sched.posterior_variance(t)) if t > 1 else 0.0
    return (mean + sigma * z.astype(np.float64)).astype(np.float32)


def ddpm_sample(model, n: int, shape, sched: NoiseSchedule, rng: RngStream) -> np.ndarray:
    """Ancestral sampling of n tensors.

    Draw order: the full x_T batch first (n*prod(shape) normals), then one
    z batch per step t = T..2; t = 1 uses z = 0 and draws nothing.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    shape = tuple(int(s) for s in shape)
    batch_shape = (n,) + shape
    from .numerics import gaussian_sample

    x = gaussian_sample(rng, batch_shape)
    for t in range(sched.T, 0, -1):
        eps_hat = model.predict(x, np.full(n, t, dtype=np.int64))
        z = gaussian_sample(rng, batch_shape) if t > 1 else np.zeros(batch_shape, np.float32)
        x = ddpm_step(x, t, eps_hat, z, sched)
    return x


def ddim_timesteps(T: int, steps: int) -> np.ndarray:
    """Evenly spaced strictly increasing subsequence of {1..T} containing 1 and T."""
    steps = int(steps)
    if steps < 1 or steps > T:
        raise BadSubsequence(f"steps={steps} not in [1, T={T}]")
    if steps == 1:
        return np.array([T], dtype=np.int64)
    taus = np.round(np.linspace(1, T, steps)).astype(np.int64)
    if np.any(np.diff(taus) <= 0):
        raise BadSubsequence(f"cannot place {steps} strictly increasing steps in [1, {T}]")
    return taus


def ddim_sigma(sched: NoiseSchedule, t_cur: int, t_prev: int, eta: float) -> float:
    """Per-step DDIM noise scale; equals sqrt(posterior variance) at eta=1, steps=T."""
    ab_cur = sched.alpha_bar_at(t_cur)
    ab_prev = sched.alpha_bar_at(t_prev)
    return eta * np.sqrt((1.0 - ab_prev) / (1.0 - ab_cur)) * np.sqrt(1.0 - ab_cur / ab_prev)


def ddim_sample(model, n: int, shape, sched: NoiseSchedule, cfg: SamplerConfig,
                rng: RngStream, x_init: np.ndarray | None = None) -> np.ndarray:
    """DDIM sampling over a timestep subsequence.

    Draw order: x_T batch first (unless x_init is given), then one z batch
    per step whose sigma is nonzero. eta=0 draws nothing after x_T.
    """
    if cfg.kind != "ddim":
        raise ValueError("ddim_sample requires cfg.kind == 'ddim'")
    steps = cfg.steps if cfg.steps > 0 else sched.T
    taus = ddim_timesteps(sched.T, steps)
    shape = tuple(int(s) for s in shape)
    batch_shape = (n,) + shape
    from .numerics import gaussian_sample

    if x_init is not None:
        x = np.asarray(x_init, dtype=np.float32)
        if x.shape != batch_shape:
            raise ShapeMismatch(f"x_init shape {x.shape} vs {batch_shape}")
    else:
        x = gaussian_sample(rng, batch_shape)

    x64 = x.astype(np.float64)
    for i in range(len(taus) - 1, -1, -1):
        t_cur = int(taus[i])
        t_prev = int(taus[i - 1]) if i > 0 else 0
        ab_cur = sched.alpha_bar_at(t_cur)
        ab_prev = sched.alpha_bar_at(t_prev)
        eps_hat = model.predict(x64.astype(np.float32), np.full(n, t_cur, dtype=np.int64))
        eps_hat = eps_hat.astype(np.float64)
        x0_hat = (x64 - np.sqrt(1.0 - ab_cur) * eps_hat) / np.sqrt(ab_cur)
        sigma = ddim_sigma(sched, t_cur, t_prev, cfg.eta)
        dir_coeff = np.sqrt(max(1.0 - ab_prev - sigma * sigma, 0.0))
        x64 = np.sqrt(ab_prev) * x0_hat + dir_coeff * eps_hat
        if sigma > 0.0:
            x64 = x64 + sigma * gaussian_sample(rng, batch_shape).astype(np.float64)
    return x64.astype(np.float32)


def sample(model, n: int, shape, sched: NoiseSchedule, cfg: SamplerConfig,
           rng: RngStream) -> np.ndarray:
    """Dispatch to the configured sampler."""
    if cfg.kind == "ddpm":
        return ddpm_sample(model, n, shape, sched, rng)
    return ddim_sample(model, n, shape, sched, cfg, rng)


def simple_loss(model, x0_batch: np.ndarray, t_batch: np.ndarray,
                eps_batch: np.ndarray, sched: NoiseSchedule):
    """Mean over the batch of the squared noise-prediction error.

    Returns (loss, residuals) where residuals = eps_hat - eps per element,
    ready for backprop through the predictor.
    """
    x0_batch = np.asarray(x0_batch, dtype=np.float32)
    eps_batch = np.asarray(eps_batch, dtype=np.float32)
    t_batch = np.asarray(t_batch, dtype=np.int64)
    if x0_batch.shape != eps_batch.shape:
        raise ShapeMismatch(f"x0 {x0_batch.shape} vs eps {eps_batch.shape}")
    if t_batch.shape[0] != x0_batch.shape[0]:
        raise ShapeMismatch("t batch length mismatch")

    ab = np.array([sched.alpha_bar_at(int(t)) for t in t_batch])
    bshape = (-1,) + (1,) * (x0_batch.ndim - 1)
    xt = (np.sqrt(ab).reshape(bshape) * x0_batch
          + np.sqrt(1.0 - ab).reshape(bshape) * eps_batch).astype(np.float32)
    eps_hat = model.predict(xt, t_batch)
    residual = eps_hat.astype(np.float64) - eps_batch.astype(np.float64)
    per_sample = (residual.reshape(residual.shape[0], -1) ** 2).sum(axis=1)
    return float(per_sample.mean()), residual


def _gauss_kl_to_std(mean: np.ndarray, var: float) -> float:
    """KL(N(mean, var*I) || N(0, I)) in nats (total over dimensions)."""
    d = mean.size
    mu2 = float(np.sum(np.asarray(mean, np.float64) ** 2))
    return 0.5 * (d * var + mu2 - d - d * np.log(var))


def elbo_terms(model, x0: np.ndarray, sched: NoiseSchedule, rng: RngStream):
    """Single-sample estimates of the bound terms (L0, L_mid over t=2..T, LT).

    LT is the exact Gaussian KL of q(x_T|x0) against the prior; each L_mid[t]
    is the posterior/model KL at one x_t draw; L0 is the Gaussian NLL of x0
    under the t=1 reverse kernel with its variance floored at 1e-6.
    """
    x0 = np.asarray(x0, dtype=np.float32)
    d = x0.size
    T = sched.T
    from .numerics import gaussian_sample

    ab_T = sched.alpha_bar_at(T)
    lt = _gauss_kl_to_std(np.sqrt(ab_T) * x0.astype(np.float64), 1.0 - ab_T)

    l_mid = np.zeros(max(T - 1, 0), dtype=np.float64)
    for t in range(2, T + 1):
        eps = gaussian_sample(rng, x0.shape)
        xt = forward_sample(x0, t, eps, sched)
        q_mean, q_var = posterior_params(x0, xt, t, sched)
        eps_hat = model.predict(xt[None, ...], np.array([t], dtype=np.int64))[0]
        p_mean = eps_to_mean(xt, t, eps_hat, sched)
        # same-variance Gaussian KL: ||mu_q - mu_p||^2 / (2 var)
        gap = np.sum((q_mean.astype(np.float64) - p_mean) ** 2)
        l_mid[t - 2] = gap / (2.0 * q_var)

    eps = gaussian_sample(rng, x0.shape)
    x1 = forward_sample(x0, 1, eps, sched)
    eps_hat = model.predict(x1[None, ...], np.array([1], dtype=np.int64))[0]
    p_mean = eps_to_mean(x1, 1, eps_hat, sched)
    var0 = max(sched.posterior_variance(1), 1e-6)
    gap = np.sum((x0.astype(np.float64) - p_mean) ** 2)
    l0 = 0.5 * (d * np.log(2.0 * np.pi * var0) + gap / var0)
    return float(l0), l_mid, float(lt)
