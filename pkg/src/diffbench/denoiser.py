"""Noise predictors: an exact analytic one for Gaussian data and a tiny
trainable MLP with hand-rolled gradients and Adam.

Both satisfy the same contract: predict(xt_batch, t_vector) returns a noise
estimate of the batch's shape, deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .diffusion import NoiseSchedule, simple_loss
from .errors import EmptyDataset, ShapeMismatch, SingularSystem
from .numerics import GaussianStats, gaussian_sample, sym_eig
from .rng import RngStream

PARAM_CAP = 10 ** 6


class EpsilonPredictor(Protocol):
    def predict(self, xt: np.ndarray, t: np.ndarray) -> np.ndarray: ...


class ZeroPredictor:
    """Predicts no noise; the weakest baseline."""

    def predict(self, xt: np.ndarray, t: np.ndarray) -> np.ndarray:
        return np.zeros_like(np.asarray(xt, dtype=np.float32))


class AnalyticGaussianPredictor:
    """Exact conditional-expectation noise predictor for Gaussian data.

    With x0 ~ N(mean, cov), the posterior mean E[x0|xt] is linear in xt;
    the implied noise estimate is the MMSE-optimal predictor, which makes
    this the verification oracle for the samplers.
    """

    def __init__(self, stats: GaussianStats, sched: NoiseSchedule):
        self.stats = stats
        self.sched = sched
        self._w, self._v = sym_eig(stats.cov)
        if np.any(self._w < -1e-6 * max(self._w.max(initial=0.0), 1.0)):
            raise SingularSystem("covariance is not PSD")
        self._w = np.clip(self._w, 0.0, None)

    def predict(self, xt: np.ndarray, t: np.ndarray) -> np.ndarray:
        xt = np.asarray(xt, dtype=np.float64)
        t = np.asarray(t, dtype=np.int64)
        n = xt.shape[0]
        if t.shape[0] != n:
            raise ShapeMismatch("t vector length must match batch size")
        flat = xt.reshape(n, -1)
        if flat.shape[1] != self.stats.dim:
            raise ShapeMismatch(f"dim {flat.shape[1]} vs predictor dim {self.stats.dim}")
        out = np.empty_like(flat)
        mu = self.stats.mean
        for tv in np.unique(t):
            ab = self.sched.alpha_bar_at(int(tv))
            assert ab < 1.0, "analytic predictor undefined at alpha_bar == 1"
            rows = t == tv
            centered = flat[rows] - np.sqrt(ab) * mu
            # E[x0|xt] = mu + sqrt(ab) cov (ab cov + (1-ab) I)^-1 centered,
            # evaluated in the covariance eigenbasis
            gain = np.sqrt(ab) * self._w / (ab * self._w + (1.0 - ab))
            x0_hat = mu + ((centered @ self._v) * gain) @ self._v.T
            out[rows] = (flat[rows] - np.sqrt(ab) * x0_hat) / np.sqrt(1.0 - ab)
        return out.reshape(xt.shape).astype(np.float32)


def time_embedding(t: np.ndarray, dim: int = 16) -> np.ndarray:
    """Sinusoidal embedding of integer timesteps, (sin, cos) interleaved."""
    t = np.asarray(t, dtype=np.float64).reshape(-1, 1)
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / max(half - 1, 1))
    angles = t * freqs
    emb = np.empty((t.shape[0], dim), dtype=np.float64)
    emb[:, 0::2] = np.sin(angles)
    emb[:, 1::2] = np.cos(angles)
    return emb


def _silu(x: np.ndarray) -> np.ndarray:
    s = 1.0 / (1.0 + np.exp(-x))
    return x * s


def _silu_grad(x: np.ndarray) -> np.ndarray:
    s = 1.0 / (1.0 + np.exp(-x))
    return s * (1.0 + x * (1.0 - s))


@dataclass
class AdamState:
    """First/second moment accumulators mirroring a weight list."""

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    stabilizer: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_weights(cls, weights: Sequence[np.ndarray], lr: float = 1e-4) -> "AdamState":
        return cls(lr=lr,
                   m=[np.zeros_like(w, dtype=np.float64) for w in weights],
                   v=[np.zeros_like(w, dtype=np.float64) for w in weights])


def adam_update(state: AdamState, weights: list, grads: list) -> list:
    """Standard bias-corrected Adam step; mutates state, returns new weights."""
    if len(weights) != len(grads) or len(weights) != len(state.m):
        raise ShapeMismatch("weight/gradient/state length mismatch")
    state.step += 1
    t = state.step
    out = []
    for i, (w, g) in enumerate(zip(weights, grads)):
        if w.shape != g.shape:
            raise ShapeMismatch(f"weight {w.shape} vs grad {g.shape}")
        g = np.asarray(g, dtype=np.float64)
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g
        m_hat = state.m[i] / (1.0 - state.beta1 ** t)
        v_hat = state.v[i] / (1.0 - state.beta2 ** t)
        out.append((w.astype(np.float64)
                    - state.lr * m_hat / (np.sqrt(v_hat) + state.stabilizer)).astype(w.dtype))
    return out


class TinyDenoiser:
    """Small fully connected noise predictor with sinusoidal time conditioning.

    Inputs are flattened, concatenated with the time embedding, and passed
    through SiLU-activated dense layers. Two choices make the small default
    learning rate effective at this scale: the first layer is initialized
    with +x/-x passthrough columns so the readout sees the noisy input
    directly, and the last hidden activation carries a fixed gain so each
    Adam step (bounded by lr per weight) moves the output proportionally
    more. The output layer starts at zero, so the initial prediction is the
    zero baseline. Parameter count is capped at one million.
    """

    def __init__(self, input_shape, hidden: Sequence[int] = (768,),
                 emb_dim: int = 16, readout_gain: float = 64.0, seed: int = 0):
        self.input_shape = tuple(int(s) for s in input_shape)
        self.dim = int(np.prod(self.input_shape))
        self.hidden = tuple(int(h) for h in hidden)
        self.emb_dim = int(emb_dim)
        self.readout_gain = float(readout_gain)

        widths = [self.dim + self.emb_dim, *self.hidden, self.dim]
        n_params = sum(widths[i] * widths[i + 1] + widths[i + 1]
                       for i in range(len(widths) - 1))
        if n_params > PARAM_CAP:
            raise ValueError(f"{n_params} parameters exceed cap {PARAM_CAP}")

        rng = RngStream(seed, stream_id=0xD1FF)
        self.weights: list[np.ndarray] = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            w = gaussian_sample(rng, (fan_in, fan_out)).astype(np.float64)
            w *= np.sqrt(2.0 / fan_in)
            self.weights.append(w)
            self.weights.append(np.zeros(fan_out, dtype=np.float64))

        # +x / -x passthrough columns in the first layer
        d, h0 = self.dim, self.hidden[0] if self.hidden else 0
        k = min(d, h0 // 2)
        if k > 0:
            w1 = self.weights[0]
            w1[:, :2 * k] = 0.0
            w1[:k, :k] = 2.0 * np.eye(k)
            w1[:k, k:2 * k] = -2.0 * np.eye(k)
        # zero output layer: the untrained model predicts no noise
        self.weights[-2] = np.zeros_like(self.weights[-2])

    @property
    def n_layers(self) -> int:
        return len(self.weights) // 2

    def _forward(self, xt: np.ndarray, t: np.ndarray):
        """Forward pass keeping pre-activations for backprop."""
        xt = np.asarray(xt, dtype=np.float64)
        t = np.asarray(t, dtype=np.int64)
        n = xt.shape[0]
        flat = xt.reshape(n, -1)
        if flat.shape[1] != self.dim:
            raise ShapeMismatch(f"dim {flat.shape[1]} vs model dim {self.dim}")
        if t.shape[0] != n:
            raise ShapeMismatch("t vector length must match batch size")
        h = np.concatenate([flat, time_embedding(t, self.emb_dim)], axis=1)
        activations = [h]
        pre = []
        for layer in range(self.n_layers):
            w, b = self.weights[2 * layer], self.weights[2 * layer + 1]
            z = h @ w + b
            pre.append(z)
            if layer < self.n_layers - 1:
                h = _silu(z)
                if layer == self.n_layers - 2:
                    h = self.readout_gain * h
            else:
                h = z
            activations.append(h)
        return activations, pre

    def predict(self, xt: np.ndarray, t: np.ndarray) -> np.ndarray:
        # float64 output: keeps the loss an exact function of the weights,
        # so finite differences agree with the analytic gradient
        xt = np.asarray(xt, dtype=np.float32)
        activations, _ = self._forward(xt, t)
        return activations[-1].reshape(xt.shape)

    def gradient(self, xt: np.ndarray, t: np.ndarray,
                 residual: np.ndarray) -> list[np.ndarray]:
        """Exact reverse-mode gradients of mean ||residual||^2 per batch.

        residual must be eps_hat - eps elementwise (as simple_loss returns);
        the returned list mirrors self.weights.
        """
        n = np.asarray(xt).shape[0]
        activations, pre = self._forward(xt, t)
        delta = 2.0 * np.asarray(residual, dtype=np.float64).reshape(n, -1) / n
        grads: list[np.ndarray] = [None] * len(self.weights)
        for layer in range(self.n_layers - 1, -1, -1):
            if layer < self.n_layers - 1:
                g = _silu_grad(pre[layer])
                if layer == self.n_layers - 2:
                    g = self.readout_gain * g
                delta = delta * g
            grads[2 * layer] = activations[layer].T @ delta
            grads[2 * layer + 1] = delta.sum(axis=0)
            if layer > 0:
                delta = delta @ self.weights[2 * layer].T
        return grads


def save_checkpoint(model: TinyDenoiser, path) -> None:
    """Serialize a TinyDenoiser into one DFC1 container tensor.

    Layout: [rank, input_shape..., n_hidden, hidden..., emb_dim,
    readout_gain, flattened weights in layer order]. Weights are stored as
    float32, so save(load(save(m))) is byte-identical to save(m).
    """
    from .data import save_tensor

    header = [len(model.input_shape), *model.input_shape,
              len(model.hidden), *model.hidden,
              model.emb_dim, model.readout_gain]
    body = np.concatenate([w.astype(np.float32).ravel() for w in model.weights])
    save_tensor(np.concatenate([np.asarray(header, np.float32), body]), path)


def load_checkpoint(path) -> TinyDenoiser:
    from .data import load_tensor
    from .errors import TruncatedFile

    flat = load_tensor(path).ravel().astype(np.float64)
    pos = 0

    def take(k):
        nonlocal pos
        if pos + k > flat.size:
            raise TruncatedFile(f"{path}: checkpoint header/body too short")
        out = flat[pos:pos + k]
        pos += k
        return out

    rank = int(take(1)[0])
    input_shape = tuple(int(v) for v in take(rank))
    n_hidden = int(take(1)[0])
    hidden = tuple(int(v) for v in take(n_hidden))
    emb_dim = int(take(1)[0])
    gain = float(take(1)[0])
    model = TinyDenoiser(input_shape, hidden=hidden, emb_dim=emb_dim,
                         readout_gain=gain)
    weights = []
    for w in model.weights:
        weights.append(take(w.size).reshape(w.shape).copy())
    if pos != flat.size:
        raise TruncatedFile(f"{path}: {flat.size - pos} trailing values")
    model.weights = weights
    return model


def net_gradient(model: TinyDenoiser, x0_batch: np.ndarray, t_batch: np.ndarray,
                 eps_batch: np.ndarray, sched: NoiseSchedule):
    """Loss and per-weight gradients of simple_loss for one batch."""
    loss, residual = simple_loss(model, x0_batch, t_batch, eps_batch, sched)
    ab = np.array([sched.alpha_bar_at(int(t)) for t in np.asarray(t_batch)])
    bshape = (-1,) + (1,) * (np.asarray(x0_batch).ndim - 1)
    xt = (np.sqrt(ab).reshape(bshape) * np.asarray(x0_batch, np.float64)
          + np.sqrt(1.0 - ab).reshape(bshape) * np.asarray(eps_batch, np.float64))
    return loss, model.gradient(xt.astype(np.float32), t_batch, residual)


def train(model: TinyDenoiser, images: np.ndarray, sched: NoiseSchedule,
          epochs: int, batch_size: int, lr: float, rng: RngStream):
    """Adam training over shuffled mini-batches; returns per-epoch mean loss.

    Per batch the draw order is: timesteps, then noise. The final partial
    batch of each epoch is kept.
    """
    images = np.asarray(images, dtype=np.float32)
    n = images.shape[0]
    if n == 0:
        raise EmptyDataset("training set is empty")
    if batch_size > n:
        raise EmptyDataset(f"batch_size {batch_size} exceeds dataset size {n}")

    state = AdamState.for_weights(model.weights, lr=lr)
    curve = []
    for _ in range(int(epochs)):
        perm = rng.permutation(n)
        losses, sizes = [], []
        for start in range(0, n, batch_size):
            batch = images[perm[start:start + batch_size]]
            b = batch.shape[0]
            t_batch = rng.integers(b, 1, sched.T + 1)
            eps = gaussian_sample(rng, batch.shape)
            loss, grads = net_gradient(model, batch, t_batch, eps, sched)
            model.weights = adam_update(state, model.weights, grads)
            losses.append(loss * b)
            sizes.append(b)
        curve.append(float(np.sum(losses) / np.sum(sizes)))
    return model, curve


def zero_predictor_loss(images: np.ndarray, sched: NoiseSchedule,
                        rng: RngStream, n_batches: int = 8,
                        batch_size: int = 128) -> float:
    """Monte Carlo simple_loss of the zero predictor on a dataset."""
    images = np.asarray(images, dtype=np.float32)
    n = images.shape[0]
    zero = ZeroPredictor()
    vals = []
    for _ in range(n_batches):
        idx = rng.integers(batch_size, 0, n)
        batch = images[idx]
        t_batch = rng.integers(batch_size, 1, sched.T + 1)
        eps = gaussian_sample(rng, batch.shape)
        loss, _ = simple_loss(zero, batch, t_batch, eps, sched)
        vals.append(loss)
    return float(np.mean(vals))
