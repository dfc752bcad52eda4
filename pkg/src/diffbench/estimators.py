"""Scikit-learn compatible wrappers around the corruption and diffusion
pipelines.

These follow the estimator protocol (constructor stores hyperparameters
verbatim, fit returns self, get_params/set_params work for cloning) so the
components compose with sklearn pipelines and grid search. The numeric
behavior is identical to calling the underlying modules directly.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .corruptions import CorruptionKind, CorruptionSpec, corrupt_batch
from .denoiser import AnalyticGaussianPredictor, TinyDenoiser, train
from .diffusion import SamplerConfig, linear_schedule, sample
from .errors import ShapeMismatch
from .metrics import FeatureMap
from .metrics import fid as fid_fn
from .numerics import mean_cov
from .rng import RngStream


def validate_image_batch(X, name: str = "X") -> np.ndarray:
    """Check and convert an N x C x H x W batch to finite float32."""
    X = np.asarray(X, dtype=np.float32)
    if X.ndim != 4:
        raise ShapeMismatch(f"{name} must be N x C x H x W, got shape {X.shape}")
    if X.shape[0] < 1 or X.shape[1] not in (1, 3):
        raise ShapeMismatch(f"{name} needs N >= 1 and C in (1, 3), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite values")
    return X


class CorruptionTransform(BaseEstimator, TransformerMixin):
    """Apply one corruption kind at a severity level to unit-domain batches.

    Stateless apart from hyperparameters; fit only validates input. The
    seed makes transform deterministic for a given batch size.
    """

    def __init__(self, kind: str = "identity", severity: int = 1, seed: int = 0):
        self.kind = kind
        self.severity = severity
        self.seed = seed

    def fit(self, X, y=None):
        validate_image_batch(X)
        return self

    def transform(self, X) -> np.ndarray:
        X = validate_image_batch(X)
        kind = CorruptionKind.parse(self.kind)
        if kind is CorruptionKind.IDENTITY:
            return X.copy()
        spec = CorruptionSpec.make(kind, self.severity)
        return corrupt_batch(X, spec, RngStream(self.seed, stream_id=1))


class DiffusionGenerator(BaseEstimator):
    """Fit a noise predictor to signed-domain images and sample new ones.

    model="analytic" fits a Gaussian to the data and uses the exact
    conditional-expectation predictor; model="tiny" trains the small MLP.
    """

    def __init__(self, model: str = "analytic", T: int = 200,
                 beta_start: float = 1e-4, beta_end: float = 0.08,
                 sampler: str = "ddpm", steps: int = 0, eta: float = 0.0,
                 epochs: int = 10, batch_size: int = 64, lr: float = 1e-4,
                 hidden: int = 768, seed: int = 0):
        self.model = model
        self.T = T
        self.beta_start = beta_start
        self.beta_end = beta_end
        self.sampler = sampler
        self.steps = steps
        self.eta = eta
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.hidden = hidden
        self.seed = seed

    def fit(self, X, y=None):
        X = validate_image_batch(X)
        if self.model not in ("analytic", "tiny"):
            raise ValueError(f"model must be analytic or tiny, got {self.model!r}")
        self.schedule_ = linear_schedule(self.T, self.beta_start, self.beta_end)
        self.image_shape_ = X.shape[1:]
        self.loss_curve_ = []
        if self.model == "analytic":
            self.predictor_ = AnalyticGaussianPredictor(
                mean_cov(X.reshape(X.shape[0], -1)), self.schedule_)
        else:
            net = TinyDenoiser(self.image_shape_, hidden=(self.hidden,),
                               seed=self.seed)
            net, self.loss_curve_ = train(
                net, X, self.schedule_, self.epochs,
                min(self.batch_size, X.shape[0]), self.lr,
                RngStream(self.seed, stream_id=2))
            self.predictor_ = net
        return self

    def sample(self, n: int) -> np.ndarray:
        if not hasattr(self, "predictor_"):
            raise RuntimeError("call fit before sample")
        cfg = SamplerConfig(kind=self.sampler, steps=self.steps, eta=self.eta,
                            seed=self.seed)
        return sample(self.predictor_, n, self.image_shape_, self.schedule_,
                      cfg, RngStream(self.seed, stream_id=3))

    def score(self, X, y=None) -> float:
        """Negated FID against X under a 16-dim random projection
        (higher is better, matching the sklearn score convention)."""
        X = validate_image_batch(X)
        generated = self.sample(max(X.shape[0], 32))
        fmap = FeatureMap(kind="random_projection", out_dim=16, seed=self.seed)
        return -fid_fn(X, generated, fmap)
