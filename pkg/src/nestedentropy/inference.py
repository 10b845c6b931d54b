"""Nested-sampling inference of the hidden circle.

Turns a measurement log into an equally weighted ensemble of probable
circles.  Live points are replaced by a constrained random walk (the same
walker the entropy search uses, with log-likelihood in place of entropy).
Because the inside/outside likelihood is piecewise constant, every point
carries a uniform random label that breaks likelihood ties; the hard
constraint is on the pair ``(logL, label)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .circle import CircleModel, FieldSpec, Measurement, forward
from .search import adapt_step, constrained_walk

__all__ = [
    "PriorSpec",
    "NestedSamplingConfig",
    "PosteriorEnsemble",
    "WeightedChain",
    "InferenceError",
    "log_likelihood",
    "nested_sampling",
    "nested_sampling_posterior",
    "resample_posterior",
]

_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


class InferenceError(RuntimeError):
    """Nested sampling failed to terminate; ``diagnostics`` holds partial state."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class PriorSpec:
    """Uniform prior over circle centre (a box) and radius (an interval)."""

    x_range: tuple[float, float]
    y_range: tuple[float, float]
    r_min: float
    r_max: float

    def __post_init__(self):
        if not 0 < self.r_min < self.r_max:
            raise ValueError("need 0 < r_min < r_max")
        for lo, hi in (self.x_range, self.y_range):
            if not hi > lo:
                raise ValueError("empty centre range")

    @classmethod
    def for_field(cls, field: FieldSpec, r_min: float = 0.1) -> "PriorSpec":
        """Centres anywhere in the field, radius up to half the shorter side."""
        (x0, x1), (y0, y1) = field.extents
        return cls((x0, x1), (y0, y1), r_min, 0.5 * min(x1 - x0, y1 - y0))

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.x_range[0], self.y_range[0], self.r_min])

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.x_range[1], self.y_range[1], self.r_max])

    def contains(self, theta: np.ndarray) -> bool:
        return bool(np.all(theta >= self.lower) and np.all(theta <= self.upper))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(size, 3))


@dataclass(frozen=True)
class NestedSamplingConfig:
    live_points: int = 100
    mcmc_steps: int = 20
    termination: float = 1e-3
    num_posterior: int = 25
    max_iterations: int = 50_000
    seed: int = 0

    def __post_init__(self):
        if self.live_points < 2:
            raise ValueError("live_points must be at least 2")
        if self.num_posterior < 1:
            raise ValueError("num_posterior must be at least 1")
        if not 0 < self.termination < 1:
            raise ValueError("termination must lie in (0, 1)")
        if self.mcmc_steps < 0:
            raise ValueError("mcmc_steps must be nonnegative")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


@dataclass
class PosteriorEnsemble:
    """Equally weighted circles approximating the posterior."""

    samples: list[CircleModel]
    log_evidence: float = float("nan")

    def __post_init__(self):
        if not self.samples:
            raise ValueError("an ensemble needs at least one sample")

    def __len__(self):
        return len(self.samples)

    def as_array(self) -> np.ndarray:
        return np.array([[c.cx, c.cy, c.r] for c in self.samples])

    def mean(self) -> np.ndarray:
        return self.as_array().mean(axis=0)

    def std(self) -> np.ndarray:
        return self.as_array().std(axis=0)

    def to_dict(self) -> dict:
        return {"log_evidence": self.log_evidence,
                "samples": [c.to_dict() for c in self.samples]}

    @classmethod
    def from_dict(cls, d: dict) -> "PosteriorEnsemble":
        return cls([CircleModel(float(s["cx"]), float(s["cy"]), float(s["r"]))
                    for s in d["samples"]],
                   float(d.get("log_evidence", float("nan"))))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "PosteriorEnsemble":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _likelihood_fn(log: Sequence[Measurement], field: FieldSpec):
    """Vectorized log-likelihood closure over ``theta = (cx, cy, r)``."""
    sigma = field.noise_sigma
    if not log:
        return lambda theta: 0.0
    centers = np.array([field.grid.center(m.location) for m in log])
    xs, ys = centers[:, 0], centers[:, 1]
    data = np.array([m.intensity for m in log])
    hi, lo = field.intensity_inside, field.intensity_outside
    if sigma == 0:
        def loglike(theta):
            cx, cy, r = theta
            pred = np.where((xs - cx) ** 2 + (ys - cy) ** 2 <= r * r, hi, lo)
            return 0.0 if np.array_equal(pred, data) else -math.inf
        return loglike

    const = -len(log) * (math.log(sigma) + _LOG_SQRT_2PI)
    # residuals take one of two values per measurement
    res_in = ((data - hi) / sigma) ** 2
    res_out = ((data - lo) / sigma) ** 2

    def loglike(theta):
        cx, cy, r = theta
        inside = (xs - cx) ** 2 + (ys - cy) ** 2 <= r * r
        return const - 0.5 * float(np.where(inside, res_in, res_out).sum())
    return loglike


def log_likelihood(model: CircleModel, log: Sequence[Measurement],
                   field: FieldSpec) -> float:
    """Gaussian log-likelihood of the log given ``model``.

    With ``noise_sigma == 0`` the result is 0 when every reading matches the
    noiseless prediction and ``-inf`` otherwise.
    """
    if field.noise_sigma == 0:
        ok = all(forward(model, m.location, field) == m.intensity for m in log)
        return 0.0 if ok else -math.inf
    sigma = field.noise_sigma
    total = 0.0
    for m in log:
        z = (m.intensity - forward(model, m.location, field)) / sigma
        total += -0.5 * z * z - math.log(sigma) - _LOG_SQRT_2PI
    return total


@dataclass
class WeightedChain:
    """Discarded (plus final live) points with their log importance weights."""

    thetas: np.ndarray
    log_likelihoods: np.ndarray
    log_weights: np.ndarray
    log_evidence: float
    iterations: int
    discarded_log_likelihoods: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights - self.log_evidence)


def nested_sampling(loglike, prior: PriorSpec,
                    config: NestedSamplingConfig) -> WeightedChain:
    """Skilling-style nested sampling with random-walk replacement.

    Prior mass shrinks as ``X_i = exp(-i / n_live)``.  Sampling stops once
    the live points could add less than ``config.termination`` of the
    evidence accumulated so far, estimated as ``max(L_live) * X_i / Z``.
    """
    rng = np.random.default_rng(config.seed)
    n = config.live_points
    lower, upper = prior.lower, prior.upper
    width = upper - lower

    live = prior.sample(rng, n)
    live_logl = np.array([loglike(t) for t in live])
    live_label = rng.random(n)
    step = 0.1 * width
    log_shrink = math.log1p(-math.exp(-1.0 / n))
    log_tol = math.log(config.termination)

    thetas, logls, logws = [], [], []
    log_x, log_z = 0.0, -math.inf
    it = 0
    while True:
        if it and live_logl.max() + log_x - log_z < log_tol:
            break
        if it >= config.max_iterations:
            raise InferenceError(
                f"nested sampling did not terminate in {it} iterations",
                {"iterations": it, "log_evidence": log_z, "log_x": log_x,
                 "live_max_logl": float(live_logl.max())})
        worst = int(np.lexsort((live_label, live_logl))[0])
        log_w = live_logl[worst] + log_x + log_shrink
        thetas.append(live[worst].copy())
        logls.append(live_logl[worst])
        logws.append(log_w)
        log_z = np.logaddexp(log_z, log_w)
        log_x -= 1.0 / n

        threshold = (live_logl[worst], live_label[worst])
        copy = int(rng.integers(n - 1))
        copy += copy >= worst
        offsets = rng.uniform(-1.0, 1.0, size=(config.mcmc_steps, 3)) * step
        labels = rng.random(config.mcmc_steps)

        def propose(current, k):
            cand = current[0] + offsets[k]
            if np.any(cand < lower) or np.any(cand > upper):
                return None
            return cand, labels[k]

        def score(cand):
            return (loglike(cand[0]), cand[1])

        start = (live[copy], live_label[copy])
        (theta, label), (logl, _), accepts = constrained_walk(
            start, (live_logl[copy], live_label[copy]), threshold,
            propose, score, config.mcmc_steps)
        if config.mcmc_steps:
            step = adapt_step(accepts, config.mcmc_steps, step, width,
                              floor=1e-9 * width)
        live[worst] = theta
        live_logl[worst] = logl
        live_label[worst] = label
        it += 1

    discarded = np.array(logls)
    # remaining prior mass is shared equally among the final live points
    final_logw = live_logl + log_x - math.log(n)
    all_logw = np.concatenate([np.array(logws), final_logw])
    log_z = float(logsumexp(all_logw))
    return WeightedChain(np.vstack([np.array(thetas).reshape(-1, 3), live]),
                         np.concatenate([discarded, live_logl]),
                         all_logw, log_z, it, discarded)


def resample_posterior(chain: Sequence, weights: Sequence[float], size: int,
                       rng: np.random.Generator) -> list:
    """Systematic resampling of ``chain`` in proportion to ``weights``."""
    w = np.asarray(weights, dtype=float)
    if len(chain) == 0 or len(w) != len(chain):
        raise ValueError("chain must be nonempty and match weights in length")
    if np.any(w < 0) or not np.isfinite(w).all():
        raise ValueError("weights must be finite and nonnegative")
    total = w.sum()
    if total <= 0:
        raise ValueError("all weights are zero")
    cdf = np.cumsum(w / total)
    cdf[-1] = 1.0
    positions = (rng.random() + np.arange(size)) / size
    idx = np.searchsorted(cdf, positions, side="right")
    return [chain[i] for i in idx]


def nested_sampling_posterior(log: Sequence[Measurement], prior: PriorSpec,
                              field: FieldSpec,
                              config: NestedSamplingConfig | None = None
                              ) -> PosteriorEnsemble:
    """Posterior ensemble of ``config.num_posterior`` circles given ``log``."""
    config = config or NestedSamplingConfig()
    chain = nested_sampling(_likelihood_fn(list(log), field), prior, config)
    rng = np.random.default_rng([config.seed, 1])
    picks = resample_posterior(chain.thetas, chain.weights,
                               config.num_posterior, rng)
    # systematic resampling keeps chain order; shuffle so atoms are exchangeable
    order = rng.permutation(len(picks))
    samples = [CircleModel(*map(float, picks[i])) for i in order]
    return PosteriorEnsemble(samples, chain.log_evidence)
