"""Efficiency and correctness metrics.

Compression efficiency measures how many candidate experiments a search
avoided evaluating; the expected-utility oracle scores an experiment the
long way round (hypothetical posteriors for every outcome) and is used to
cross-check the maximum-entropy criterion.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Hashable, Sequence

import numpy as np
from scipy import stats

__all__ = [
    "InvalidMetricsError",
    "RunMetrics",
    "compression_efficiency",
    "expected_utility",
    "trend_test",
]


class InvalidMetricsError(ValueError):
    """Raised for metric inputs that cannot describe a real run."""


def compression_efficiency(n: int, m: int) -> float:
    """Ratio of candidate experiments ``n`` to objective evaluations ``m``.

    Brute force scores exactly 1; larger is better.
    """
    if m < 1 or n < 1:
        raise InvalidMetricsError(f"need n >= 1 and m >= 1, got n={n}, m={m}")
    return n / m


@dataclass(frozen=True)
class RunMetrics:
    total_cells: int
    evaluations: int
    iterations: int
    converged: bool

    @property
    def compression_efficiency(self) -> float:
        return compression_efficiency(self.total_cells, self.evaluations)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["compression_efficiency"] = self.compression_efficiency
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunMetrics":
        return cls(int(d["total_cells"]), int(d["evaluations"]),
                   int(d["iterations"]), bool(d["converged"]))


def expected_utility(posterior, candidate, forward: Callable) -> float:
    """Expected Shannon-information utility of measuring at ``candidate``.

    The posterior atoms are equally weighted.  For every outcome ``d`` the
    hypothetical posterior ``p(theta | d)`` is formed by Bayes' rule with a
    deterministic likelihood (1 when the atom predicts ``d``, else 0);
    its utility is ``sum_theta p log p`` (nats).  The return value is the
    outcome-probability-weighted average of those utilities, so it is never
    positive.

    Parameters
    ----------
    posterior : sequence of models, or object with a ``samples`` attribute
    candidate : experiment passed through to ``forward``
    forward : callable (model, candidate) -> hashable outcome
    """
    atoms = list(getattr(posterior, "samples", posterior))
    if not atoms:
        raise ValueError("posterior ensemble is empty")
    prior = 1.0 / len(atoms)
    predictions = [forward(theta, candidate) for theta in atoms]
    outcomes: list[Hashable] = list(dict.fromkeys(predictions))

    eu = 0.0
    for d in outcomes:
        # p(d | theta, e) is an indicator for deterministic predictions
        like = [1.0 if pred == d else 0.0 for pred in predictions]
        p_d = sum(l * prior for l in like)
        if p_d == 0.0:
            continue
        utility = 0.0
        for l in like:
            post = l * prior / p_d
            if post > 0.0:
                utility += post * math.log(post)
        eu += p_d * utility
    return eu


def trend_test(x: Sequence[float], y: Sequence[float], increasing: bool,
               alpha: float = 0.05) -> tuple[bool, float, float]:
    """One-sided Spearman test for a monotone trend of ``y`` in ``x``.

    Returns ``(passed, rho, p_value)``.  A constant ``y`` has no defined
    rank correlation and is reported as failing with ``p = 1``.
    """
    y = np.asarray(y, dtype=float)
    if np.all(y == y[0]):
        return False, float("nan"), 1.0
    res = stats.spearmanr(x, y,
                          alternative="greater" if increasing else "less")
    rho, p = float(res.statistic), float(res.pvalue)
    return p < alpha, rho, p

