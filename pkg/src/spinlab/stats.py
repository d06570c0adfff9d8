"""Error bars for finite-run estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Iterable

import numpy as np

from .errors import DegenerateEstimateError, DomainError

# Monte Carlo vs closed-form agreement threshold used throughout the package.
AGREEMENT_SIGMAS = 4.0


@dataclass(frozen=True)
class EstimateWithError:
    value: float
    stderr: float
    n: int

    def __post_init__(self) -> None:
        if self.stderr < 0 or math.isnan(self.stderr):
            raise DomainError(f"stderr must be non-negative, got {self.stderr!r}")

    def agrees_with(self, expected: float, sigmas: float = AGREEMENT_SIGMAS, atol: float = 1e-12) -> bool:
        """True when ``expected`` lies within ``sigmas`` standard errors (plus round-off)."""
        return abs(self.value - expected) <= sigmas * self.stderr + atol

    def __str__(self) -> str:
        return f"{self.value:.6f} ± {self.stderr:.6f} (n={self.n})"


def mean_stderr(samples: Iterable[float]) -> EstimateWithError:
    """Sample mean with standard error s/√n (n-1 denominator in s)."""
    x = np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples, dtype=float).ravel()
    n = x.size
    if n == 0:
        raise DomainError("mean_stderr needs at least one sample")
    mean = float(x.mean())
    if n == 1:
        return EstimateWithError(mean, 0.0, 1)
    return EstimateWithError(mean, float(x.std(ddof=1)) / math.sqrt(n), n)


def pm_one_estimate(total: int, n: int) -> EstimateWithError:
    """Mean of ``n`` values in {-1, +1} whose sum is ``total``.

    Uses Σx² = n, so no per-sample storage is needed.
    """
    if n <= 0:
        raise DomainError("need at least one sample")
    mean = total / n
    if n == 1:
        return EstimateWithError(mean, 0.0, 1)
    var = max(n - total * total / n, 0.0) / (n - 1)
    return EstimateWithError(mean, math.sqrt(var / n), n)


def moment_estimate(total: float, total_sq: float, n: int) -> EstimateWithError:
    """Mean and standard error from the first two power sums."""
    if n <= 0:
        raise DomainError("need at least one sample")
    mean = total / n
    if n == 1:
        return EstimateWithError(mean, 0.0, 1)
    var = max(total_sq - total * total / n, 0.0) / (n - 1)
    return EstimateWithError(mean, math.sqrt(var / n), n)


def z_for_level(level: float) -> float:
    """Two-sided standard normal quantile for confidence ``level``."""
    if not 0.0 < level < 1.0:
        raise DomainError(f"confidence level must lie in (0, 1), got {level!r}")
    return NormalDist().inv_cdf(0.5 + level / 2.0)


def binomial_ci(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion.

    Chosen over the Wald interval because rates close to 0 (small rotation
    angles) would otherwise get zero-width intervals.
    """
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials!r}")
    if not 0 <= successes <= trials:
        raise DomainError(f"successes must lie in [0, {trials}], got {successes!r}")
    z = z_for_level(level)
    p = successes / trials
    z2n = z * z / trials
    denom = 1.0 + z2n
    center = (p + z2n / 2.0) / denom
    half = z / denom * math.sqrt(p * (1.0 - p) / trials + z2n / (4.0 * trials))
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return lo, hi


def violation_zscore(estimate: EstimateWithError, bound: float = 2.0) -> float:
    """Number of standard errors by which ``estimate`` exceeds ``bound``."""
    if estimate.stderr <= 0.0:
        raise DegenerateEstimateError("z-score undefined for an estimate with zero standard error")
    return (estimate.value - bound) / estimate.stderr


def combine_quadrature(*stderrs: float) -> float:
    return math.sqrt(sum(s * s for s in stderrs))
