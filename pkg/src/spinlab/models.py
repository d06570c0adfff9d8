"""Sources of correlated ±1 outcome pairs.

Every source exposes ``outcomes(micro_a, micro_b, rng)``, taking per-pair
microscopic directions as (n, 3) arrays and returning two int8 arrays of ±1.

Local hidden-variable models derive from :class:`HiddenVariableModel`. Their
per-side response functions receive only the hidden variable and that side's
own direction, so locality is enforced by the call signature. The contextual
quantum source is *not* such a model: it draws both outcomes jointly.
"""

from __future__ import annotations

import abc
import math
import re
from typing import Any

import numpy as np

from .errors import ConfigError, DomainError, UnsupportedModelError
from .geometry import Direction, angle_between, random_directions


class HiddenVariableModel(abc.ABC):
    """Factorised stochastic model: shared λ, local detection probabilities.

    An outcome is +1 when the side "detects" under its response probability
    and −1 otherwise, so a CH-type model can feed a ±1 correlation estimator.
    ``sample_lambda`` returns a batch; λ values are opaque to callers.
    """

    name: str = "hidden-variable"

    @abc.abstractmethod
    def sample_lambda(self, rng: np.random.Generator, size: int) -> Any: ...

    @abc.abstractmethod
    def detect_prob_1(self, lam: Any, a: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def detect_prob_2(self, lam: Any, b: np.ndarray) -> np.ndarray: ...

    def correlation_exact(self, a: Direction, b: Direction) -> float:
        raise UnsupportedModelError(f"no closed-form correlation for model {self.name!r}")

    def outcomes(
        self, micro_a: np.ndarray, micro_b: np.ndarray, rng: np.random.Generator
    ) -> tuple[np.ndarray, np.ndarray]:
        n = len(micro_a)
        lam = self.sample_lambda(rng, n)
        p1 = self.detect_prob_1(lam, micro_a)
        p2 = self.detect_prob_2(lam, micro_b)
        o1 = np.where(rng.random(n) < p1, 1, -1).astype(np.int8)
        o2 = np.where(rng.random(n) < p2, 1, -1).astype(np.int8)
        return o1, o2

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.name}>"


class SpinFunctionModel(HiddenVariableModel):
    """Deterministic spin functions with perfect anti-correlation.

    Side 1 reads ``spin(λ, a)`` and side 2 reads ``-spin(λ, b)``, so equal
    directions always give opposite outcomes. Because outcomes are fixed by
    λ, one draw can be evaluated at any number of settings.
    """

    @abc.abstractmethod
    def spin(self, lam: Any, x: np.ndarray) -> np.ndarray:
        """±1 (int8) for each λ and direction row; broadcasts over rows."""

    def detect_prob_1(self, lam: Any, a: np.ndarray) -> np.ndarray:
        return (self.spin(lam, a) > 0).astype(float)

    def detect_prob_2(self, lam: Any, b: np.ndarray) -> np.ndarray:
        return (self.spin(lam, b) < 0).astype(float)

    def outcomes(
        self, micro_a: np.ndarray, micro_b: np.ndarray, rng: np.random.Generator
    ) -> tuple[np.ndarray, np.ndarray]:
        lam = self.sample_lambda(rng, len(micro_a))
        return self.side_outcomes(lam, micro_a, micro_b)

    def side_outcomes(self, lam: Any, micro_a: np.ndarray, micro_b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.spin(lam, micro_a), -self.spin(lam, micro_b)


class BellSignModel(SpinFunctionModel):
    """λ uniform on S², spin(λ, x) = sign(λ·x) with sign(0) = +1."""

    name = "bell-sign"

    def sample_lambda(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return random_directions(rng, size)

    def spin(self, lam: np.ndarray, x: np.ndarray) -> np.ndarray:
        proj = np.einsum("ij,ij->i", lam, np.broadcast_to(x, lam.shape))
        return np.where(proj >= 0.0, 1, -1).astype(np.int8)

    def correlation_exact(self, a: Direction, b: Direction) -> float:
        return -(1.0 - 2.0 * angle_between(a, b) / math.pi)


class FactorizedModel(HiddenVariableModel):
    """Independent ±1 outcomes with fixed means, blind to direction.

    λ carries no information; each side flips its own coin, so
    E(a, b) = mean1 · mean2 everywhere.
    """

    def __init__(self, mean1: float, mean2: float):
        if not (abs(mean1) <= 1.0 and abs(mean2) <= 1.0):
            raise DomainError(f"factorized means must lie in [-1, 1], got ({mean1!r}, {mean2!r})")
        self.mean1 = float(mean1)
        self.mean2 = float(mean2)
        self.name = f"factorized({self.mean1:g},{self.mean2:g})"

    def sample_lambda(self, rng: np.random.Generator, size: int) -> None:
        return None

    def detect_prob_1(self, lam: Any, a: np.ndarray) -> np.ndarray:
        return np.full(len(a), (1.0 + self.mean1) / 2.0)

    def detect_prob_2(self, lam: Any, b: np.ndarray) -> np.ndarray:
        return np.full(len(b), (1.0 + self.mean2) / 2.0)

    def correlation_exact(self, a: Direction, b: Direction) -> float:
        return self.mean1 * self.mean2


class ContextualSampler:
    """Singlet statistics realised pair by pair from the microscopic directions.

    For each pair the outcome couple is drawn from the four-outcome singlet
    table at the angle between that pair's microscopic directions. The two
    outcomes are produced jointly; no λ-local response function exists.
    """

    name = "qm-contextual"

    def outcomes(
        self, micro_a: np.ndarray, micro_b: np.ndarray, rng: np.random.Generator
    ) -> tuple[np.ndarray, np.ndarray]:
        n = len(micro_a)
        c = np.clip(np.einsum("ij,ij->i", micro_a, micro_b), -1.0, 1.0)
        o1 = np.where(rng.random(n) < 0.5, 1, -1).astype(np.int8)
        same = rng.random(n) < (1.0 - c) / 2.0
        o2 = np.where(same, o1, -o1).astype(np.int8)
        return o1, o2

    def __repr__(self) -> str:
        return "<ContextualSampler qm-contextual>"


def bell_sign_model() -> BellSignModel:
    return BellSignModel()


def factorized_model(mean1: float, mean2: float) -> FactorizedModel:
    return FactorizedModel(mean1, mean2)


def contextual_sampler() -> ContextualSampler:
    return ContextualSampler()


def lhv_correlation_exact(model: HiddenVariableModel, a: Direction, b: Direction) -> float:
    """Closed-form correlation of a local model at sharp directions."""
    if not isinstance(model, HiddenVariableModel):
        raise UnsupportedModelError(f"{model!r} is not a local hidden-variable model")
    return model.correlation_exact(a, b)


_FACTORIZED = re.compile(r"^factorized\(\s*([^,()]+?)\s*,\s*([^,()]+?)\s*\)$")


def model_from_name(name: str) -> HiddenVariableModel | ContextualSampler:
    """Resolve "qm-contextual", "bell-sign" or "factorized(m1,m2)"."""
    key = name.strip()
    if key == "qm-contextual":
        return ContextualSampler()
    if key == "bell-sign":
        return BellSignModel()
    m = _FACTORIZED.match(key)
    if m:
        try:
            means = float(m.group(1)), float(m.group(2))
        except ValueError:
            raise ConfigError(f"bad factorized model arguments in {name!r}") from None
        try:
            return FactorizedModel(*means)
        except DomainError as exc:
            raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown model {name!r}; expected qm-contextual, bell-sign or factorized(m1,m2)")
