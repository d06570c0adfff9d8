"""Singlet-state predictions for ideal, smeared and inefficient analyzers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .geometry import (
    CapRegion,
    Direction,
    SmearingDistribution,
    SmearingKind,
    angle_between,
    sample_directions,
    shrink_factor,
)
from .stats import EstimateWithError, mean_stderr

MC_SAMPLES = 10**6


@dataclass(frozen=True)
class AnalyzerSpec:
    """Macroscopic orientation, smearing law around it and detector efficiency."""

    orientation: Direction
    smearing: SmearingDistribution
    efficiency: float = 1.0

    def __post_init__(self) -> None:
        if self.smearing.cap.axis != self.orientation:
            raise DomainError("smearing cap must be centred on the analyzer orientation")
        eta = float(self.efficiency)
        if not 0.0 <= eta <= 1.0:
            raise DomainError(f"efficiency must lie in [0, 1], got {eta!r}")
        object.__setattr__(self, "efficiency", eta)

    @classmethod
    def make(
        cls,
        orientation: Direction,
        epsilon: float = 0.0,
        kind: SmearingKind | str = SmearingKind.DELTA,
        efficiency: float = 1.0,
    ) -> AnalyzerSpec:
        kind = SmearingKind(kind)
        if kind is SmearingKind.DELTA:
            smearing = SmearingDistribution(kind, CapRegion(orientation, epsilon))
        else:
            smearing = SmearingDistribution.uniform_cap(orientation, epsilon)
        return cls(orientation, smearing, efficiency)

    @property
    def kappa(self) -> float:
        return shrink_factor(self.smearing)

    @property
    def is_sharp(self) -> bool:
        return self.smearing.is_sharp


@dataclass(frozen=True)
class SettingPair:
    first: AnalyzerSpec
    second: AnalyzerSpec

    @property
    def macro_angle(self) -> float:
        return angle_between(self.first.orientation, self.second.orientation)


def singlet_correlation(a: Direction, b: Direction) -> float:
    """Spin correlation −cos θ_ab of the singlet for sharp directions."""
    return -math.cos(angle_between(a, b))


def joint_detection_density(a: Direction, b: Direction) -> float:
    """Density ½ sin²(θ_ab/2) of a (+,+) coincidence."""
    s = math.sin(angle_between(a, b) / 2.0)
    return 0.5 * s * s


def outcome_table(theta: float) -> dict[tuple[int, int], float]:
    """Four-outcome singlet distribution at relative angle ``theta``.

    Equal outcomes each carry ½ sin²(θ/2), opposite outcomes ½ cos²(θ/2);
    this is the unique table with uniform marginals and correlation −cos θ.
    """
    same = 0.5 * math.sin(theta / 2.0) ** 2
    diff = 0.5 * math.cos(theta / 2.0) ** 2
    return {(1, 1): same, (-1, -1): same, (1, -1): diff, (-1, 1): diff}


def coincidence_probability(pair: SettingPair) -> float:
    """Efficiency-weighted (+,+) coincidence probability averaged over both caps.

    p₁₂ is affine in cos θ_ab, so the double cap average only needs the
    shrink factor of each analyzer.
    """
    eta = pair.first.efficiency * pair.second.efficiency
    k = pair.first.kappa * pair.second.kappa
    return eta * (1.0 - k * math.cos(pair.macro_angle)) / 4.0


def smeared_correlation(pair: SettingPair) -> float:
    """Correlation including the η(A)η(B) prefactor, averaged over both caps."""
    eta = pair.first.efficiency * pair.second.efficiency
    k = pair.first.kappa * pair.second.kappa
    return -eta * k * math.cos(pair.macro_angle)


def conditional_correlation(pair: SettingPair) -> float:
    """Correlation among coincident pairs only; carries no efficiency factor."""
    k = pair.first.kappa * pair.second.kappa
    return -k * math.cos(pair.macro_angle)


def _pair_cosines(pair: SettingPair, rng: np.random.Generator, samples: int) -> np.ndarray:
    a = sample_directions(pair.first.smearing, rng, samples)
    b = sample_directions(pair.second.smearing, rng, samples)
    return np.clip(np.einsum("ij,ij->i", a, b), -1.0, 1.0)


def coincidence_probability_mc(
    pair: SettingPair, rng: np.random.Generator, samples: int = MC_SAMPLES
) -> EstimateWithError:
    """Monte Carlo evaluation of the cap double integral for the coincidence probability."""
    theta = np.arccos(_pair_cosines(pair, rng, samples))
    eta = pair.first.efficiency * pair.second.efficiency
    return mean_stderr(eta * 0.5 * np.sin(theta / 2.0) ** 2)


def smeared_correlation_mc(
    pair: SettingPair, rng: np.random.Generator, samples: int = MC_SAMPLES
) -> EstimateWithError:
    """Monte Carlo evaluation of the cap double integral for the correlation."""
    c = _pair_cosines(pair, rng, samples)
    eta = pair.first.efficiency * pair.second.efficiency
    return mean_stderr(-eta * c)


def herbert_disagreement_qm(theta: float) -> float:
    """Rate at which the two message strings disagree after rotating one detector by ``theta``.

    Side 2's bit is the negated outcome, so aligned detectors give identical
    strings and the rate is sin²(θ/2).
    """
    if not 0.0 <= theta <= math.pi:
        raise DomainError(f"theta must lie in [0, π], got {theta!r}")
    return math.sin(theta / 2.0) ** 2
