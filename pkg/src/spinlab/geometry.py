"""Directions on the unit sphere, spherical caps and analyzer smearing laws.

A macroscopic analyzer orientation is a :class:`Direction`. The microscopic
direction actually realised for one particle is drawn from a
:class:`SmearingDistribution` supported on a :class:`CapRegion` around it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import DomainError, InvalidDirectionError

_MIN_NORM = 1e-9
_UNIT_TOL = 1e-9


@dataclass(frozen=True)
class Direction:
    """Unit vector on S².

    Components passed to the constructor are normalised; vectors shorter
    than 1e-9 are rejected rather than silently blown up.
    """

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        x, y, z = float(self.x), float(self.y), float(self.z)
        if not all(math.isfinite(c) for c in (x, y, z)):
            raise InvalidDirectionError(f"non-finite direction ({x}, {y}, {z})")
        norm = math.sqrt(x * x + y * y + z * z)
        if norm < _MIN_NORM:
            raise InvalidDirectionError(f"vector ({x}, {y}, {z}) is too short to normalise")
        if norm != 1.0:
            x, y, z = x / norm, y / norm, z / norm
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)

    @classmethod
    def from_vector(cls, v: Sequence[float]) -> Direction:
        if len(v) != 3:
            raise InvalidDirectionError(f"expected 3 components, got {len(v)}")
        return cls(*v)

    @classmethod
    def from_spherical(cls, theta: float, phi: float = 0.0) -> Direction:
        """Polar angle ``theta`` from +z, azimuth ``phi`` from +x (radians)."""
        st = math.sin(theta)
        return cls(st * math.cos(phi), st * math.sin(phi), math.cos(theta))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def dot(self, other: Direction) -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def __neg__(self) -> Direction:
        return Direction(-self.x, -self.y, -self.z)

    def to_list(self) -> list[float]:
        return [self.x, self.y, self.z]


X_AXIS = Direction(1.0, 0.0, 0.0)
Y_AXIS = Direction(0.0, 1.0, 0.0)
Z_AXIS = Direction(0.0, 0.0, 1.0)


def in_plane(angle: float) -> Direction:
    """Direction at ``angle`` from +z towards +x, inside the xz-plane."""
    return Direction.from_spherical(angle, 0.0)


def _as_unit_array(d: Direction | Sequence[float] | np.ndarray) -> np.ndarray:
    if isinstance(d, Direction):
        return d.as_array()
    arr = np.asarray(d, dtype=float)
    if arr.shape != (3,):
        raise InvalidDirectionError(f"expected a 3-vector, got shape {arr.shape}")
    norm = float(np.linalg.norm(arr))
    if abs(norm - 1.0) > _UNIT_TOL:
        raise InvalidDirectionError(f"vector has norm {norm!r}, expected 1")
    return arr


def angle_between(a: Direction | Sequence[float], b: Direction | Sequence[float]) -> float:
    """Angle in [0, π] between two unit vectors.

    Raw 3-vectors are accepted but must already be unit length (to 1e-9).
    """
    u = _as_unit_array(a)
    v = _as_unit_array(b)
    c = float(u[0] * v[0] + u[1] * v[1] + u[2] * v[2])
    return math.acos(min(1.0, max(-1.0, c)))


@dataclass(frozen=True)
class CapRegion:
    """Set of unit vectors d with ``1 - d·axis <= epsilon``."""

    axis: Direction
    epsilon: float = 0.0

    def __post_init__(self) -> None:
        eps = float(self.epsilon)
        if not 0.0 <= eps <= 2.0:
            raise DomainError(f"cap epsilon must lie in [0, 2], got {eps!r}")
        object.__setattr__(self, "epsilon", eps)

    def contains(self, d: Direction | Sequence[float]) -> bool:
        v = d.as_array() if isinstance(d, Direction) else np.asarray(d, dtype=float)
        return bool(1.0 - float(v @ self.axis.as_array()) <= self.epsilon)

    @property
    def half_angle(self) -> float:
        """Opening half-angle α of the cap, cos α = 1 - ε."""
        return math.acos(1.0 - self.epsilon)


class SmearingKind(str, enum.Enum):
    DELTA = "delta"
    UNIFORM_CAP = "uniform-cap"


@dataclass(frozen=True)
class SmearingDistribution:
    kind: SmearingKind
    cap: CapRegion

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", SmearingKind(self.kind))

    @classmethod
    def delta(cls, axis: Direction) -> SmearingDistribution:
        return cls(SmearingKind.DELTA, CapRegion(axis, 0.0))

    @classmethod
    def uniform_cap(cls, axis: Direction, epsilon: float) -> SmearingDistribution:
        return cls(SmearingKind.UNIFORM_CAP, CapRegion(axis, epsilon))

    @property
    def is_sharp(self) -> bool:
        return self.kind is SmearingKind.DELTA or self.cap.epsilon == 0.0


def cap_mean_projection(epsilon: float) -> float:
    """Mean of d·axis for d uniform (by area) on a cap of parameter epsilon."""
    eps = float(epsilon)
    if not 0.0 <= eps <= 2.0:
        raise DomainError(f"epsilon must lie in [0, 2], got {eps!r}")
    return 1.0 - eps / 2.0


def shrink_factor(dist: SmearingDistribution) -> float:
    """Mean projection of a smeared direction on its cap axis."""
    if dist.kind is SmearingKind.DELTA:
        return 1.0
    return cap_mean_projection(dist.cap.epsilon)


def orthonormal_frame(axis: Direction) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (u, v, w) with w = axis and u, v completing a right-handed basis."""
    w = axis.as_array()
    # cross with the coordinate axis least aligned with w
    helper = np.zeros(3)
    helper[int(np.argmin(np.abs(w)))] = 1.0
    u = np.cross(helper, w)
    u /= np.linalg.norm(u)
    v = np.cross(w, u)
    return u, v, w


def sample_directions(dist: SmearingDistribution, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` microscopic directions as a (size, 3) array.

    Delta smearing (and a zero-width cap) consumes no randomness and returns
    a read-only broadcast view of the axis.
    """
    axis = dist.cap.axis.as_array()
    if dist.is_sharp:
        return np.broadcast_to(axis, (size, 3))
    eps = dist.cap.epsilon
    cos_t = rng.uniform(1.0 - eps, 1.0, size)
    phi = rng.uniform(0.0, 2.0 * math.pi, size)
    sin_t = np.sqrt(np.clip(1.0 - cos_t * cos_t, 0.0, None))
    u, v, w = orthonormal_frame(dist.cap.axis)
    out = np.multiply.outer(sin_t * np.cos(phi), u)
    out += np.multiply.outer(sin_t * np.sin(phi), v)
    out += np.multiply.outer(cos_t, w)
    return out


def sample_direction(dist: SmearingDistribution, rng: np.random.Generator) -> Direction:
    """Draw one microscopic direction from ``dist``."""
    if dist.is_sharp:
        return dist.cap.axis
    return Direction.from_vector(sample_directions(dist, rng, 1)[0])


def random_directions(rng: np.random.Generator, size: int) -> np.ndarray:
    """Uniform directions on the whole sphere, shape (size, 3)."""
    v = rng.standard_normal((size, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v


def parse_angle(value: Any) -> float:
    """Radians from a number, or from a string with a ``deg``/``rad`` suffix."""
    if isinstance(value, bool):
        raise DomainError(f"not an angle: {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        text = value.strip().lower()
        for suffix, scale in (("deg", math.pi / 180.0), ("°", math.pi / 180.0), ("rad", 1.0)):
            if text.endswith(suffix):
                try:
                    return float(text[: -len(suffix)].strip()) * scale
                except ValueError:
                    break
        else:
            try:
                return float(text)
            except ValueError:
                pass
    raise DomainError(f"not an angle: {value!r}")


def parse_direction(value: Any) -> Direction:
    """Accept ``[x, y, z]`` or ``{"theta": t, "phi": p}`` (angles in radians or with units)."""
    if isinstance(value, Mapping):
        extra = set(value) - {"theta", "phi"}
        if extra or "theta" not in value:
            raise InvalidDirectionError(f"spherical direction needs 'theta' and optional 'phi', got {sorted(value)}")
        return Direction.from_spherical(parse_angle(value["theta"]), parse_angle(value.get("phi", 0.0)))
    if isinstance(value, (list, tuple)) and len(value) == 3:
        return Direction.from_vector([float(c) for c in value])
    raise InvalidDirectionError(f"cannot read a direction from {value!r}")
