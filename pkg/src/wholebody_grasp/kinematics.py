"""Planar kinematics of the two-arm-plus-chest upper body.

Each 7-DOF arm is reduced to the three joints that drive a planar whole-body
grasp (shoulder, elbow, wrist). Links are capsules; the paw is a circle at the
tip of the last link. Angles follow a per-side axis sign so that the same
joint vector gives mirror-image arms on the left and right.
"""

import functools
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import ConfigurationError
from .geometry import reflect_x, segment_segment_distance

SENSOR_NAMES = ("upper", "forearm", "wrist", "paw")
PAW_SENSOR = 3
DEFAULT_CLEARANCE = 0.005
_LIMIT_TOL = 1e-9


class Side(str, Enum):
    LEFT = "left"
    RIGHT = "right"

    @property
    def axis_sign(self) -> float:
        return 1.0 if self is Side.LEFT else -1.0

    @property
    def other(self) -> "Side":
        return Side.RIGHT if self is Side.LEFT else Side.LEFT


# ============================================================================
# Body parameters
# ============================================================================

class BodyFrame(BaseModel):
    """Placement of the two arm bases relative to the chest midline."""

    model_config = ConfigDict(frozen=True)

    shoulder_width: float = Field(default=0.52, ge=0.458, le=0.55, description="Distance between the arms' first-link axes (m)")
    shoulder_angle_deg: float = Field(default=90.0, ge=-45.0, le=90.0, description="Arm mounting angle; 90 points the arms forward")
    base_height: float = Field(default=1.0, ge=0.0, le=1.4, description="Lift setting (m), bookkeeping only")

    def base_pose(self, side: Side) -> tuple[tuple[float, float], float]:
        half = 0.5 * self.shoulder_width
        angle = math.radians(self.shoulder_angle_deg)
        if side is Side.LEFT:
            return (-half, 0.0), angle
        return (half, 0.0), math.pi - angle


class ArmParams(BaseModel):
    """Link geometry shared by both arms (bare, without chambers)."""

    model_config = ConfigDict(frozen=True)

    link_lengths: tuple[float, float, float] = Field(default=(0.41, 0.31, 0.16), description="Planar link lengths (m)")
    link_radii: tuple[float, float, float] = Field(default=(0.045, 0.04, 0.035), description="Bare link capsule radii (m)")
    paw_radius: float = Field(default=0.04, gt=0.0, description="Bare paw radius (m)")
    joint_limits: tuple[tuple[float, float], tuple[float, float], tuple[float, float]] = Field(
        default=((-0.6, 1.2), (-2.2, 0.6), (-1.8, 1.2)),
        description="Per-joint (lower, upper) limits (rad)",
    )

    @model_validator(mode="after")
    def _check(self) -> "ArmParams":
        if min(self.link_lengths) <= 0.0 or min(self.link_radii) <= 0.0:
            raise ValueError("link lengths and radii must be positive")
        for lo, hi in self.joint_limits:
            if not lo < hi:
                raise ValueError(f"joint limit ({lo}, {hi}) is empty")
        return self


class ChestGeometry(BaseModel):
    """Convex chest made of angled slats, each carrying a column of foam-spring modules."""

    model_config = ConfigDict(frozen=True)

    width: float = Field(default=0.285, gt=0.0, description="Chest width (m)")
    height: float = Field(default=0.428, gt=0.0, description="Chest height (m), out of plane")
    forward_offset: float = Field(default=0.08, gt=0.0, description="Apex of the chest ahead of the arm axes (m)")
    slat_count: int = Field(default=5, ge=1)
    slat_angle_deg: float = Field(default=170.0, gt=90.0, le=180.0, description="Angle between horizontally adjacent slats")
    module_grid: tuple[int, int] = Field(default=(4, 5), description="Module rows x columns")
    foam_thickness: float = Field(default=0.0127, gt=0.0, description="Foam layer under each plate (m)")
    k_foam: float = Field(default=8000.0, gt=0.0, description="Per-module foam stiffness (N/m)")

    @model_validator(mode="after")
    def _check(self) -> "ChestGeometry":
        rows, cols = self.module_grid
        if rows < 1 or cols < 1:
            raise ValueError("module grid must have at least one row and column")
        if cols != self.slat_count:
            raise ValueError(f"module grid has {cols} columns but chest has {self.slat_count} slats")
        return self

    @property
    def rows(self) -> int:
        return self.module_grid[0]

    @property
    def slat_width(self) -> float:
        return self.width / self.slat_count


@dataclass(frozen=True)
class Slat:
    column: int
    p0: np.ndarray
    p1: np.ndarray
    normal: np.ndarray
    tilt: float


@functools.lru_cache(maxsize=32)
def chest_slats(chest: ChestGeometry) -> tuple[Slat, ...]:
    """Slat segments ordered left to right, built outward from the apex so both halves mirror exactly."""
    n = chest.slat_count
    w = chest.slat_width
    step = math.pi - math.radians(chest.slat_angle_deg)
    apex = np.array([0.0, chest.forward_offset])

    centre: list[tuple[np.ndarray, np.ndarray, float]] = []
    if n % 2:
        half = np.array([0.5 * w, 0.0])
        centre.append((apex - half, apex + half, 0.0))
        start, offset = apex + half, 0.0
    else:
        start, offset = apex, -0.5
    right: list[tuple[np.ndarray, np.ndarray, float]] = []
    for k in range(1, n // 2 + 1):
        tilt = (k + offset) * step
        end = start + w * np.array([math.cos(tilt), -math.sin(tilt)])
        right.append((start, end, tilt))
        start = end

    left = [(reflect_x(p1), reflect_x(p0), -t) for p0, p1, t in reversed(right)]
    return tuple(
        Slat(col, p0, p1, np.array([math.sin(t), math.cos(t)]), t)
        for col, (p0, p1, t) in enumerate(left + centre + right)
    )


# ============================================================================
# Arms
# ============================================================================

@dataclass(frozen=True)
class Capsule:
    source: str
    sensor: int
    a: np.ndarray
    b: np.ndarray
    radius: float


@dataclass(frozen=True)
class PlanarArm:
    side: Side
    base_position: tuple[float, float]
    base_orientation: float
    link_lengths: tuple[float, float, float]
    link_radii: tuple[float, float, float]
    joint_limits: tuple[tuple[float, float], ...]
    q: tuple[float, float, float] = (0.0, 0.0, 0.0)
    paw_radius: float = 0.0
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if len(self.link_lengths) != 3 or len(self.link_radii) != 3 or len(self.joint_limits) != 3 or len(self.q) != 3:
            raise ConfigurationError("a planar arm has exactly three joints")
        if min(self.link_lengths) <= 0.0 or min(self.link_radii) <= 0.0 or self.paw_radius < 0.0:
            raise ConfigurationError("link lengths and radii must be positive")
        for k, (lo, hi) in enumerate(self.joint_limits):
            if not lo < hi:
                raise ConfigurationError(f"joint {k} has an empty limit range")
            if not lo - _LIMIT_TOL <= self.q[k] <= hi + _LIMIT_TOL:
                raise ConfigurationError(f"joint {k} angle {self.q[k]:.4f} outside limits ({lo}, {hi})")

    def with_q(self, q) -> "PlanarArm":
        return replace(self, q=tuple(float(v) for v in q), _cache={})

    def clamp(self, q) -> np.ndarray:
        lo = np.array([l for l, _ in self.joint_limits])
        hi = np.array([h for _, h in self.joint_limits])
        return np.clip(np.asarray(q, dtype=float), lo, hi)

    def mirrored(self) -> "PlanarArm":
        """The same joint vector on the opposite side, reflected about the midline."""
        x, y = self.base_position
        return replace(
            self,
            side=self.side.other,
            base_position=(-x, y),
            base_orientation=math.pi - self.base_orientation,
            _cache={},
        )

    @property
    def q_array(self) -> np.ndarray:
        return np.array(self.q, dtype=float)


def build_arm(side: Side, frame: BodyFrame, params: ArmParams, q, *,
              inflate: tuple[float, float, float] = (0.0, 0.0, 0.0), paw_inflate: float = 0.0) -> PlanarArm:
    """Arm for one side; ``inflate`` adds each link's chamber thickness to its radius."""
    base, orientation = frame.base_pose(side)
    return PlanarArm(
        side=side,
        base_position=base,
        base_orientation=orientation,
        link_lengths=tuple(params.link_lengths),
        link_radii=tuple(r + t for r, t in zip(params.link_radii, inflate)),
        joint_limits=tuple(tuple(lim) for lim in params.joint_limits),
        q=tuple(float(v) for v in q),
        paw_radius=params.paw_radius + paw_inflate,
    )


def forward_kinematics(arm: PlanarArm) -> list[tuple[np.ndarray, np.ndarray]]:
    """Link segments (start, end) from the base outward."""
    cached = arm._cache.get("fk")
    if cached is not None:
        return cached
    point = np.array(arm.base_position, dtype=float)
    heading = arm.base_orientation
    sign = arm.side.axis_sign
    segments = []
    for length, angle in zip(arm.link_lengths, arm.q):
        heading += sign * angle
        end = point + length * np.array([math.cos(heading), math.sin(heading)])
        segments.append((point, end))
        point = end
    arm._cache["fk"] = segments
    return segments


def joint_positions(arm: PlanarArm) -> np.ndarray:
    segments = forward_kinematics(arm)
    return np.array([seg[0] for seg in segments] + [segments[-1][1]])


def arm_capsules(arm: PlanarArm) -> list[Capsule]:
    cached = arm._cache.get("capsules")
    if cached is not None:
        return cached
    side = arm.side.value
    capsules = [
        Capsule(f"{side}/{SENSOR_NAMES[k]}", k, a, b, arm.link_radii[k])
        for k, (a, b) in enumerate(forward_kinematics(arm))
    ]
    if arm.paw_radius > 0.0:
        tip = forward_kinematics(arm)[-1][1]
        capsules.append(Capsule(f"{side}/{SENSOR_NAMES[PAW_SENSOR]}", PAW_SENSOR, tip, tip, arm.paw_radius))
    arm._cache["capsules"] = capsules
    return capsules


# ============================================================================
# Self-collision
# ============================================================================

@dataclass(frozen=True)
class CollisionReport:
    colliding: bool
    clearance: float


def self_collision_check(left: PlanarArm, right: PlanarArm, chest: ChestGeometry | None,
                         threshold: float = DEFAULT_CLEARANCE) -> CollisionReport:
    """Minimum surface distance between the two arms and between each arm and the chest."""
    clearance = math.inf
    left_caps, right_caps = arm_capsules(left), arm_capsules(right)
    for cl in left_caps:
        for cr in right_caps:
            dist = segment_segment_distance(cl.a, cl.b, cr.a, cr.b)[0] - cl.radius - cr.radius
            clearance = min(clearance, dist)
    if chest is not None:
        for slat in chest_slats(chest):
            for cap in left_caps + right_caps:
                dist = segment_segment_distance(cap.a, cap.b, slat.p0, slat.p1)[0] - cap.radius
                clearance = min(clearance, dist)
    return CollisionReport(colliding=clearance < threshold, clearance=clearance)
