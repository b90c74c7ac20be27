"""Contact detection and force resolution between the body and a rigid manipuland."""

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterator, Sequence

import numpy as np
from scipy import optimize

from .errors import ConfigurationError
from .geometry import (
    Penetration,
    capsule_circle_penetration,
    capsule_polygon_penetration,
    chord,
    cross2,
    perp,
    plate_circle_penetration,
    plate_polygon_penetration,
    rectangle_vertices,
)
from .kinematics import ChestGeometry, PlanarArm, Side, arm_capsules, chest_slats, forward_kinematics
from .tactile import (
    PA_PER_HPA,
    ChamberSet,
    TactileVector,
    chamber_pressure,
    chest_column_force,
    displaced_volume_from_penetration,
)

logger = logging.getLogger(__name__)

GRAVITY = 9.80665
DEFAULT_MU = 0.8
DEFAULT_K_HARD = 1.0e5
CHEST_SENSOR = -1
# Stick check regulariser, relative to the squared force scale.
_RIDGE = 1e-10


class ContactMode(str, Enum):
    SOFT = "soft"
    HARD = "hard"


class ShapeKind(str, Enum):
    CIRCLE = "circle"
    RECTANGLE = "rectangle"


# ============================================================================
# Manipuland
# ============================================================================

@dataclass(frozen=True)
class Manipuland:
    """Rigid planar object: a circle (``size = (radius,)``) or a rectangle (``size = (hx, hy)``)."""

    shape: ShapeKind
    size: tuple[float, ...]
    position: tuple[float, float] = (0.0, 0.0)
    angle: float = 0.0
    mass: float = 1.0
    mu: float = DEFAULT_MU
    taper: float = 0.0
    name: str = "object"
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        expected = 1 if self.shape is ShapeKind.CIRCLE else 2
        if len(self.size) != expected:
            raise ConfigurationError(f"{self.shape.value} needs {expected} size value(s), got {len(self.size)}")
        if min(self.size) <= 0.0:
            raise ConfigurationError("object dimensions must be positive")
        if self.mass <= 0.0:
            raise ConfigurationError("object mass must be positive")
        if self.mu < 0.0 or self.taper < 0.0:
            raise ConfigurationError("friction coefficient and taper must be non-negative")

    @classmethod
    def circle(cls, radius: float, position=(0.0, 0.0), **kwargs) -> "Manipuland":
        return cls(ShapeKind.CIRCLE, (float(radius),), tuple(float(v) for v in position), **kwargs)

    @classmethod
    def rectangle(cls, half_extents, position=(0.0, 0.0), angle: float = 0.0, **kwargs) -> "Manipuland":
        return cls(ShapeKind.RECTANGLE, tuple(float(v) for v in half_extents),
                   tuple(float(v) for v in position), float(angle), **kwargs)

    @property
    def center(self) -> np.ndarray:
        return np.array(self.position, dtype=float)

    @property
    def weight(self) -> float:
        return self.mass * GRAVITY

    @property
    def characteristic_length(self) -> float:
        return max(self.size)

    def with_pose(self, position, angle: float | None = None) -> "Manipuland":
        return replace(self, position=(float(position[0]), float(position[1])),
                       angle=self.angle if angle is None else float(angle), _cache={})

    def grown(self, delta: float) -> "Manipuland":
        """Cross-section enlarged by ``delta`` on every side (wedging as the object slides down)."""
        return replace(self, size=tuple(s + delta for s in self.size), _cache={})

    def mirrored(self) -> "Manipuland":
        x, y = self.position
        return replace(self, position=(-x, y), angle=-self.angle, _cache={})

    def vertices(self) -> np.ndarray:
        cached = self._cache.get("vertices")
        if cached is None:
            cached = rectangle_vertices(self.center, self.angle, np.array(self.size))
            self._cache["vertices"] = cached
        return cached

    def penetrate_capsule(self, a: np.ndarray, b: np.ndarray, radius: float) -> Penetration | None:
        if self.shape is ShapeKind.CIRCLE:
            return capsule_circle_penetration(a, b, radius, self.center, self.size[0])
        return capsule_polygon_penetration(a, b, radius, self.vertices())

    def penetrate_plate(self, p0: np.ndarray, p1: np.ndarray, normal: np.ndarray) -> Penetration | None:
        if self.shape is ShapeKind.CIRCLE:
            return plate_circle_penetration(p0, p1, normal, self.center, self.size[0])
        return plate_polygon_penetration(p0, p1, normal, self.vertices())


# ============================================================================
# Contact points
# ============================================================================

@dataclass(frozen=True)
class ContactPoint:
    source: str
    side: Side | None
    sensor: int
    column: int
    position: np.ndarray
    normal: np.ndarray
    penetration: float
    contact_length: float
    normal_force: float = 0.0
    tangent_force: float = 0.0
    mu: float = DEFAULT_MU

    @property
    def tangent(self) -> np.ndarray:
        return perp(self.normal)

    @property
    def on_chest(self) -> bool:
        return self.side is None

    @property
    def force(self) -> np.ndarray:
        """Force applied to the object (N)."""
        return self.normal_force * self.normal + self.tangent_force * self.tangent

    def mirrored(self, columns: int) -> "ContactPoint":
        """Reflection about the midline; ``columns`` is the chest slat count."""
        if self.on_chest:
            side, column = None, columns - 1 - self.column
            source = f"chest/col{column}"
        else:
            side, column = self.side.other, self.column
            source = f"{side.value}/{self.source.split('/', 1)[1]}"
        return replace(
            self,
            source=source,
            side=side,
            column=column,
            position=np.array([-self.position[0], self.position[1]]),
            normal=np.array([-self.normal[0], self.normal[1]]),
            # the tangent perp(n) flips under reflection
            tangent_force=-self.tangent_force,
        )


@dataclass(frozen=True)
class ContactSet:
    contacts: tuple[ContactPoint, ...] = ()
    mode: ContactMode = ContactMode.SOFT

    def __iter__(self) -> Iterator[ContactPoint]:
        return iter(self.contacts)

    def __len__(self) -> int:
        return len(self.contacts)

    def __getitem__(self, index: int) -> ContactPoint:
        return self.contacts[index]

    @property
    def total_normal_force(self) -> float:
        return float(sum(c.normal_force for c in self.contacts))

    def net_wrench(self, center: np.ndarray) -> tuple[np.ndarray, float]:
        """Net force and torque (about ``center``) the body applies to the object."""
        force = np.zeros(2)
        torque = 0.0
        for c in self.contacts:
            f = c.force
            force += f
            torque += cross2(c.position - center, f)
        return force, torque

    def mirrored(self, columns: int) -> "ContactSet":
        return ContactSet(tuple(sorted((c.mirrored(columns) for c in self.contacts), key=lambda c: c.source)),
                          self.mode)

    def independent_regions(self, loaded_only: bool = False) -> int:
        """Distinct body parts in contact: each arm link, the paw, and the chest as a whole."""
        return len({("chest" if c.on_chest else c.source) for c in self.contacts
                    if not loaded_only or c.normal_force > 0.0})


def detect_contacts(left: PlanarArm, right: PlanarArm, chest: ChestGeometry | None,
                    obj: Manipuland | None, mode: ContactMode = ContactMode.SOFT) -> ContactSet:
    """One contact per (link, paw or chest plate) overlapping the object, ordered by source."""
    if obj is None:
        return ContactSet((), mode)
    found: list[ContactPoint] = []
    for arm in (left, right):
        for cap in arm_capsules(arm):
            hit = obj.penetrate_capsule(cap.a, cap.b, cap.radius)
            if hit is None:
                continue
            found.append(ContactPoint(
                source=cap.source, side=arm.side, sensor=cap.sensor, column=-1,
                position=hit.point, normal=hit.normal, penetration=hit.depth,
                contact_length=hit.contact_length, mu=obj.mu,
            ))
    if chest is not None:
        for slat in chest_slats(chest):
            hit = obj.penetrate_plate(slat.p0, slat.p1, slat.normal)
            if hit is None:
                continue
            found.append(ContactPoint(
                source=f"chest/col{slat.column}", side=None, sensor=CHEST_SENSOR, column=slat.column,
                position=hit.point, normal=hit.normal, penetration=hit.depth,
                contact_length=hit.contact_length, mu=obj.mu,
            ))
    return ContactSet(tuple(sorted(found, key=lambda c: c.source)), mode)


# ============================================================================
# Normal forces and pressures
# ============================================================================

def _sensor_volumes(contacts: ContactSet, chambers: ChamberSet) -> dict[tuple[Side, int], float]:
    volumes: dict[tuple[Side, int], float] = defaultdict(float)
    for c in contacts:
        if c.on_chest:
            continue
        model = chambers.sensor(c.sensor)
        volumes[(c.side, c.sensor)] += displaced_volume_from_penetration(
            model, c.penetration, contact_length=c.contact_length
        ).volume
    return volumes


def sensor_pressures(contacts: ContactSet, chambers: ChamberSet | None) -> TactileVector:
    """Relative pressure (hPa) of every chamber; zero in Hard mode, where no chambers exist."""
    reading = TactileVector.zeros()
    if contacts.mode is ContactMode.HARD or chambers is None:
        return reading
    for (side, sensor), volume in _sensor_volumes(contacts, chambers).items():
        target = reading.left if side is Side.LEFT else reading.right
        target[sensor] = chamber_pressure(chambers.sensor(sensor), volume)
    return reading


def contact_forces(contacts: ContactSet, chambers: ChamberSet | None = None, chest: ChestGeometry | None = None,
                   k_hard: float = DEFAULT_K_HARD) -> ContactSet:
    """Assign normal forces: chamber pressure over the contact patch (Soft) or a stiff penalty (Hard).

    Chest plates use the foam springs in both modes. Tangent forces are left at
    zero; the equilibrium solver assigns them inside the friction cone.
    """
    soft = contacts.mode is ContactMode.SOFT
    if soft and chambers is None:
        raise ConfigurationError("soft-mode contact forces need chamber models")
    pressures = sensor_pressures(contacts, chambers) if soft else None

    resolved = []
    for c in contacts:
        if c.on_chest:
            if chest is None:
                raise ConfigurationError("chest contacts need the chest geometry")
            normal_force = chest_column_force(chest, c.penetration, k_hard)
        elif soft:
            model = chambers.sensor(c.sensor)
            dp = (pressures.left if c.side is Side.LEFT else pressures.right)[c.sensor]
            depth = min(c.penetration, model.thickness)
            length = min(model.patch_length, c.contact_length)
            normal_force = dp * PA_PER_HPA * chord(model.outer_radius, depth) * length
            # chamber fully flattened: the bare link carries the rest
            normal_force += k_hard * max(c.penetration - model.thickness, 0.0)
        else:
            normal_force = k_hard * c.penetration
        resolved.append(replace(c, normal_force=float(normal_force), tangent_force=0.0))
    return ContactSet(tuple(resolved), contacts.mode)


def joint_torques(arm: PlanarArm, contacts: ContactSet) -> np.ndarray:
    """Joint torques from the contact reactions on ``arm`` (Jacobian transpose)."""
    joints = [np.array(arm.base_position, dtype=float)]
    joints += [seg[1] for seg in forward_kinematics(arm)[:-1]]
    sign = arm.side.axis_sign
    tau = np.zeros(3)
    for c in contacts:
        if c.side is not arm.side:
            continue
        reaction = -c.force
        link = min(c.sensor, 2)
        for j in range(link + 1):
            tau[j] += sign * cross2(c.position - joints[j], reaction)
    return tau


def vertical_load_capacity(contacts: ContactSet, mu: float | Sequence[float] | None = None) -> float:
    """Out-of-plane friction budget: sum of mu * N over the contacts."""
    if mu is None:
        coeffs = [c.mu for c in contacts]
    elif np.isscalar(mu):
        coeffs = [float(mu)] * len(contacts)
    else:
        coeffs = list(mu)
        if len(coeffs) != len(contacts):
            raise ConfigurationError(f"{len(coeffs)} friction coefficients for {len(contacts)} contacts")
    return float(sum(m * c.normal_force for m, c in zip(coeffs, contacts)))


# ============================================================================
# Friction allocation
# ============================================================================

@dataclass(frozen=True)
class FrictionAllocation:
    contacts: ContactSet
    residual_force: float
    residual_torque: float


def resolve_friction(contacts: ContactSet, center: np.ndarray, external_force=(0.0, 0.0),
                     external_torque: float = 0.0, length_scale: float = 0.1) -> FrictionAllocation:
    """Tangent forces inside each friction cone that best cancel the remaining wrench on the object.

    Bounded least squares over the contacts that carry load; a small ridge term
    picks the least-effort allocation when several balance the object.
    """
    normal_only = replace(contacts, contacts=tuple(replace(c, tangent_force=0.0) for c in contacts))
    force, torque = normal_only.net_wrench(center)
    force = force + np.asarray(external_force, dtype=float)
    torque += external_torque
    target = -np.array([force[0], force[1], torque / length_scale])

    active = [i for i, c in enumerate(contacts) if c.mu * c.normal_force > 1e-12]
    if not active:
        return FrictionAllocation(normal_only, float(np.hypot(force[0], force[1])), abs(torque))

    columns = []
    for i in active:
        c = contacts[i]
        t = c.tangent
        columns.append([t[0], t[1], cross2(c.position - center, t) / length_scale])
    A = np.array(columns).T
    bound = np.array([contacts[i].mu * contacts[i].normal_force for i in active])
    scale = max(float(np.abs(target).max()), float(bound.max()), 1.0)
    ridge = math.sqrt(_RIDGE) * scale / max(float(bound.max()), 1e-12)
    A_reg = np.vstack([A, ridge * np.eye(len(active))])
    b_reg = np.concatenate([target, np.zeros(len(active))])
    result = optimize.lsq_linear(A_reg, b_reg, bounds=(-bound, bound), method="bvls", tol=1e-14)
    if not result.success:
        logger.debug(f"friction allocation stopped early: {result.message}")
    tangents = np.clip(result.x, -bound, bound)

    updated = list(normal_only.contacts)
    for i, value in zip(active, tangents):
        updated[i] = replace(updated[i], tangent_force=float(value))
    allocated = ContactSet(tuple(updated), contacts.mode)
    f, tq = allocated.net_wrench(center)
    f = f + np.asarray(external_force, dtype=float)
    tq += external_torque
    return FrictionAllocation(allocated, float(np.hypot(f[0], f[1])), abs(tq))
