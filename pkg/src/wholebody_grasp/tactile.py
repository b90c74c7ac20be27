"""Behavioural models of the three sensing surfaces.

* Arm chambers: air sleeves around each planar link, isothermal ideal gas.
* Paw: a fourth, smaller chamber at the tip of the last link.
* Chest: a rows x columns array of plates on foam springs, one column per slat.
"""

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .errors import OverCompressionError
from .kinematics import ArmParams, ChestGeometry, chest_slats

if TYPE_CHECKING:
    from .contact import Manipuland

PA_PER_HPA = 100.0
SENSORS_PER_ARM = 4


# ============================================================================
# Chamber model
# ============================================================================

class ChamberModel(BaseModel):
    """Compliance parameters of one air chamber."""

    model_config = ConfigDict(frozen=True)

    rest_pressure: float = Field(default=101325.0, gt=0.0, description="Absolute pressure at rest (Pa)")
    rest_volume: float = Field(default=1.0e-3, gt=0.0, description="Air volume at rest (m^3)")
    thickness: float = Field(default=0.035, gt=0.0, description="Radial thickness over the bare link (m)")
    inner_radius: float = Field(default=0.04, ge=0.0, description="Radius of the bare link under the chamber (m)")
    patch_length: float = Field(default=0.25, gt=0.0, description="Axial extent of the chamber on its link (m)")
    max_relative_compression: float = Field(default=0.5, gt=0.0, lt=1.0, description="Largest displaced fraction of rest volume")

    @property
    def outer_radius(self) -> float:
        return self.inner_radius + self.thickness

    @property
    def volume_limit(self) -> float:
        return self.max_relative_compression * self.rest_volume


def _link_chamber(radius: float) -> ChamberModel:
    return ChamberModel(inner_radius=radius)


class ChamberSet(BaseModel):
    """Chambers of one arm: three link sleeves and the paw."""

    model_config = ConfigDict(frozen=True)

    links: tuple[ChamberModel, ChamberModel, ChamberModel] = Field(
        default=(_link_chamber(0.045), _link_chamber(0.04), _link_chamber(0.035)),
        description="Upper-arm, forearm and wrist chambers",
    )
    paw: ChamberModel = Field(
        default=ChamberModel(rest_volume=2.5e-4, thickness=0.025, inner_radius=0.04, patch_length=0.1),
        description="Paw bubble, treated as a scalar-pressure chamber",
    )

    def sensor(self, index: int) -> ChamberModel:
        return self.paw if index == SENSORS_PER_ARM - 1 else self.links[index]

    def fitted_to(self, arm: ArmParams) -> "ChamberSet":
        """Copy whose inner radii match the bare link and paw radii of ``arm``."""
        return ChamberSet(
            links=tuple(
                c.model_copy(update={"inner_radius": r}) for c, r in zip(self.links, arm.link_radii)
            ),
            paw=self.paw.model_copy(update={"inner_radius": arm.paw_radius}),
        )

    @property
    def link_thickness(self) -> tuple[float, float, float]:
        return tuple(c.thickness for c in self.links)


def chamber_pressure(model: ChamberModel, displaced_volume: float) -> float:
    """Pressure rise over rest, in hPa, for a given displaced volume."""
    if displaced_volume >= model.volume_limit:
        raise OverCompressionError(displaced_volume, model.volume_limit)
    v = max(displaced_volume, 0.0)
    v0 = model.rest_volume
    return model.rest_pressure * (v0 / (v0 - v) - 1.0) / PA_PER_HPA


def chamber_pressure_slope(model: ChamberModel, displaced_volume: float) -> float:
    """d(Delta P)/dV in hPa per m^3."""
    if displaced_volume >= model.volume_limit:
        raise OverCompressionError(displaced_volume, model.volume_limit)
    v0 = model.rest_volume
    return model.rest_pressure * v0 / (v0 - max(displaced_volume, 0.0)) ** 2 / PA_PER_HPA


# ============================================================================
# Penetration to displaced volume
# ============================================================================

class DisplacedVolume(NamedTuple):
    volume: float
    saturated: bool


def lens_area(radius: float, depth: float) -> float:
    """Area of the circular segment of ``depth`` cut from a circle of ``radius``."""
    d = min(max(depth, 0.0), 2.0 * radius)
    if d == 0.0:
        return 0.0
    c = radius - d
    return radius * radius * math.acos(c / radius) - c * math.sqrt(max(2.0 * radius * d - d * d, 0.0))


def displaced_volume_from_penetration(model: ChamberModel, penetration: float, contact_arc: float = 0.0,
                                      contact_length: float | None = None) -> DisplacedVolume:
    """Volume squeezed out of a chamber by an overlap of ``penetration`` metres.

    A flat wall (``contact_arc = 0``) removes the lens cut from the chamber's
    outer circle. A wrapping surface removes an annular sector spanning
    ``contact_arc`` radians, up to the half annulus at ``pi``.
    """
    saturated = penetration > model.thickness
    p = min(max(penetration, 0.0), model.thickness)
    if p == 0.0:
        return DisplacedVolume(0.0, saturated)
    outer = model.outer_radius
    inner = outer - p
    sector = 0.5 * min(max(contact_arc, 0.0), math.pi) * (outer * outer - inner * inner)
    area = max(lens_area(outer, p), sector)
    length = model.patch_length if contact_length is None else min(model.patch_length, max(contact_length, 0.0))
    return DisplacedVolume(area * length, saturated)


# ============================================================================
# Tactile readings
# ============================================================================

class TactileVector(NamedTuple):
    """Relative pressures (hPa) ordered [upper, forearm, wrist, paw] for each arm."""

    left: np.ndarray
    right: np.ndarray

    @classmethod
    def zeros(cls) -> "TactileVector":
        return cls(np.zeros(SENSORS_PER_ARM), np.zeros(SENSORS_PER_ARM))

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.left, self.right])

    def with_noise(self, amplitude_hpa: float, rng: np.random.Generator) -> "TactileVector":
        if amplitude_hpa <= 0.0:
            return self
        noise = rng.uniform(-amplitude_hpa, amplitude_hpa, size=2 * SENSORS_PER_ARM)
        return TactileVector(self.left + noise[:SENSORS_PER_ARM], self.right + noise[SENSORS_PER_ARM:])

    def mirrored(self) -> "TactileVector":
        return TactileVector(self.right.copy(), self.left.copy())


# ============================================================================
# Chest force/geometry modules
# ============================================================================

@dataclass(frozen=True)
class ChestModuleState:
    row: int
    column: int
    compression: float
    plate_tilt: float
    force: np.ndarray  # sensed load on the plate, along its inward normal (N)


def chest_column_force(chest: ChestGeometry, depth: float, k_rigid: float) -> float:
    """Normal force of one slat column: foam in every row, then the rigid case once the foam bottoms out."""
    if depth <= 0.0:
        return 0.0
    foam = min(depth, chest.foam_thickness)
    return chest.rows * (chest.k_foam * foam + k_rigid * max(depth - chest.foam_thickness, 0.0))


def chest_forces(chest: ChestGeometry, obj: "Manipuland") -> list[ChestModuleState]:
    """Per-module compression and sensed force, row-major over the module grid."""
    states: list[ChestModuleState] = []
    columns = []
    for slat in chest_slats(chest):
        hit = obj.penetrate_plate(slat.p0, slat.p1, slat.normal)
        compression = min(hit.depth, chest.foam_thickness) if hit is not None else 0.0
        columns.append((slat, compression))
    for row in range(chest.rows):
        for slat, compression in columns:
            states.append(ChestModuleState(
                row=row,
                column=slat.column,
                compression=compression,
                plate_tilt=slat.tilt,
                force=-slat.normal * (chest.k_foam * compression),
            ))
    return states
