import math

import numpy as np
import pytest

from wholebody_grasp.contact import (
    ContactMode,
    ContactPoint,
    ContactSet,
    Manipuland,
    ShapeKind,
    contact_forces,
    detect_contacts,
    joint_torques,
    resolve_friction,
    sensor_pressures,
    vertical_load_capacity,
)
from wholebody_grasp.errors import ConfigurationError
from wholebody_grasp.geometry import reflect_x
from wholebody_grasp.kinematics import ChestGeometry, PlanarArm, Side
from wholebody_grasp.tactile import ChamberSet, chamber_pressure

LIMITS = ((-4.0, 4.0),) * 3


def upright_arms(offset=0.15, radius=0.075):
    left = PlanarArm(Side.LEFT, (-offset, 0.0), math.pi / 2, (0.3, 0.3, 0.2), (radius,) * 3, LIMITS)
    right = PlanarArm(Side.RIGHT, (offset, 0.0), math.pi / 2, (0.3, 0.3, 0.2), (radius,) * 3, LIMITS)
    return left, right


def point(side=Side.LEFT, sensor=1, position=(0.0, 0.0), normal=(1.0, 0.0), penetration=0.0,
          normal_force=0.0, contact_length=1.0, mu=0.8):
    source = "chest/col2" if side is None else f"{side.value}/{sensor}"
    return ContactPoint(source, side, sensor if side else -1, 2 if side is None else -1,
                        np.array(position, dtype=float), np.array(normal, dtype=float), penetration,
                        contact_length, normal_force=normal_force, mu=mu)


def test_far_object_has_no_contacts():
    left, right = upright_arms()
    far = Manipuland.circle(0.1, (0.0, 3.0))
    assert len(detect_contacts(left, right, ChestGeometry(), far)) == 0
    assert len(detect_contacts(left, right, ChestGeometry(), None)) == 0


def test_enveloped_pot_touches_both_arms_and_chest():
    left, right = upright_arms()
    chest = ChestGeometry()
    pot = Manipuland.circle(0.086, (0.0, chest.forward_offset + 0.086 - 0.003))
    contacts = detect_contacts(left, right, chest, pot)
    sources = {c.source for c in contacts}
    assert {"left/upper", "right/upper", "chest/col2"} <= sources
    assert len(contacts) >= 3
    assert contacts.independent_regions() >= 3
    for c in contacts:
        assert c.penetration > 0.0
        assert np.linalg.norm(c.normal) == pytest.approx(1.0)


def test_symmetric_scene_gives_symmetric_contacts():
    left, right = upright_arms()
    chest = ChestGeometry()
    box = Manipuland.rectangle((0.1, 0.08), (0.0, 0.15))
    contacts = {c.source: c for c in detect_contacts(left, right, chest, box)}
    assert "left/upper" in contacts and "right/upper" in contacts

    def partner(source):
        if source.startswith("chest/col"):
            return f"chest/col{4 - int(source[-1])}"
        side, name = source.split("/")
        return f"{'right' if side == 'left' else 'left'}/{name}"

    for source, c in contacts.items():
        other = contacts[partner(source)]
        assert other.penetration == pytest.approx(c.penetration, abs=1e-12)
        np.testing.assert_allclose(reflect_x(c.position), other.position, atol=1e-12)
        np.testing.assert_allclose(reflect_x(c.normal), other.normal, atol=1e-12)


def test_zero_penetration_gives_zero_force():
    chambers = ChamberSet()
    raw = ContactSet((point(penetration=0.0), point(Side.RIGHT, penetration=0.0)), ContactMode.SOFT)
    assert contact_forces(raw, chambers).total_normal_force == 0.0
    hard = ContactSet(raw.contacts, ContactMode.HARD)
    assert contact_forces(hard).total_normal_force == 0.0


def test_soft_force_is_pressure_over_patch():
    chambers = ChamberSet()
    model = chambers.links[1]
    p = 0.005
    R = model.outer_radius
    lens = R * R * math.acos((R - p) / R) - (R - p) * math.sqrt(2 * R * p - p * p)
    dp = chamber_pressure(model, lens * model.patch_length)
    expected = dp * 100.0 * 2.0 * math.sqrt(2 * R * p - p * p) * model.patch_length

    raw = ContactSet((point(penetration=p),), ContactMode.SOFT)
    resolved = contact_forces(raw, chambers)
    assert resolved[0].normal_force == pytest.approx(expected, rel=1e-12)
    assert sensor_pressures(raw, chambers).left[1] == pytest.approx(dp)
    assert resolved[0].tangent_force == 0.0


def test_soft_contacts_on_one_chamber_share_its_pressure():
    chambers = ChamberSet()
    one = contact_forces(ContactSet((point(penetration=0.004),), ContactMode.SOFT), chambers)
    two = contact_forces(ContactSet((point(penetration=0.004), point(penetration=0.004)), ContactMode.SOFT), chambers)
    assert two[0].normal_force > one[0].normal_force


def test_hard_force_is_linear():
    raw = ContactSet((point(penetration=0.005),), ContactMode.HARD)
    assert contact_forces(raw)[0].normal_force == pytest.approx(500.0)
    assert sensor_pressures(raw, ChamberSet()).stacked().sum() == 0.0


def test_soft_mode_needs_chambers():
    with pytest.raises(ConfigurationError):
        contact_forces(ContactSet((point(penetration=0.001),), ContactMode.SOFT), None)


def test_load_capacity():
    assert vertical_load_capacity(ContactSet()) == 0.0
    pair = ContactSet((point(normal_force=25.0), point(Side.RIGHT, normal_force=25.0)))
    assert vertical_load_capacity(pair, 0.8) == pytest.approx(40.0)
    assert vertical_load_capacity(pair) == pytest.approx(40.0)
    with pytest.raises(ConfigurationError):
        vertical_load_capacity(pair, [0.5])


def test_load_capacity_matches_brute_force(rng):
    for _ in range(50):
        n = int(rng.integers(0, 8))
        forces = rng.uniform(0.0, 100.0, n)
        mus = rng.uniform(0.0, 1.5, n)
        contacts = ContactSet(tuple(point(normal_force=f, mu=m) for f, m in zip(forces, mus)))
        total = 0.0
        for f, m in zip(forces, mus):
            total += f * m
        assert vertical_load_capacity(contacts) == pytest.approx(total, rel=1e-12, abs=1e-12)


def test_joint_torques_from_forearm_contact():
    arm = PlanarArm(Side.LEFT, (0.0, 0.0), 0.0, (0.3, 0.3, 0.2), (0.04,) * 3, LIMITS)
    contacts = ContactSet((
        point(position=(0.45, 0.0), normal=(0.0, 1.0), normal_force=10.0),
        point(Side.RIGHT, position=(0.45, 0.0), normal=(0.0, 1.0), normal_force=99.0),
    ))
    np.testing.assert_allclose(joint_torques(arm, contacts), [-4.5, -1.5, 0.0], atol=1e-12)


def test_friction_balances_a_pinch():
    contacts = ContactSet((
        point(position=(-0.1, 0.0), normal=(1.0, 0.0), normal_force=10.0),
        point(Side.RIGHT, position=(0.1, 0.0), normal=(-1.0, 0.0), normal_force=10.0),
    ))
    allocation = resolve_friction(contacts, np.zeros(2), external_force=(0.0, -5.0))
    assert allocation.residual_force < 1e-6
    assert allocation.residual_torque < 1e-6
    assert allocation.contacts[0].tangent_force == pytest.approx(2.5, abs=1e-6)
    assert allocation.contacts[1].tangent_force == pytest.approx(-2.5, abs=1e-6)


def test_friction_stays_inside_the_cone():
    contacts = ContactSet((
        point(position=(-0.1, 0.0), normal=(1.0, 0.0), normal_force=10.0),
        point(Side.RIGHT, position=(0.1, 0.0), normal=(-1.0, 0.0), normal_force=10.0),
    ))
    allocation = resolve_friction(contacts, np.zeros(2), external_force=(0.0, -50.0))
    for c in allocation.contacts:
        assert c.normal_force >= 0.0
        assert abs(c.tangent_force) <= c.mu * c.normal_force + 1e-12
    assert allocation.residual_force == pytest.approx(50.0 - 16.0, abs=1e-6)


def test_manipuland_validation():
    with pytest.raises(ConfigurationError):
        Manipuland.circle(-0.1)
    with pytest.raises(ConfigurationError):
        Manipuland(ShapeKind.CIRCLE, (0.1, 0.2))
    with pytest.raises(ConfigurationError):
        Manipuland.rectangle((0.1, 0.1), mass=0.0)


def test_grown_and_mirrored_manipuland():
    box = Manipuland.rectangle((0.1, 0.05), (0.2, 0.4), 0.3)
    assert box.grown(0.01).size == pytest.approx((0.11, 0.06))
    mirrored = box.mirrored()
    assert mirrored.position == (-0.2, 0.4)
    assert mirrored.angle == -0.3
