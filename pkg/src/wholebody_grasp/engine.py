"""Quasi-static simulation loop, equilibrium solver and load test."""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Iterator

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from .contact import (
    DEFAULT_K_HARD,
    GRAVITY,
    ContactMode,
    ContactSet,
    Manipuland,
    contact_forces,
    detect_contacts,
    joint_torques,
    resolve_friction,
    sensor_pressures,
    vertical_load_capacity,
)
from .controller import GraspController, clamp_command
from .errors import ConfigurationError, NonConvergenceError, OverCompressionError
from .kinematics import (
    ArmParams,
    BodyFrame,
    ChestGeometry,
    PlanarArm,
    Side,
    build_arm,
    self_collision_check,
)
from .tactile import ChamberSet, TactileVector

logger = logging.getLogger(__name__)

LB = 0.45359237


class SimConfig(BaseModel):
    """Time stepping and solver tolerances."""

    model_config = ConfigDict(frozen=True)

    dt_control: float = Field(default=0.01, gt=0.0, description="Control period (s)")
    physics_substeps: int = Field(default=10, ge=1, description="Physics substeps per control period")
    equilibrium_tol_force: float = Field(default=1e-4, gt=0.0, description="Residual force tolerance (N)")
    equilibrium_tol_torque: float = Field(default=1e-5, gt=0.0, description="Residual torque tolerance (N*m)")
    max_relaxation_iters: int = Field(default=10000, ge=1)
    timeout: float = Field(default=30.0, gt=0.0, description="Grasp timeout (s)")
    mode: ContactMode = ContactMode.SOFT
    seed: int = 0
    k_hard: float = Field(default=DEFAULT_K_HARD, gt=0.0, description="Stiffness of rigid surfaces (N/m)")
    collision_clearance: float = Field(default=0.005, gt=0.0, description="Self-collision threshold (m)")
    fd_step: float = Field(default=1e-7, gt=0.0, description="Finite-difference step of the settle Jacobian (m)")
    max_settle_step: float = Field(default=0.02, gt=0.0, description="Largest pose change per relaxation iteration (m)")
    trigger_bisections: int = Field(default=12, ge=0, description="Bisections locating a hard-mode trigger inside a substep")

    @property
    def control_rate(self) -> float:
        return 1.0 / self.dt_control


# ============================================================================
# Scene
# ============================================================================

@dataclass(frozen=True)
class Scene:
    left: PlanarArm
    right: PlanarArm
    chest: ChestGeometry
    chambers: ChamberSet
    mode: ContactMode = ContactMode.SOFT
    k_hard: float = DEFAULT_K_HARD
    manipuland: Manipuland | None = None

    def with_arms(self, left: PlanarArm, right: PlanarArm) -> "Scene":
        return replace(self, left=left, right=right)

    def with_manipuland(self, manipuland: Manipuland | None) -> "Scene":
        return replace(self, manipuland=manipuland)

    def arm(self, side: Side) -> PlanarArm:
        return self.left if side is Side.LEFT else self.right

    def mirrored(self) -> "Scene":
        return replace(
            self,
            left=self.right.mirrored(),
            right=self.left.mirrored(),
            manipuland=None if self.manipuland is None else self.manipuland.mirrored(),
        )

    def resolve(self, obj: Manipuland | None = None) -> ContactSet:
        """Contacts with normal forces for ``obj`` (default: the scene's manipuland)."""
        obj = self.manipuland if obj is None else obj
        contacts = detect_contacts(self.left, self.right, self.chest, obj, self.mode)
        return contact_forces(contacts, self.chambers, self.chest, self.k_hard)

    def pressures(self, contacts: ContactSet) -> TactileVector:
        return sensor_pressures(contacts, self.chambers)

    def collision(self, clearance: float) -> bool:
        return self_collision_check(self.left, self.right, self.chest, clearance).colliding


def build_scene(frame: BodyFrame, arm: ArmParams, chest: ChestGeometry, chambers: ChamberSet, mode: ContactMode,
                q_left, q_right=None, manipuland: Manipuland | None = None,
                k_hard: float = DEFAULT_K_HARD) -> Scene:
    """Both arms at their joint vectors; Soft mode wraps every link and the paw in its chamber."""
    chambers = chambers.fitted_to(arm)
    q_right = q_left if q_right is None else q_right
    if mode is ContactMode.SOFT:
        inflate, paw_inflate = chambers.link_thickness, chambers.paw.thickness
    else:
        inflate, paw_inflate = (0.0, 0.0, 0.0), 0.0
    left = build_arm(Side.LEFT, frame, arm, q_left, inflate=inflate, paw_inflate=paw_inflate)
    right = build_arm(Side.RIGHT, frame, arm, q_right, inflate=inflate, paw_inflate=paw_inflate)
    return Scene(left, right, chest, chambers, mode, k_hard, manipuland)


# ============================================================================
# Quasi-static settle
# ============================================================================

@dataclass(frozen=True)
class Settlement:
    manipuland: Manipuland | None
    contacts: ContactSet
    residual_force: float
    residual_torque: float
    iterations: int

    @property
    def pose(self) -> tuple[np.ndarray, float] | None:
        if self.manipuland is None:
            return None
        return self.manipuland.center, self.manipuland.angle

    def mirrored(self, columns: int) -> "Settlement":
        return replace(
            self,
            manipuland=None if self.manipuland is None else self.manipuland.mirrored(),
            contacts=self.contacts.mirrored(columns),
        )


def settle_object(scene: Scene, obj: Manipuland | None = None, cfg: SimConfig | None = None,
                  external_force=(0.0, 0.0), external_torque: float = 0.0) -> Settlement:
    """Move the object in the plane until the contact wrench (plus any external load) balances.

    Each iteration first asks whether friction inside the cones can hold the
    object where it is. If not, the object takes a step that lowers the
    frictionless wrench: damped Gauss-Newton first, then steepest descent, then
    single-coordinate moves, each with a backtracking line search. When none
    of them helps, the finite-difference Jacobian is rebuilt over a ten times
    wider step, up to ``max_settle_step``. ``NonConvergenceError`` is raised
    only at the iteration cap.

    A scene and its mirror image are always solved in the same frame (the one
    with the object left of the midline), so mirrored scenes settle to
    mirrored poses and forces bit for bit.
    """
    cfg = cfg or SimConfig()
    obj = scene.manipuland if obj is None else obj
    if obj is None:
        return Settlement(None, ContactSet((), scene.mode), 0.0, 0.0, 0)
    if _solve_mirrored(scene, obj, external_force, external_torque):
        fx, fy = external_force
        settled = _settle(scene.mirrored(), obj.mirrored(), cfg, (-fx, fy), -external_torque)
        return settled.mirrored(scene.chest.slat_count)
    return _settle(scene, obj, cfg, external_force, external_torque)


def _solve_mirrored(scene: Scene, obj: Manipuland, external_force, external_torque: float) -> bool:
    """Whether the mirror image is the canonical frame; exactly one of a scene and its mirror says yes."""
    x = obj.position[0]
    if x != 0.0:
        return x > 0.0
    if scene.left.q != scene.right.q:
        return scene.left.q > scene.right.q
    if obj.angle != 0.0:
        return obj.angle > 0.0
    if external_force[0] != 0.0:
        return external_force[0] > 0.0
    return external_torque > 0.0


def _settle(scene: Scene, obj: Manipuland, cfg: SimConfig, external_force, external_torque: float) -> Settlement:
    ext_force = np.asarray(external_force, dtype=float)
    ell = obj.characteristic_length

    def pose_of(z: np.ndarray) -> Manipuland:
        return obj.with_pose(z[:2], z[2] / ell)

    def evaluate(z: np.ndarray, strict: bool = False) -> tuple[Manipuland, ContactSet | None, np.ndarray | None]:
        candidate = pose_of(z)
        try:
            contacts = scene.resolve(candidate)
        except OverCompressionError:
            if strict:
                raise
            return candidate, None, None
        force, torque = contacts.net_wrench(candidate.center)
        force = force + ext_force
        torque += external_torque
        return candidate, contacts, np.array([force[0], force[1], torque / ell])

    z = np.array([obj.position[0], obj.position[1], obj.angle * ell])
    candidate, contacts, wrench = evaluate(z, strict=True)
    fd_step = cfg.fd_step
    for iteration in range(cfg.max_relaxation_iters):
        allocation = resolve_friction(contacts, candidate.center, ext_force, external_torque, ell)
        if (allocation.residual_force < cfg.equilibrium_tol_force
                and allocation.residual_torque < cfg.equilibrium_tol_torque):
            return Settlement(candidate, allocation.contacts, allocation.residual_force,
                              allocation.residual_torque, iteration)
        if len(contacts) == 0:
            raise NonConvergenceError(float(np.hypot(*ext_force)), abs(external_torque), iteration)

        jacobian = _wrench_jacobian(evaluate, z, wrench, fd_step)
        step = _relaxation_step(evaluate, z, wrench, jacobian, cfg.max_settle_step)
        if step is None:
            widened = min(fd_step * 10.0, cfg.max_settle_step)
            logger.debug(f"settle stalled at |F|={np.hypot(wrench[0], wrench[1]):.3e} N, "
                         f"Jacobian step {fd_step:.1e} -> {widened:.1e} m")
            fd_step = widened
            continue
        z, candidate, contacts, wrench = step
        fd_step = cfg.fd_step

    raise NonConvergenceError(float(np.hypot(wrench[0], wrench[1])), abs(wrench[2] * ell), cfg.max_relaxation_iters)


def _wrench_jacobian(evaluate, z: np.ndarray, wrench: np.ndarray, h: float) -> np.ndarray:
    jacobian = np.zeros((3, 3))
    for k in range(3):
        dz = np.zeros(3)
        dz[k] = h
        _, contacts, forward = evaluate(z + dz)
        if contacts is not None:
            jacobian[:, k] = (forward - wrench) / h
            continue
        _, contacts, backward = evaluate(z - dz)
        if contacts is not None:
            jacobian[:, k] = (wrench - backward) / h
    return jacobian


def _descent_directions(jacobian: np.ndarray, wrench: np.ndarray) -> Iterator[np.ndarray]:
    jtj = jacobian.T @ jacobian
    gradient = jacobian.T @ wrench
    damping = 1e-9 * (np.trace(jtj) / 3.0 + 1e-30)
    for _ in range(8):
        try:
            yield -np.linalg.solve(jtj + damping * np.eye(3), gradient)
        except np.linalg.LinAlgError:
            pass
        damping = max(damping * 1e3, 1e-12)
    yield -gradient
    for k in range(3):
        for sign in (1.0, -1.0):
            axis = np.zeros(3)
            axis[k] = sign
            yield axis


def _relaxation_step(evaluate, z, wrench, jacobian, max_step):
    """First trial pose along a descent direction whose wrench norm is below the current one."""
    norm0 = float(np.linalg.norm(wrench))
    for delta in _descent_directions(jacobian, wrench):
        length = float(np.linalg.norm(delta))
        if not np.isfinite(length) or length == 0.0:
            continue
        delta = delta * (max_step / length) if length > max_step else delta
        alpha = 1.0
        while alpha * min(length, max_step) > 1e-14:
            trial = z + alpha * delta
            candidate, contacts, trial_wrench = evaluate(trial)
            if contacts is not None and float(np.linalg.norm(trial_wrench)) < norm0:
                return trial, candidate, contacts, trial_wrench
            alpha *= 0.5
    return None


# ============================================================================
# Grasp run
# ============================================================================

class RunStatus(str, Enum):
    COMPLETED = "completed"
    TIMEOUT = "timeout"


TRACE_COLUMNS = (
    ["t", "stage"]
    + [f"q_{side}_{k}" for side in ("left", "right") for k in range(3)]
    + [f"qdot_{side}_{k}" for side in ("left", "right") for k in range(3)]
    + [f"dp_{side}_{k}" for side in ("left", "right") for k in range(4)]
    + ["contacts", "total_normal_force", "capacity", "weight", "slip"]
)


@dataclass
class MonitorStats:
    collision_stops: int = 0
    chamber_stops: int = 0
    limit_clamps: int = 0
    trigger_events: int = 0


@dataclass
class GraspTrace:
    status: RunStatus
    steps: int
    steps_to_grasp: int | None
    scene: Scene
    settlement: Settlement
    rows: list[list[float]] = field(default_factory=list)
    monitor: MonitorStats = field(default_factory=MonitorStats)

    @property
    def grasped(self) -> bool:
        return self.status is RunStatus.COMPLETED

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=TRACE_COLUMNS)


def trace_row(t: float, stage: int, scene: Scene, qdot_left, qdot_right, reading: TactileVector,
              contacts: ContactSet, weight: float = 0.0, slip: float = 0.0,
              capacity: float | None = None) -> list[float]:
    capacity = vertical_load_capacity(contacts) if capacity is None else capacity
    return (
        [t, stage]
        + list(scene.left.q) + list(scene.right.q)
        + list(qdot_left) + list(qdot_right)
        + list(reading.left) + list(reading.right)
        + [len(contacts), contacts.total_normal_force, capacity, weight, slip]
    )


def _joint_torques(scene: Scene, contacts: ContactSet) -> tuple[np.ndarray, np.ndarray]:
    return joint_torques(scene.left, contacts), joint_torques(scene.right, contacts)


def _advance_arms(scene: Scene, cmd_left, cmd_right, duration: float) -> Scene:
    left = scene.left.with_q(scene.left.clamp(scene.left.q_array + cmd_left * duration))
    right = scene.right.with_q(scene.right.clamp(scene.right.q_array + cmd_right * duration))
    return scene.with_arms(left, right)


def run_grasp(scene: Scene, controller: GraspController, cfg: SimConfig,
              sensor_noise_hpa: float = 0.0, rng: np.random.Generator | None = None) -> GraspTrace:
    """Run the grasp primitive in closed loop until the terminal stage or the timeout."""
    if not math.isclose(controller.cfg.dt, cfg.dt_control, rel_tol=1e-9):
        raise ConfigurationError(
            f"controller runs at {controller.cfg.control_rate} Hz but the engine steps at {cfg.control_rate} Hz"
        )
    if scene.collision(cfg.collision_clearance):
        raise ConfigurationError("initial configuration is in self-collision")
    rng = rng or np.random.default_rng(cfg.seed)
    dt = cfg.dt_control
    h = dt / cfg.physics_substeps
    hard = scene.mode is ContactMode.HARD

    settlement = settle_object(scene, cfg=cfg)
    scene = scene.with_manipuland(settlement.manipuland)

    def read(contacts: ContactSet) -> TactileVector:
        return scene.pressures(contacts).with_noise(sensor_noise_hpa, rng)

    reading = read(settlement.contacts)
    controller.start(reading, _joint_torques(scene, settlement.contacts) if hard else None)
    monitor = MonitorStats()
    rows: list[list[float]] = []
    max_steps = int(round(cfg.timeout / dt))
    status = RunStatus.TIMEOUT
    steps = 0

    for step in range(max_steps):
        t = step * dt
        contacts = settlement.contacts
        if step > 0:
            reading = read(contacts)
        torques = _joint_torques(scene, contacts) if hard else None
        stage = controller.stage
        cmd_left, cmd_right = controller.step(t, reading, torques)

        clamped_left = clamp_command(cmd_left, scene.left, False, dt)
        clamped_right = clamp_command(cmd_right, scene.right, False, dt)
        if not (np.array_equal(clamped_left, cmd_left) and np.array_equal(clamped_right, cmd_right)):
            monitor.limit_clamps += 1
            logger.debug(f"t={t:.2f}s joint limit reached, command clamped")
        if (clamped_left.any() or clamped_right.any()) and \
                _advance_arms(scene, clamped_left, clamped_right, dt).collision(cfg.collision_clearance):
            monitor.collision_stops += 1
            clamped_left = clamp_command(clamped_left, scene.left, True)
            clamped_right = clamp_command(clamped_right, scene.right, True)
            if monitor.collision_stops == 1:
                logger.warning(f"t={t:.2f}s arms halted: predicted self-collision")
        rows.append(trace_row(t, stage, scene, clamped_left, clamped_right, reading, contacts))

        if clamped_left.any() or clamped_right.any():
            for _ in range(cfg.physics_substeps):
                trial = _advance_arms(scene, clamped_left, clamped_right, h)
                try:
                    trial_settlement = settle_object(trial, scene.manipuland, cfg)
                except OverCompressionError as exc:
                    monitor.chamber_stops += 1
                    logger.warning(f"t={t:.2f}s substep reverted: {exc}")
                    break
                if hard and any(controller.torque_triggers(_joint_torques(trial, trial_settlement.contacts))):
                    # halt at the trigger; the controller advances on its next step
                    trial, trial_settlement = _locate_trigger(scene, clamped_left, clamped_right, h,
                                                              trial, trial_settlement, controller, cfg)
                    scene = trial.with_manipuland(trial_settlement.manipuland)
                    settlement = trial_settlement
                    monitor.trigger_events += 1
                    break
                scene = trial.with_manipuland(trial_settlement.manipuland)
                settlement = trial_settlement

        steps = step + 1
        if controller.done:
            status = RunStatus.COMPLETED
            break

    if status is RunStatus.TIMEOUT:
        logger.info(f"grasp timed out after {steps} steps at stage {controller.stage}")
    else:
        logger.info(f"grasp completed in {steps} steps")
    final_reading = read(settlement.contacts)
    zero = np.zeros(3)
    rows.append(trace_row(steps * dt, controller.stage, scene, zero, zero, final_reading, settlement.contacts))
    return GraspTrace(
        status=status,
        steps=steps,
        steps_to_grasp=steps if status is RunStatus.COMPLETED else None,
        scene=scene,
        settlement=settlement,
        rows=rows,
        monitor=monitor,
    )


def _locate_trigger(scene: Scene, cmd_left, cmd_right, h: float, trial: Scene, trial_settlement: Settlement,
                    controller: GraspController, cfg: SimConfig) -> tuple[Scene, Settlement]:
    """Earliest fraction of a substep at which the torque trigger fires (upper end of the bracket)."""
    lo, hi = 0.0, 1.0
    best = (trial, trial_settlement)
    for _ in range(cfg.trigger_bisections):
        mid = 0.5 * (lo + hi)
        partial = _advance_arms(scene, cmd_left, cmd_right, mid * h)
        try:
            partial_settlement = settle_object(partial, scene.manipuland, cfg)
        except OverCompressionError:
            hi = mid
            continue
        if any(controller.torque_triggers(_joint_torques(partial, partial_settlement.contacts))):
            hi = mid
            best = (partial, partial_settlement)
        else:
            lo = mid
    return best


# ============================================================================
# Load test
# ============================================================================

class LoadProtocol(BaseModel):
    """Weights added after the table is lowered, and the slip bookkeeping."""

    model_config = ConfigDict(frozen=True)

    increment_kg: float = Field(default=LB, gt=0.0, description="Added mass per step (kg)")
    max_added_kg: float = Field(default=5 * LB, ge=0.0, description="Largest added mass (kg)")
    slip_step: float = Field(default=0.001, gt=0.0, description="Vertical slip per bookkeeping step (m)")
    max_slip: float = Field(default=0.05, gt=0.0, description="Slip at which the object is lost (m)")
    kinetic_ratio: float = Field(default=0.6, gt=0.0, le=1.0, description="Sliding over static friction")
    soft_stick_range: float = Field(default=0.01, ge=0.0, description="Slip a chamber contact absorbs before sliding (m)")
    chest_stick_range: float = Field(default=0.005, ge=0.0, description="Slip a chest plate absorbs before sliding (m)")
    hard_stick_range: float = Field(default=0.0, ge=0.0, description="Slip a rigid link absorbs before sliding (m)")
    min_support_regions: int = Field(
        default=3, ge=1, description="Independent contact regions needed to keep the object from tipping"
    )
    visible_shift: float = Field(default=0.001, gt=0.0, description="Downward shift logged as a displacement (m)")

    def added_masses(self) -> list[float]:
        count = int(math.floor(self.max_added_kg / self.increment_kg + 1e-9))
        return [k * self.increment_kg for k in range(count + 1)]


class OutcomeKind(str, Enum):
    SUCCESS = "success"
    DISPLACEMENT = "displacement"
    FAILURE = "failure"


@dataclass(frozen=True)
class Outcome:
    kind: OutcomeKind
    max_weight_held: float
    max_added: float
    slip_distance: float
    displacement_events: int
    final_capacity: float = 0.0
    final_weight: float = 0.0


def classify(displacement_events: int, slip_exhausted: bool) -> OutcomeKind:
    if slip_exhausted:
        return OutcomeKind.FAILURE
    if displacement_events > 0:
        return OutcomeKind.DISPLACEMENT
    return OutcomeKind.SUCCESS


def step5(x: float) -> float:
    x3 = x * x * x
    return x3 * (10.0 + x * (6.0 * x - 15.0))


def stribeck_mu(static: float, kinetic: float, slip: float, stick_range: float) -> float:
    """Friction coefficient after ``slip`` metres of sliding: static inside the stick range,
    blending smoothly to kinetic over the next two stick ranges."""
    if slip <= stick_range:
        return static
    if stick_range <= 0.0:
        return kinetic
    x = slip / stick_range
    if x >= 3.0:
        return kinetic
    return static - (static - kinetic) * step5((x - 1.0) / 2.0)


@dataclass(frozen=True)
class LoadStep:
    mass: float
    capacity: float
    slip: float
    episode_slip: float
    shift: float = 0.0


def apply_load_protocol(capacity_fn: Callable[[float, float], float], empty_mass: float, protocol: LoadProtocol,
                        on_step: Callable[[LoadStep], None] | None = None,
                        shear_stiffness_fn: Callable[[float], float] | None = None) -> Outcome:
    """Add weight step by step; whenever capacity falls short the object slips until it holds again.

    ``capacity_fn(total_slip, episode_slip)`` returns the friction budget in N and
    ``shear_stiffness_fn(total_slip)`` the stiffness (N/m) of the stuck contacts
    against vertical load. A step counts as a displacement when the object
    slipped and re-settled, or when it sank by ``protocol.visible_shift``
    since the last displacement.
    """
    slip = 0.0
    events = 0
    held = 0.0
    added = 0.0
    capacity = capacity_fn(0.0, 0.0)
    weight = 0.0
    settled_at = 0.0
    for extra in protocol.added_masses():
        mass = empty_mass + extra
        weight = mass * GRAVITY
        episode = 0.0
        capacity = capacity_fn(slip, episode)
        while capacity < weight:
            slip += protocol.slip_step
            episode += protocol.slip_step
            if slip > protocol.max_slip + 1e-12:
                logger.info(f"load test: lost at {mass:.3f} kg after {slip * 1000:.0f} mm of slip")
                return Outcome(classify(events, True), held, added, slip, events, capacity, weight)
            capacity = capacity_fn(slip, episode)
        stiffness = math.inf if shear_stiffness_fn is None else shear_stiffness_fn(slip)
        shift = weight / stiffness if stiffness > 0.0 else 0.0
        if on_step is not None:
            on_step(LoadStep(mass, capacity, slip, episode, shift))
        if episode > 0.0:
            events += 1
            settled_at = slip + shift
            logger.info(f"load test: slipped {episode * 1000:.0f} mm at {mass:.3f} kg and re-settled")
        elif slip + shift - settled_at >= protocol.visible_shift - 1e-12:
            events += 1
            settled_at = slip + shift
            logger.info(f"load test: sank {shift * 1000:.1f} mm into the contacts at {mass:.3f} kg and re-settled")
        held, added = mass, extra
    return Outcome(classify(events, False), held, added, slip, events, capacity, weight)


def stick_range(contact, protocol: LoadProtocol, mode: ContactMode) -> float:
    if contact.on_chest:
        return protocol.chest_stick_range
    if mode is ContactMode.SOFT:
        return protocol.soft_stick_range
    return protocol.hard_stick_range


def effective_mu(contact, episode_slip: float, protocol: LoadProtocol, mode: ContactMode) -> float:
    stick = stick_range(contact, protocol, mode)
    return stribeck_mu(contact.mu, contact.mu * protocol.kinetic_ratio, episode_slip, stick)


def shear_stiffness(contacts: ContactSet, protocol: LoadProtocol, mode: ContactMode) -> float:
    """Vertical stiffness of the stuck contacts: each reaches its full static
    friction after deflecting by its stick range. A loaded rigid contact makes
    the grasp infinitely stiff."""
    total = 0.0
    for c in contacts:
        if c.normal_force <= 0.0:
            continue
        stick = stick_range(c, protocol, mode)
        if stick <= 0.0:
            return math.inf
        total += c.mu * c.normal_force / stick
    return total if total > 0.0 else math.inf


def load_test(scene: Scene, settlement: Settlement, empty_mass: float, protocol: LoadProtocol,
              cfg: SimConfig) -> tuple[Outcome, list[LoadStep]]:
    """Lower the table, then run the weight protocol on the grasped object.

    Each millimetre of slip enlarges the object's cross-section by its taper
    and re-settles it in the plane before the friction budget is recomputed.
    Contacts in fewer than ``protocol.min_support_regions`` independent
    regions lie on one line through the object, which tips about it: such a
    grasp has no vertical capacity.
    """
    if settlement.manipuland is None:
        raise ConfigurationError("load test needs a grasped object")
    base = settlement.manipuland
    cache: dict[int, ContactSet | None] = {}
    last = {"pose": base}

    def contacts_at(slip: float) -> ContactSet | None:
        key = int(round(slip / protocol.slip_step))
        if key not in cache:
            grown = base.grown(base.taper * slip).with_pose(last["pose"].position, last["pose"].angle)
            try:
                result = settle_object(scene, grown, cfg)
            except OverCompressionError:
                logger.debug(f"object jammed after {slip * 1000:.0f} mm of slip")
                cache[key] = None
            else:
                last["pose"] = result.manipuland
                cache[key] = result.contacts
        return cache[key]

    def capacity(slip: float, episode: float) -> float:
        contacts = contacts_at(slip)
        if contacts is None:
            return math.inf
        if contacts.independent_regions(loaded_only=True) < protocol.min_support_regions:
            return 0.0
        mus = [effective_mu(c, episode, protocol, scene.mode) for c in contacts]
        return vertical_load_capacity(contacts, mus)

    def stiffness(slip: float) -> float:
        contacts = contacts_at(slip)
        if contacts is None:
            return math.inf
        return shear_stiffness(contacts, protocol, scene.mode)

    steps: list[LoadStep] = []
    outcome = apply_load_protocol(capacity, empty_mass, protocol, on_step=steps.append,
                                  shear_stiffness_fn=stiffness)
    logger.info(f"load test outcome {outcome.kind.value}: held {outcome.max_weight_held:.3f} kg")
    return outcome, steps
