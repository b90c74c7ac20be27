"""Pressure-switched whole-body grasping primitive.

The grasp runs in stages. In stage ``i`` both arms move one joint
(``joint_schedule[i]``) at ``velocity_schedule[i]``; every other joint is held.
When any relative pressure exceeds its threshold the grasp moves on to the next
stage. After the last stage the arms hold still.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import ConfigurationError
from .kinematics import PlanarArm
from .tactile import SENSORS_PER_ARM, TactileVector

logger = logging.getLogger(__name__)

# Arm joint index -> planar joint index (shoulder, elbow, wrist).
JOINT_MAP = {0: 0, 3: 1, 5: 2}


class StageBaseline(str, Enum):
    START = "start"
    STAGE = "stage"


class GraspPolicyConfig(BaseModel):
    """Thresholds and schedules of the grasping primitive."""

    model_config = ConfigDict(frozen=True)

    pressure_thresholds: tuple[float, ...] = Field(
        default=(20.0, 20.0, 20.0, 20.0), description="Per-sensor relative pressure thresholds P_G (hPa)"
    )
    joint_schedule: tuple[int, ...] = Field(default=(0, 3, 5), description="Arm joint moved in each stage")
    velocity_schedule: tuple[float, ...] = Field(
        default=(-0.5, -0.25, -0.25), description="Joint velocity commanded in each stage (rad/s)"
    )
    pregrasp_q: tuple[float, float, float] = Field(
        default=(0.2, -0.2, 0.5), description="Planar pre-grasp configuration q_d0 (rad), same for both arms"
    )
    control_rate: float = Field(default=100.0, gt=0.0, description="Command rate (Hz)")
    torque_threshold: float = Field(default=2.0, gt=0.0, description="Hard-mode trigger tau_G (N*m)")
    baseline: StageBaseline = Field(default=StageBaseline.START, description="Reference for relative pressure")
    per_arm_stages: bool = Field(default=False, description="Advance each arm on its own sensors")

    @model_validator(mode="after")
    def _check(self) -> "GraspPolicyConfig":
        if len(self.joint_schedule) != len(self.velocity_schedule):
            raise ValueError("joint_schedule and velocity_schedule must have one entry per stage")
        if not self.joint_schedule:
            raise ValueError("at least one grasp stage is required")
        unknown = [j for j in self.joint_schedule if j not in JOINT_MAP]
        if unknown:
            raise ValueError(f"joints {unknown} are not planar grasp joints {sorted(JOINT_MAP)}")
        if not self.pressure_thresholds or min(self.pressure_thresholds) <= 0.0:
            raise ValueError("pressure thresholds must be positive")
        return self

    @property
    def stage_count(self) -> int:
        return len(self.joint_schedule)

    @property
    def dt(self) -> float:
        return 1.0 / self.control_rate

    def with_uniform_threshold(self, hpa: float) -> "GraspPolicyConfig":
        return self.model_copy(update={"pressure_thresholds": (float(hpa),) * len(self.pressure_thresholds)})


@dataclass(frozen=True, eq=False)
class GraspControllerState:
    stages: tuple[int, int] = (0, 0)
    baseline_left: np.ndarray = field(default_factory=lambda: np.zeros(SENSORS_PER_ARM))
    baseline_right: np.ndarray = field(default_factory=lambda: np.zeros(SENSORS_PER_ARM))
    torque_baseline_left: np.ndarray = field(default_factory=lambda: np.zeros(3))
    torque_baseline_right: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @property
    def stage(self) -> int:
        return min(self.stages)

    def terminal(self, cfg: GraspPolicyConfig) -> bool:
        return self.stage >= cfg.stage_count


def stage_command(stage: int, cfg: GraspPolicyConfig) -> np.ndarray:
    """Planar joint velocities for one arm in ``stage``."""
    command = np.zeros(3)
    if stage < cfg.stage_count:
        command[JOINT_MAP[cfg.joint_schedule[stage]]] = cfg.velocity_schedule[stage]
    return command


def hard_mode_trigger(joint_torques, tau_G: float) -> bool:
    return bool(np.any(np.abs(np.asarray(joint_torques, dtype=float)) >= tau_G))


def torque_triggers(state: GraspControllerState, torques, cfg: GraspPolicyConfig) -> tuple[bool, bool]:
    """Hard-mode trigger per arm on the torque change since the baseline, like the pressure test."""
    tau_left, tau_right = (np.asarray(t, dtype=float) for t in torques)
    return (hard_mode_trigger(tau_left - state.torque_baseline_left, cfg.torque_threshold),
            hard_mode_trigger(tau_right - state.torque_baseline_right, cfg.torque_threshold))


def grasp_step(state: GraspControllerState, P_left, P_right, cfg: GraspPolicyConfig,
               triggers: tuple[bool, bool] | None = None,
               torques=None) -> tuple[np.ndarray, np.ndarray, GraspControllerState]:
    """One control period: commands for the current stage, then the stage transition.

    In Hard mode ``torques`` (one 3-vector per arm) replaces the pressure test
    and is re-zeroed with the pressures. ``triggers`` forces the per-arm flags.
    """
    P_left = np.asarray(P_left, dtype=float)
    P_right = np.asarray(P_right, dtype=float)
    thresholds = np.asarray(cfg.pressure_thresholds, dtype=float)
    n = cfg.stage_count

    if cfg.per_arm_stages:
        stage_l, stage_r = state.stages
    else:
        stage_l = stage_r = state.stage
    cmd_left = stage_command(stage_l, cfg)
    cmd_right = stage_command(stage_r, cfg)

    if triggers is None and torques is not None:
        triggers = torque_triggers(state, torques, cfg)
    if triggers is not None:
        crossed_l, crossed_r = bool(triggers[0]), bool(triggers[1])
    else:
        crossed_l = bool(np.any(P_left - state.baseline_left > thresholds))
        crossed_r = bool(np.any(P_right - state.baseline_right > thresholds))

    if cfg.per_arm_stages:
        advance_l = stage_l < n and crossed_l
        advance_r = stage_r < n and crossed_r
    else:
        advance_l = advance_r = stage_l < n and (crossed_l or crossed_r)

    if not (advance_l or advance_r):
        return cmd_left, cmd_right, state

    restage = cfg.baseline is StageBaseline.STAGE
    rezero_l = restage and advance_l
    rezero_r = restage and advance_r
    new_state = replace(
        state,
        stages=(stage_l + advance_l, stage_r + advance_r),
        baseline_left=P_left.copy() if rezero_l else state.baseline_left,
        baseline_right=P_right.copy() if rezero_r else state.baseline_right,
        torque_baseline_left=(np.asarray(torques[0], dtype=float).copy() if rezero_l and torques is not None
                              else state.torque_baseline_left),
        torque_baseline_right=(np.asarray(torques[1], dtype=float).copy() if rezero_r and torques is not None
                               else state.torque_baseline_right),
    )
    return cmd_left, cmd_right, new_state


def clamp_command(qdot, arm: PlanarArm, collision: bool, dt: float = 0.01) -> np.ndarray:
    """Zero the velocities that would cross a joint limit within ``dt``; zero everything on collision."""
    qdot = np.asarray(qdot, dtype=float).copy()
    if collision:
        return np.zeros_like(qdot)
    q = arm.q_array
    for k, (lo, hi) in enumerate(arm.joint_limits):
        target = q[k] + qdot[k] * dt
        if (qdot[k] < 0.0 and target < lo) or (qdot[k] > 0.0 and target > hi):
            qdot[k] = 0.0
    return qdot


class GraspController:
    """Owner of the grasp state machine for one run."""

    def __init__(self, cfg: GraspPolicyConfig):
        if len(cfg.pressure_thresholds) != SENSORS_PER_ARM:
            raise ConfigurationError(
                f"{len(cfg.pressure_thresholds)} pressure thresholds for {SENSORS_PER_ARM} sensors per arm"
            )
        self.cfg = cfg
        self.state = GraspControllerState()

    @property
    def stage(self) -> int:
        return self.state.stage

    @property
    def done(self) -> bool:
        return self.state.terminal(self.cfg)

    def start(self, reading: TactileVector, torques=None) -> None:
        """Capture the relative-pressure (and in Hard mode joint-torque) baseline at the pre-grasp pose."""
        tau_left, tau_right = (np.zeros(3), np.zeros(3)) if torques is None else torques
        self.state = GraspControllerState(
            baseline_left=np.array(reading.left, dtype=float),
            baseline_right=np.array(reading.right, dtype=float),
            torque_baseline_left=np.array(tau_left, dtype=float),
            torque_baseline_right=np.array(tau_right, dtype=float),
        )

    def torque_triggers(self, torques) -> tuple[bool, bool]:
        return torque_triggers(self.state, torques, self.cfg)

    def step(self, t: float, reading: TactileVector, torques=None) -> tuple[np.ndarray, np.ndarray]:
        before = self.state.stages
        cmd_left, cmd_right, self.state = grasp_step(self.state, reading.left, reading.right, self.cfg,
                                                     torques=torques)
        if self.state.stages != before:
            logger.info(f"t={t:.2f}s grasp stage {before} -> {self.state.stages}")
        return cmd_left, cmd_right
