import numpy as np
import pytest

from wholebody_grasp.contact import ContactMode
from wholebody_grasp.engine import build_scene
from wholebody_grasp.kinematics import ArmParams, BodyFrame, ChestGeometry
from wholebody_grasp.tactile import ChamberSet

PREGRASP_Q = (0.2, -0.2, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def make_scene():
    """Default body at a joint vector, optionally with an object."""

    def _make(q=PREGRASP_Q, mode=ContactMode.SOFT, manipuland=None, q_right=None, chest=None):
        return build_scene(BodyFrame(), ArmParams(), chest or ChestGeometry(), ChamberSet(), mode,
                           q, q_right=q_right, manipuland=manipuland)

    return _make
