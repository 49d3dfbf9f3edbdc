"""Shared fixtures. The trajectory-tracking setup and its finely sampled
linearization are expensive to build, so they are session-scoped."""

import numpy as np
import pytest

from flexhose.flatness import FlatOutputs, expand
from flexhose.jets import ConstantChannel, SinusoidChannel
from flexhose.linearization import linearize_points
from flexhose.model import uniform_params

QUAD_INERTIA = (0.0557, 0.0557, 0.1050)
QUAD_MASS = 0.85


@pytest.fixture(scope="session")
def params_two_quad_10():
    """Ten links, quadrotors at both ends (setpoint study, variant i)."""
    return uniform_params(10, 0.1, 0.0909, attach=(0, 10),
                          quad_mass=QUAD_MASS, quad_inertia_diag=QUAD_INERTIA)


@pytest.fixture(scope="session")
def params_three_quad_10():
    """Ten links, quadrotors at joints 0, 5, 10 (setpoint study, variant ii)."""
    return uniform_params(10, 0.2, 0.0909, attach=(0, 5, 10),
                          quad_mass=QUAD_MASS, quad_inertia_diag=QUAD_INERTIA)


@pytest.fixture(scope="session")
def params_track():
    """Five links between two quadrotors (trajectory-tracking study)."""
    return uniform_params(5, 0.2, 0.1667, attach=(0, 5),
                          quad_mass=QUAD_MASS, quad_inertia_diag=QUAD_INERTIA)


@pytest.fixture(scope="session")
def flat_track():
    """Multi-frequency flat outputs with a constant first-link tension."""
    return FlatOutputs(
        x0=(
            SinusoidChannel(freq=1 / 4, amp_cos=-2.0, offset=2.0),
            SinusoidChannel(freq=1 / 5, amp_sin=2.5),
            SinusoidChannel(freq=1 / 7, amp_cos=1.5),
        ),
        psi={0: ConstantChannel(0.0), 5: ConstantChannel(0.0)},
        tension={0: (ConstantChannel(2.74), ConstantChannel(0.0), ConstantChannel(-3.27))},
    )


@pytest.fixture(scope="session")
def track_linsys_fine(params_track, flat_track):
    """A/B/C sampled every 2.5 ms over 10 s; stage-aligned flows and the
    Riccati sweeps interpolate (or index) this shared table."""
    grid = np.arange(0.0, 10.0 + 1.25e-3, 2.5e-3)
    points = [expand(flat_track, params_track, float(t)) for t in grid]
    return linearize_points(points, params_track)
