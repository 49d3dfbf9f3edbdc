import numpy as np
import pytest

from flexhose.errors import ValidationError
from flexhose.model import (
    ControlInput,
    SystemParams,
    SystemState,
    dof_counts,
    net_mass,
    node_positions,
    node_velocities,
    pack_state,
    uniform_params,
    unpack_state,
)
from oracles import random_valid_state

RNG = np.random.default_rng(11)


def small_params(n=3, attach=None):
    return uniform_params(n, 0.4, 0.2, attach=attach or (n,), quad_mass=0.6,
                          quad_inertia_diag=(0.05, 0.05, 0.09))


class TestParams:
    def test_net_mass_with_and_without_quadrotor(self, params_two_quad_10):
        assert net_mass(params_two_quad_10, 0) == pytest.approx(0.0909 + 0.85)
        assert net_mass(params_two_quad_10, 1) == pytest.approx(0.0909)

    def test_net_mass_zero_quad_mass(self):
        p = uniform_params(2, 0.5, 0.3, attach=(2,), quad_mass=0.0,
                           quad_inertia_diag=(0.05, 0.05, 0.09))
        assert net_mass(p, 2) == pytest.approx(0.3)

    def test_net_mass_range_check(self, params_two_quad_10):
        with pytest.raises(ValidationError):
            net_mass(params_two_quad_10, 11)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(lengths=[0.1, -0.1], masses=[0.1] * 3),
            dict(lengths=[0.1, 0.1], masses=[0.1, 0.0, 0.1]),
            dict(lengths=[0.1, 0.1], masses=[0.1] * 3, attach=(2, 1)),
            dict(lengths=[0.1, 0.1], masses=[0.1] * 3, attach=(3,)),
        ],
    )
    def test_invalid_params_rejected(self, kwargs):
        base = dict(
            lengths=[0.1, 0.1],
            masses=[0.1] * 3,
            attach=(2,),
            quad_mass=[0.5],
            quad_inertia=np.diag([0.05, 0.05, 0.09])[None],
        )
        base.update(kwargs)
        with pytest.raises(ValidationError):
            SystemParams(**base)

    def test_inertia_must_be_spd(self):
        with pytest.raises(ValidationError):
            uniform_params(1, 0.1, 0.1, attach=(1,), quad_mass=0.5,
                           quad_inertia_diag=(0.05, -0.05, 0.09))

    def test_params_roundtrip(self, params_three_quad_10):
        d = params_three_quad_10.to_dict()
        back = SystemParams.from_dict(d)
        assert back.to_dict() == d


class TestKinematics:
    def test_single_vertical_link(self):
        p = small_params(1, attach=(1,))
        st = SystemState(
            x0=np.zeros(3), v0=np.zeros(3), q=np.array([[0.0, 0, -1.0]]),
            omega=np.zeros((1, 3)), R=np.eye(3)[None], Omega=np.zeros((1, 3)),
        )
        pos = node_positions(p, st)
        assert np.allclose(pos[1], [0, 0, -0.4])

    def test_straight_chain(self):
        p = uniform_params(10, 0.1, 0.1, attach=(10,), quad_mass=0.5,
                           quad_inertia_diag=(0.05, 0.05, 0.09))
        st = SystemState(
            x0=np.array([1.0, 2.0, 3.0]), v0=np.zeros(3),
            q=np.tile([1.0, 0, 0], (10, 1)), omega=np.zeros((10, 3)),
            R=np.eye(3)[None], Omega=np.zeros((1, 3)),
        )
        assert np.allclose(node_positions(p, st)[10], [2.0, 2.0, 3.0])

    def test_zigzag(self):
        p = uniform_params(2, 1.0, 0.1, attach=(2,), quad_mass=0.5,
                           quad_inertia_diag=(0.05, 0.05, 0.09))
        st = SystemState(
            x0=np.zeros(3), v0=np.zeros(3),
            q=np.array([[1.0, 0, 0], [0, 1.0, 0]]), omega=np.zeros((2, 3)),
            R=np.eye(3)[None], Omega=np.zeros((1, 3)),
        )
        assert np.allclose(node_positions(p, st)[2], [1.0, 1.0, 0.0])

    def test_velocities_zero_rates(self):
        p = small_params()
        st = random_valid_state(p, RNG)
        st = SystemState(st.x0, st.v0, st.q, np.zeros_like(st.omega), st.R, st.Omega)
        vel = node_velocities(p, st)
        assert np.allclose(vel, st.v0[None, :].repeat(p.n + 1, axis=0))

    def test_single_link_rotation(self):
        p = small_params(1, attach=(1,))
        st = SystemState(
            x0=np.zeros(3), v0=np.zeros(3), q=np.array([[0.0, 0, 1.0]]),
            omega=np.array([[1.0, 0, 0]]), R=np.eye(3)[None], Omega=np.zeros((1, 3)),
        )
        # v1 = l (e1 x e3) = -l e2
        assert np.allclose(node_velocities(p, st)[1], [0, -0.4, 0])

    def test_velocity_matches_central_difference(self):
        p = small_params(4, attach=(0, 4))
        st = random_valid_state(p, RNG, speed=0.5)
        h = 1e-6

        def positions_at(sign):
            q = st.q + sign * h * np.cross(st.omega, st.q)
            q /= np.linalg.norm(q, axis=1)[:, None]
            shifted = SystemState(st.x0 + sign * h * st.v0, st.v0, q, st.omega, st.R, st.Omega)
            return node_positions(p, shifted)

        fd = (positions_at(+1) - positions_at(-1)) / (2 * h)
        assert np.abs(fd - node_velocities(p, st)).max() < 1e-7


class TestDofCounts:
    def test_reported_setups(self, params_two_quad_10, params_three_quad_10):
        assert dof_counts(params_two_quad_10) == (29, 8, 21)
        assert dof_counts(params_three_quad_10) == (32, 12, 20)

    def test_single_link_single_quad(self):
        p = small_params(1, attach=(1,))
        assert dof_counts(p) == (8, 4, 4)


class TestStateValidation:
    def test_roundtrip_serialization(self):
        p = small_params(3, attach=(0, 3))
        st = random_valid_state(p, RNG)
        back = SystemState.from_dict(st.to_dict())
        for name in ("x0", "v0", "q", "omega", "R", "Omega"):
            assert np.array_equal(getattr(back, name), getattr(st, name))

    def test_pack_unpack(self):
        p = small_params(3, attach=(0, 3))
        st = random_valid_state(p, RNG)
        back = unpack_state(p, pack_state(st))
        assert np.allclose(back.R, st.R)
        assert np.allclose(back.omega, st.omega)

    def test_rejects_bad_unit_norm(self):
        p = small_params(1, attach=(1,))
        st = SystemState(np.zeros(3), np.zeros(3), np.array([[0.0, 0, 1.2]]),
                         np.zeros((1, 3)), np.eye(3)[None], np.zeros((1, 3)))
        with pytest.raises(ValidationError):
            st.validated(p)

    def test_repairs_small_tangency_defect_and_rejects_large(self):
        p = small_params(1, attach=(1,))
        q = np.array([[0.0, 0, 1.0]])
        st = SystemState(np.zeros(3), np.zeros(3), q,
                         np.array([[1.0, 0.0, 1e-9]]), np.eye(3)[None], np.zeros((1, 3)))
        fixed = st.validated(p)
        assert abs(fixed.q[0] @ fixed.omega[0]) < 1e-15
        st_bad = SystemState(np.zeros(3), np.zeros(3), q,
                             np.array([[1.0, 0.0, 1e-3]]), np.eye(3)[None], np.zeros((1, 3)))
        with pytest.raises(ValidationError):
            st_bad.validated(p)

    def test_rejects_bad_rotation(self):
        p = small_params(1, attach=(1,))
        st = SystemState(np.zeros(3), np.zeros(3), np.array([[0.0, 0, 1.0]]),
                         np.zeros((1, 3)), (1.2 * np.eye(3))[None], np.zeros((1, 3)))
        with pytest.raises(ValidationError):
            st.validated(p)


def test_control_input_zero(params_two_quad_10):
    u = ControlInput.zero(params_two_quad_10)
    assert u.f.shape == (2,) and u.M.shape == (2, 3)
    assert not u.f.any() and not u.M.any()
