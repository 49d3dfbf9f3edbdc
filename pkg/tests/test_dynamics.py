import numpy as np
import pytest

from flexhose.dynamics import (
    accelerations,
    assemble,
    energy,
    link_tensions,
    mass_entries,
    rhs,
    tethered_rhs,
)
from flexhose.errors import NumericalError, ValidationError
from flexhose.geometry import E3
from flexhose.model import ControlInput, SystemState, uniform_params
from flexhose.sim import step
from oracles import kkt_chain_accelerations, random_input, random_valid_state

RNG = np.random.default_rng(2024)
INERTIA = (0.0557, 0.0557, 0.1050)


def hang_state(params, q_dir=(0.0, 0.0, -1.0)):
    n, nq = params.n, params.n_quad
    return SystemState(
        x0=np.zeros(3), v0=np.zeros(3),
        q=np.tile(np.asarray(q_dir, float), (n, 1)), omega=np.zeros((n, 3)),
        R=np.tile(np.eye(3), (nq, 1, 1)), Omega=np.zeros((nq, 3)),
    )


class TestMassEntries:
    def test_unit_chain_table(self):
        p = uniform_params(2, 1.0, 1.0, attach=(2,), quad_mass=0.0, quad_inertia_diag=INERTIA)
        M = mass_entries(p)
        assert M[0, 0] == pytest.approx(3.0)
        assert M[0, 1] == pytest.approx(2.0)
        assert M[0, 2] == pytest.approx(1.0)
        assert M[1, 1] == pytest.approx(2.0)
        assert M[1, 2] == pytest.approx(1.0)
        assert M[2, 2] == pytest.approx(1.0)

    def test_two_quad_total_mass(self, params_two_quad_10):
        # 11 joints at 0.0909 kg plus two 0.85 kg quadrotors
        assert mass_entries(params_two_quad_10)[0, 0] == pytest.approx(2.6999)

    def test_single_link_entries(self):
        p = uniform_params(1, 0.7, 0.3, attach=(1,), quad_mass=0.2, quad_inertia_diag=INERTIA)
        M = mass_entries(p)
        assert M[0, 0] == pytest.approx(0.3 + 0.5)
        assert M[0, 1] == pytest.approx(0.7 * 0.5)
        assert M[1, 1] == pytest.approx(0.7**2 * 0.5)

    def test_symmetric_positive_definite_random_draws(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            n = int(rng.integers(1, 8))
            attach = (0, n) if n > 1 else (n,)
            p = uniform_params(
                n, float(rng.uniform(0.05, 2.0)), float(rng.uniform(0.01, 2.0)),
                attach=attach, quad_mass=float(rng.uniform(0.0, 2.0)),
                quad_inertia_diag=INERTIA,
            )
            M = mass_entries(p)
            assert np.allclose(M, M.T)
            assert np.linalg.eigvalsh(M).min() > 0.0


class TestOracleEquivalence:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_accelerations_match_lagrange_multiplier_chain(self, n):
        attach = (0, n) if n > 1 else (n,)
        p = uniform_params(n, 0.4, 0.3, attach=attach, quad_mass=0.85, quad_inertia_diag=INERTIA)
        for _ in range(12):
            st = random_valid_state(p, RNG, speed=2.0).validated(p)
            u = random_input(p, RNG)
            acc = accelerations(p, st, u)
            dv0, domega = kkt_chain_accelerations(p, st, u)
            assert np.abs(acc.dv0 - dv0).max() < 1e-8
            assert np.abs(acc.domega - domega).max() < 1e-8

    def test_tangency_defect_small_before_projection(self):
        p = uniform_params(3, 0.4, 0.3, attach=(0, 3), quad_mass=0.85, quad_inertia_diag=INERTIA)
        for _ in range(10):
            st = random_valid_state(p, RNG, speed=2.0).validated(p)
            acc = accelerations(p, st, random_input(p, RNG))
            assert acc.tangency_defect < 1e-8


class TestFreeFallAndGyro:
    def test_zero_input_gives_uniform_gravity(self):
        p = uniform_params(4, 0.3, 0.2, attach=(0, 4), quad_mass=0.85, quad_inertia_diag=INERTIA)
        st = random_valid_state(p, RNG, speed=0.0).validated(p)
        acc = accelerations(p, st, ControlInput.zero(p))
        assert np.allclose(acc.dv0, [0.0, 0.0, -p.gravity], atol=1e-12)
        assert np.abs(acc.domega).max() < 1e-11

    def test_attitude_dynamics_zero_and_principal_axis(self):
        p = uniform_params(1, 0.3, 0.2, attach=(1,), quad_mass=0.85, quad_inertia_diag=INERTIA)
        st = hang_state(p)
        acc = accelerations(p, st, ControlInput.zero(p))
        assert np.allclose(acc.dOmega, 0.0)
        # spin about a principal axis: gyroscopic term vanishes
        st2 = SystemState(st.x0, st.v0, st.q, st.omega, st.R, np.array([[0.0, 0.0, 4.0]]))
        M = np.array([[0.3, -0.1, 0.2]])
        acc2 = accelerations(p, st2, ControlInput(f=np.zeros(1), M=M))
        assert np.allclose(acc2.dOmega[0], M[0] / np.array(INERTIA), atol=1e-12)

    def test_assemble_hanging_rest_free_fall(self):
        p = uniform_params(1, 0.5, 0.2, attach=(1,), quad_mass=0.0, quad_inertia_diag=INERTIA)
        st = hang_state(p)
        big, vec = assemble(p, st, ControlInput.zero(p))
        sol = np.linalg.solve(big, vec)
        assert np.allclose(sol[:3], [0, 0, -p.gravity])
        assert np.allclose(sol[3:], 0.0, atol=1e-12)


class TestRhs:
    def test_equilibrium_derivative_is_zero(self, params_two_quad_10):
        from flexhose.flatness import solve_static_shape

        _, eq = solve_static_shape(params_two_quad_10, np.zeros(3), {10: np.array([0.6, 0, 0])})
        d = rhs(params_two_quad_10, eq.state, eq.input)
        assert np.abs(d.dv0).max() < 1e-9
        assert np.abs(d.domega).max() < 1e-9
        assert np.abs(d.dq).max() < 1e-12
        assert np.abs(d.dOmega).max() < 1e-9

    def test_flatness_reference_matches_rhs(self, params_track, flat_track):
        from flexhose.flatness import expand

        for t in (0.0, 0.9, 3.3):
            dp = expand(flat_track, params_track, t)
            d = rhs(params_track, dp.state, dp.input)
            assert np.abs(d.dv0 - dp.accel.dv0).max() < 1e-6
            assert np.abs(d.domega - dp.accel.domega).max() < 1e-6
            assert np.abs(d.dOmega - dp.accel.dOmega).max() < 1e-6


class TestTethered:
    def test_requires_pinned_origin(self):
        p = uniform_params(2, 0.4, 0.2, attach=(2,), quad_mass=0.85, quad_inertia_diag=INERTIA)
        st = random_valid_state(p, RNG).validated(p)
        with pytest.raises(ValidationError):
            tethered_rhs(p, st, ControlInput.zero(p))

    def test_matches_free_system_when_v0dot_vanishes(self):
        # at a hover equilibrium the free-flying dv0 is zero, so pinning the
        # start must reproduce the same link/quadrotor accelerations
        p = uniform_params(3, 0.4, 0.2, attach=(3,), quad_mass=0.85, quad_inertia_diag=INERTIA)
        from flexhose.flatness import FlatOutputs, expand
        from flexhose.jets import ConstantChannel

        flat = FlatOutputs(
            x0=(ConstantChannel(0.0),) * 3,
            psi={3: ConstantChannel(0.0)},
            tension={},
        )
        eq = expand(flat, p, 0.0)
        free = rhs(p, eq.state, eq.input)
        assert np.abs(free.dv0).max() < 1e-10
        pinned = tethered_rhs(p, eq.state, eq.input)
        assert np.abs(pinned.domega - free.domega).max() < 1e-9
        assert np.abs(pinned.dOmega - free.dOmega).max() < 1e-12

    def test_single_link_tension_balance_is_static(self):
        p = uniform_params(1, 0.5, 0.2, attach=(1,), quad_mass=0.85, quad_inertia_diag=INERTIA)
        st = SystemState(
            x0=np.zeros(3), v0=np.zeros(3), q=np.array([[0.0, 0, 1.0]]),
            omega=np.zeros((1, 3)), R=np.eye(3)[None], Omega=np.zeros((1, 3)),
        )
        mbar1 = 0.2 + 0.85
        u = ControlInput(f=np.array([mbar1 * p.gravity]), M=np.zeros((1, 3)))
        d = tethered_rhs(p, st, u)
        assert np.abs(d.domega).max() < 1e-12

    def test_pendulum_against_explicit_integration(self):
        # one heavy joint swinging about the pinned origin, no quadrotor force:
        # must match the textbook spherical pendulum (domega = -(g/l) q x e3)
        p = uniform_params(1, 0.5, 0.3, attach=(1,), quad_mass=0.0, quad_inertia_diag=INERTIA)
        theta = 0.4
        q0 = np.array([np.sin(theta), 0.0, -np.cos(theta)])
        st = SystemState(
            x0=np.zeros(3), v0=np.zeros(3), q=q0[None], omega=np.zeros((1, 3)),
            R=np.eye(3)[None], Omega=np.zeros((1, 3)),
        )
        u = ControlInput.zero(p)
        dt = 1e-3
        q_ref = q0.copy()
        w_ref = np.zeros(3)
        state = st
        for _ in range(2000):
            state = step(p, state, u, dt, tethered=True)

            def pend(qw):
                q, w = qw
                return np.cross(w, q), -(p.gravity / 0.5) * np.cross(q, E3)

            k1 = pend((q_ref, w_ref))
            k2 = pend((q_ref + dt / 2 * k1[0], w_ref + dt / 2 * k1[1]))
            k3 = pend((q_ref + dt / 2 * k2[0], w_ref + dt / 2 * k2[1]))
            k4 = pend((q_ref + dt * k3[0], w_ref + dt * k3[1]))
            q_ref = q_ref + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            w_ref = w_ref + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            q_ref /= np.linalg.norm(q_ref)
        assert np.abs(state.q[0] - q_ref).max() < 1e-7

    def test_small_angle_frequency_reduces_to_point_pendulum(self):
        p = uniform_params(1, 0.5, 0.3, attach=(1,), quad_mass=0.0, quad_inertia_diag=INERTIA)
        eps = 1e-4
        q0 = np.array([np.sin(eps), 0.0, -np.cos(eps)])
        st = SystemState(np.zeros(3), np.zeros(3), q0[None], np.zeros((1, 3)),
                         np.eye(3)[None], np.zeros((1, 3)))
        d = tethered_rhs(p, st, ControlInput.zero(p))
        # |domega| ~ (g/l) sin(eps): angular frequency^2 = g/l
        assert np.linalg.norm(d.domega[0]) / eps == pytest.approx(p.gravity / 0.5, rel=1e-4)


class TestEnergy:
    def test_static_mass_at_height(self):
        p = uniform_params(1, 0.5, 0.2, attach=(1,), quad_mass=0.3, quad_inertia_diag=INERTIA)
        st = SystemState(np.array([0.0, 0, 2.0]), np.zeros(3), np.array([[0.0, 0, -1.0]]),
                         np.zeros((1, 3)), np.eye(3)[None], np.zeros((1, 3)))
        e = energy(p, st)
        assert e.kinetic == pytest.approx(0.0)
        # joint 0 (0.2 kg) at z=2, joint 1 (0.5 kg net) at z=1.5
        assert e.potential == pytest.approx(9.81 * (0.2 * 2.0 + 0.5 * 1.5))
        assert e.lagrangian == pytest.approx(-e.potential)

    def test_rigid_translation_kinetic(self):
        p = uniform_params(3, 0.4, 0.2, attach=(0, 3), quad_mass=0.85, quad_inertia_diag=INERTIA)
        u_vec = np.array([0.7, -0.2, 0.4])
        st = SystemState(np.zeros(3), u_vec, np.tile([1.0, 0, 0], (3, 1)), np.zeros((3, 3)),
                         np.tile(np.eye(3), (2, 1, 1)), np.zeros((2, 3)))
        e = energy(p, st)
        assert e.kinetic == pytest.approx(0.5 * mass_entries(p)[0, 0] * u_vec @ u_vec)

    def test_conservative_rollout_short(self):
        p = uniform_params(2, 0.4, 0.2, attach=(2,), quad_mass=0.85, quad_inertia_diag=INERTIA)
        st = random_valid_state(p, RNG, speed=1.0).validated(p)
        e0 = energy(p, st).total
        for _ in range(3000):
            st = step(p, st, ControlInput.zero(p), 1e-4)
        drift = abs(energy(p, st).total - e0) / abs(e0)
        assert drift < 1e-8


class TestLinkTensions:
    def test_static_vertical_chain(self):
        # three 0.1 kg joints held from above: T1 = 0.981 N, T2 = 1.962 N
        p = uniform_params(2, 0.4, 0.1, attach=(2,), quad_mass=0.0, quad_inertia_diag=INERTIA)
        st = hang_state(p, q_dir=(0.0, 0.0, 1.0))
        f_hold = 3 * 0.1 * 9.81
        u = ControlInput(f=np.array([f_hold]), M=np.zeros((1, 3)))
        acc = accelerations(p, st, u)
        assert np.abs(acc.dv0).max() < 1e-12
        T = link_tensions(p, st, acc, u)
        assert np.allclose(T[0], [0, 0, 0.981], atol=1e-12)
        assert np.allclose(T[1], [0, 0, 1.962], atol=1e-12)
        assert f_hold == pytest.approx(2.943)

    def test_free_fall_tensions_vanish(self):
        p = uniform_params(3, 0.4, 0.2, attach=(0, 3), quad_mass=0.85, quad_inertia_diag=INERTIA)
        st = random_valid_state(p, RNG, speed=0.0).validated(p)
        u = ControlInput.zero(p)
        T = link_tensions(p, st, accelerations(p, st, u), u)
        assert np.abs(T).max() < 1e-10

    def test_flatness_tension_roundtrip(self, params_track, flat_track):
        from flexhose.flatness import expand
        from flexhose.jets import sample_primitive

        for t in (0.0, 1.7):
            dp = expand(flat_track, params_track, t)
            acc = accelerations(params_track, dp.state, dp.input)
            T = link_tensions(params_track, dp.state, acc, dp.input)
            flat_T1 = sample_primitive(flat_track.tension[0], t, 0).value
            assert np.abs(T[0] - flat_T1).max() < 1e-6

    def test_inconsistent_accelerations_rejected(self):
        p = uniform_params(2, 0.4, 0.2, attach=(2,), quad_mass=0.85, quad_inertia_diag=INERTIA)
        st = random_valid_state(p, RNG).validated(p)
        u = random_input(p, RNG)
        acc = accelerations(p, st, u)
        bad = type(acc)(acc.dv0 + np.array([0.5, 0, 0]), acc.domega, acc.dOmega)
        with pytest.raises(NumericalError):
            link_tensions(p, st, bad, u)
