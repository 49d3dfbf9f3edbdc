import numpy as np
import pytest

from flexhose.errors import ValidationError
from flexhose.geometry import (
    E1,
    E2,
    E3,
    as_rotation_matrix,
    as_unit_vector,
    hat,
    polar_repair,
    project_s2,
    project_so3,
    s2_config_error,
    s2_error_vector,
    so3_config_error,
    so3_error_vector,
    so3_exp,
    vee,
)

RNG = np.random.default_rng(42)


def random_rotation(rng=RNG):
    w = rng.normal(size=3)
    return so3_exp(rng.uniform(0, np.pi) * w / np.linalg.norm(w))


class TestHatVee:
    def test_basis_cross(self):
        assert np.allclose(hat(E1) @ E2, E3)

    def test_self_cross_is_zero(self):
        v = np.array([0.3, -1.2, 2.0])
        assert np.allclose(hat(v) @ v, 0.0)

    def test_matches_cross_product(self):
        # [1,2,3] x [4,5,6] worked out by hand
        assert np.allclose(hat([1.0, 2.0, 3.0]) @ [4.0, 5.0, 6.0], [-3.0, 6.0, -3.0])

    def test_hat_antisymmetric(self):
        for _ in range(10):
            v = RNG.normal(size=3)
            H = hat(v)
            assert np.allclose(H + H.T, 0.0)

    def test_vee_inverts_hat(self):
        for v in ([1.0, 2.0, 3.0], [0.0, 0.0, 0.0], E3):
            assert np.allclose(vee(hat(np.asarray(v))), v)

    def test_vee_rejects_non_antisymmetric(self):
        with pytest.raises(ValidationError):
            vee(np.eye(3) * 1e-3)


class TestProjections:
    def test_project_s2_scales(self):
        assert np.allclose(project_s2(np.array([0.0, 0.0, -2.0])), [0.0, 0.0, -1.0])

    def test_project_s2_rejects_zero(self):
        with pytest.raises(ValidationError):
            project_s2(np.zeros(3))

    def test_project_so3_fixed_point(self):
        R = random_rotation()
        assert np.allclose(project_so3(R), R)

    def test_project_so3_small_perturbation(self):
        R = random_rotation()
        E = RNG.normal(size=(3, 3))
        out = project_so3(R + 1e-6 * E)
        assert np.abs(out - R).max() < 1e-5
        assert np.allclose(out.T @ out, np.eye(3), atol=1e-12)

    def test_projections_idempotent(self):
        v = RNG.normal(size=3)
        q = project_s2(v)
        assert np.allclose(project_s2(q), q)
        R = project_so3(RNG.normal(size=(3, 3)) + 3 * np.eye(3))
        assert np.allclose(project_so3(R), R, atol=1e-14)

    def test_polar_repair_matches_svd_projection(self):
        R = random_rotation()
        M = R + 1e-5 * RNG.normal(size=(3, 3))
        assert np.abs(polar_repair(M) - project_so3(M)).max() < 1e-12

    def test_constructors_repair_and_reject(self):
        q = as_unit_vector(np.array([0.0, 0.0, 1.0 + 1e-8]))
        assert abs(np.linalg.norm(q) - 1.0) <= 1e-9
        with pytest.raises(ValidationError):
            as_unit_vector(np.array([0.0, 0.0, 1.1]))
        R = random_rotation()
        assert np.allclose(as_rotation_matrix(R + 1e-8 * RNG.normal(size=(3, 3))), R, atol=1e-7)
        with pytest.raises(ValidationError):
            as_rotation_matrix(np.eye(3) * 1.1)


class TestConfigErrors:
    def test_s2_identity_orthogonal_antipodal(self):
        q = project_s2(RNG.normal(size=3))
        assert s2_config_error(q, q) == pytest.approx(0.0)
        perp = project_s2(np.cross(q, RNG.normal(size=3)))
        assert s2_config_error(q, perp) == pytest.approx(1.0)
        assert s2_config_error(q, -q) == pytest.approx(2.0)

    def test_s2_error_is_half_chord_squared(self):
        for _ in range(20):
            q1 = project_s2(RNG.normal(size=3))
            q2 = project_s2(RNG.normal(size=3))
            assert s2_config_error(q1, q2) == pytest.approx(
                0.5 * np.linalg.norm(q2 - q1) ** 2, abs=1e-12
            )

    def test_so3_identity_and_pi_rotations(self):
        R = random_rotation()
        assert so3_config_error(R, R) == pytest.approx(0.0)
        assert so3_config_error(R, R @ so3_exp(np.pi * E1)) == pytest.approx(2.0)
        # quarter turn: 0.5 tr(I - exp(pi/2 about z)) = 0.5 (3 - (0 + 0 + 1)) = 1
        assert so3_config_error(R, R @ so3_exp(np.pi / 2 * E3)) == pytest.approx(1.0)


class TestErrorVectors:
    def test_zero_at_reference(self):
        q = project_s2(RNG.normal(size=3))
        assert np.allclose(s2_error_vector(q, q), 0.0)
        R = random_rotation()
        assert np.allclose(so3_error_vector(R, R), 0.0)

    def test_basis_case(self):
        assert np.allclose(s2_error_vector(E3, E1), E2)

    def test_small_rotation_closed_form(self):
        q_d = project_s2(RNG.normal(size=3))
        axis = project_s2(np.cross(q_d, RNG.normal(size=3)))
        theta = 0.37
        q = so3_exp(theta * axis) @ q_d
        assert np.allclose(s2_error_vector(q_d, q), np.sin(theta) * axis, atol=1e-12)

    def test_xi_perpendicular_to_reference(self):
        for _ in range(10):
            q_d = project_s2(RNG.normal(size=3))
            q = project_s2(RNG.normal(size=3))
            assert abs(s2_error_vector(q_d, q) @ q_d) < 1e-14

    def test_so3_error_skew_identity(self):
        R_d = random_rotation()
        axis = project_s2(RNG.normal(size=3))
        theta = 0.6
        R = R_d @ so3_exp(theta * axis)
        assert np.allclose(so3_error_vector(R_d, R), np.sin(theta) * axis, atol=1e-12)
