"""Primitives on the unit sphere S2 and the rotation group SO(3).

Link attitudes live on S2 (unit vectors), quadrotor attitudes on SO(3)
(orthonormal, det +1). Everything here is a pure function of its inputs.
Tolerances: manifold invariants are checked at 1e-9 absolute; constructors
silently repair defects below 1e-6 and reject anything larger.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

TOLERANCE = 1e-9
REPAIR_LIMIT = 1e-6

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])


def hat(v: np.ndarray) -> np.ndarray:
    """Skew matrix of ``v`` such that ``hat(v) @ w == np.cross(v, w)``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(S: np.ndarray) -> np.ndarray:
    """Inverse of :func:`hat`. Rejects matrices that are not antisymmetric."""
    defect = np.linalg.norm(S + S.T)
    if defect > TOLERANCE:
        raise ValidationError(f"vee: input not antisymmetric (defect {defect:.3e})")
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def hat_rows(V: np.ndarray) -> np.ndarray:
    """Stack of skew matrices, one per row of ``V`` (shape (m, 3) -> (m, 3, 3))."""
    m = V.shape[0]
    H = np.zeros((m, 3, 3))
    H[:, 0, 1] = -V[:, 2]
    H[:, 0, 2] = V[:, 1]
    H[:, 1, 0] = V[:, 2]
    H[:, 1, 2] = -V[:, 0]
    H[:, 2, 0] = -V[:, 1]
    H[:, 2, 1] = V[:, 0]
    return H


def cross_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise cross product without np.cross's axis-juggling overhead."""
    out = np.empty_like(a)
    out[..., 0] = a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1]
    out[..., 1] = a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2]
    out[..., 2] = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    return out


def polar_repair(R: np.ndarray, tol: float = 1e-12, max_iter: int = 6) -> np.ndarray:
    """Newton iteration toward the polar factor for a near-rotation matrix.

    Quadratically convergent for small orthonormality defects; integrator
    projection uses this instead of an SVD per step.
    """
    for _ in range(max_iter):
        E = R.T @ R - np.eye(3)
        if np.abs(E).max() < tol:
            return R
        R = R @ (np.eye(3) - 0.5 * E)
    return R


def project_s2(v: np.ndarray) -> np.ndarray:
    """Nearest unit vector, ``v / ||v||``."""
    nrm = np.linalg.norm(v)
    if nrm <= 1e-12:
        raise ValidationError("project_s2: cannot normalize a (near) zero vector")
    return v / nrm


def project_so3(M: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix (polar factor via SVD, det forced positive)."""
    U, s, Vt = np.linalg.svd(M)
    if s[-1] <= 1e-12:
        raise ValidationError("project_so3: input matrix is (near) singular")
    R = U @ Vt
    if np.linalg.det(R) < 0.0:
        R = U @ np.diag([1.0, 1.0, -1.0]) @ Vt
    return R


def as_unit_vector(v: np.ndarray) -> np.ndarray:
    """Validating S2 constructor: renormalizes small defects, rejects large ones."""
    v = np.asarray(v, dtype=float)
    defect = abs(np.linalg.norm(v) - 1.0)
    if defect > REPAIR_LIMIT:
        raise ValidationError(f"unit vector defect {defect:.3e} exceeds {REPAIR_LIMIT:g}")
    return project_s2(v)


def as_rotation_matrix(M: np.ndarray) -> np.ndarray:
    """Validating SO(3) constructor with the same repair/reject policy."""
    M = np.asarray(M, dtype=float)
    defect = np.linalg.norm(M.T @ M - np.eye(3))
    if defect > REPAIR_LIMIT or np.linalg.det(M) <= 0.0:
        raise ValidationError(
            f"rotation matrix defect {defect:.3e} (det {np.linalg.det(M):.3e})"
        )
    return project_so3(M)


def so3_exp(w: np.ndarray) -> np.ndarray:
    """Rotation matrix ``exp(hat(w))`` (Rodrigues, series-safe near zero)."""
    theta = np.linalg.norm(w)
    W = hat(w)
    if theta < 1e-10:
        return np.eye(3) + W + 0.5 * (W @ W)
    a = np.sin(theta) / theta
    b = (1.0 - np.cos(theta)) / theta**2
    return np.eye(3) + a * W + b * (W @ W)


def s2_config_error(q_d: np.ndarray, q: np.ndarray) -> float:
    """Configuration error on S2, ``1 - q_d . q`` in [0, 2]."""
    return float(1.0 - q_d @ q)


def so3_config_error(R_d: np.ndarray, R: np.ndarray) -> float:
    """Configuration error on SO(3), ``0.5 tr(I - R_d^T R)`` in [0, 2]."""
    return float(0.5 * np.trace(np.eye(3) - R_d.T @ R))


def s2_error_vector(q_d: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Attitude error ``xi = q_d x q``; always perpendicular to ``q_d``."""
    return np.cross(q_d, q)


def so3_error_vector(R_d: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Attitude error ``eta = 0.5 (R_d^T R - R^T R_d)^vee``."""
    A = R_d.T @ R
    S = 0.5 * (A - A.T)
    return np.array([S[2, 1], S[0, 2], S[1, 0]])
