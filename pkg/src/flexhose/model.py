"""System definition: parameters, state, inputs, and kinematic maps.

The hose is n massless rigid links with point masses at the n+1 joints.
Joint indices run 0..n; ``attach`` lists the joints carrying a quadrotor
(strictly increasing). Link angular velocities ``omega`` are world-frame
(q_dot = omega x q); quadrotor angular velocities ``Omega`` are body-frame
(R_dot = R hat(Omega)). Mixing those conventions up is the classic bug
here, hence the explicit field docs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .geometry import as_rotation_matrix, as_unit_vector, cross_rows, hat

OMEGA_TANGENCY_REPAIR = 1e-8


@dataclass(frozen=True, eq=False)
class SystemParams:
    """Physical parameters: link count/lengths, joint masses, quadrotors, gravity.

    lengths: (n,) link lengths [m]; masses: (n+1,) joint point masses [kg];
    attach: strictly increasing joint indices carrying quadrotors;
    quad_mass: (n_quad,) [kg]; quad_inertia: (n_quad, 3, 3) body frame [kg m^2].
    Instances compare by identity so derived tables can be memoized per object.
    """

    lengths: np.ndarray
    masses: np.ndarray
    attach: tuple[int, ...]
    quad_mass: np.ndarray
    quad_inertia: np.ndarray
    gravity: float = 9.81

    def __post_init__(self):
        object.__setattr__(self, "lengths", np.atleast_1d(np.asarray(self.lengths, float)))
        object.__setattr__(self, "masses", np.atleast_1d(np.asarray(self.masses, float)))
        object.__setattr__(self, "attach", tuple(int(k) for k in self.attach))
        object.__setattr__(self, "quad_mass", np.atleast_1d(np.asarray(self.quad_mass, float)))
        object.__setattr__(self, "quad_inertia", np.asarray(self.quad_inertia, float))
        n = self.n
        if n < 1:
            raise ValidationError("need at least one link")
        if self.masses.shape != (n + 1,):
            raise ValidationError(f"expected {n + 1} joint masses, got {self.masses.shape}")
        if np.any(self.lengths <= 0.0) or np.any(self.masses <= 0.0):
            raise ValidationError("link lengths and joint masses must be positive")
        if len(self.attach) == 0:
            raise ValidationError("at least one quadrotor attachment required")
        if list(self.attach) != sorted(set(self.attach)):
            raise ValidationError("attachment indices must be strictly increasing")
        if self.attach[0] < 0 or self.attach[-1] > n:
            raise ValidationError(f"attachment indices must lie in [0, {n}]")
        if self.quad_mass.shape != (self.n_quad,):
            raise ValidationError("one quadrotor mass per attachment required")
        if np.any(self.quad_mass < 0.0):
            raise ValidationError("quadrotor masses must be non-negative")
        if self.quad_inertia.shape != (self.n_quad, 3, 3):
            raise ValidationError("quadrotor inertia must be (n_quad, 3, 3)")
        for J in self.quad_inertia:
            if np.linalg.norm(J - J.T) > 1e-12 or np.any(np.linalg.eigvalsh(J) <= 0.0):
                raise ValidationError("quadrotor inertia must be symmetric positive definite")
        if self.gravity < 0.0:
            raise ValidationError("gravity must be non-negative")

    @property
    def n(self) -> int:
        return len(self.lengths)

    @property
    def n_quad(self) -> int:
        return len(self.attach)

    @property
    def attach_set(self) -> frozenset:
        return frozenset(self.attach)

    def quad_slot(self, k: int) -> int:
        """Position of joint index k within the attachment list."""
        return self.attach.index(k)

    def net_masses(self) -> np.ndarray:
        """(n+1,) joint masses with quadrotor masses added at attachments."""
        mbar = self.masses.copy()
        for slot, k in enumerate(self.attach):
            mbar[k] += self.quad_mass[slot]
        return mbar

    def to_dict(self) -> dict:
        return {
            "lengths": self.lengths.tolist(),
            "masses": self.masses.tolist(),
            "attach": list(self.attach),
            "quad_mass": self.quad_mass.tolist(),
            "quad_inertia": self.quad_inertia.tolist(),
            "gravity": self.gravity,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SystemParams":
        return cls(
            lengths=np.array(d["lengths"]),
            masses=np.array(d["masses"]),
            attach=tuple(d["attach"]),
            quad_mass=np.array(d["quad_mass"]),
            quad_inertia=np.array(d["quad_inertia"]),
            gravity=float(d["gravity"]),
        )


def uniform_params(
    n: int,
    link_length: float,
    node_mass: float,
    attach,
    quad_mass: float,
    quad_inertia_diag,
    gravity: float = 9.81,
) -> SystemParams:
    """Convenience constructor for uniform hoses with identical quadrotors."""
    attach = tuple(attach)
    return SystemParams(
        lengths=np.full(n, link_length),
        masses=np.full(n + 1, node_mass),
        attach=attach,
        quad_mass=np.full(len(attach), quad_mass),
        quad_inertia=np.tile(np.diag(quad_inertia_diag), (len(attach), 1, 1)),
        gravity=gravity,
    )


def net_mass(params: SystemParams, k: int) -> float:
    """Net mass at joint k: point mass plus quadrotor mass when k is attached."""
    if not 0 <= k <= params.n:
        raise ValidationError(f"joint index {k} out of range [0, {params.n}]")
    m = float(params.masses[k])
    if k in params.attach_set:
        m += float(params.quad_mass[params.quad_slot(k)])
    return m


@dataclass(frozen=True)
class SystemState:
    """Full configuration/velocity state on R^3 x (S^2)^n x SO(3)^n_quad.

    q: (n, 3) link unit vectors; omega: (n, 3) world-frame link angular
    velocities perpendicular to q; R: (n_quad, 3, 3); Omega: (n_quad, 3)
    body-frame quadrotor rates.
    """

    x0: np.ndarray
    v0: np.ndarray
    q: np.ndarray
    omega: np.ndarray
    R: np.ndarray
    Omega: np.ndarray

    def __post_init__(self):
        for name in ("x0", "v0", "q", "omega", "R", "Omega"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    def validated(self, params: SystemParams) -> "SystemState":
        """Check shapes and manifold invariants; repair tiny tangency defects.

        q norms are renormalized below a 1e-6 defect, omega components along q
        below 1e-8 are projected out, and R is re-orthonormalized; anything
        larger raises.
        """
        n, nq = params.n, params.n_quad
        if self.q.shape != (n, 3) or self.omega.shape != (n, 3):
            raise ValidationError("q and omega must have shape (n, 3)")
        if self.R.shape != (nq, 3, 3) or self.Omega.shape != (nq, 3):
            raise ValidationError("R must be (n_quad, 3, 3), Omega (n_quad, 3)")
        if not (np.isfinite(self.x0).all() and np.isfinite(self.v0).all()):
            raise ValidationError("non-finite x0/v0")
        q = np.stack([as_unit_vector(qi) for qi in self.q])
        omega = self.omega.copy()
        for i in range(n):
            defect = abs(q[i] @ omega[i])
            if defect > OMEGA_TANGENCY_REPAIR:
                raise ValidationError(
                    f"omega[{i}] has component {defect:.3e} along q[{i}] "
                    f"(limit {OMEGA_TANGENCY_REPAIR:g})"
                )
            omega[i] -= (q[i] @ omega[i]) * q[i]
        R = np.stack([as_rotation_matrix(Rj) for Rj in self.R])
        if not np.isfinite(self.Omega).all():
            raise ValidationError("non-finite Omega")
        return SystemState(self.x0, self.v0, q, omega, R, self.Omega)

    def to_dict(self) -> dict:
        return {
            "x0": self.x0.tolist(),
            "v0": self.v0.tolist(),
            "q": self.q.tolist(),
            "omega": self.omega.tolist(),
            "R": self.R.tolist(),
            "Omega": self.Omega.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SystemState":
        return cls(*(np.array(d[k]) for k in ("x0", "v0", "q", "omega", "R", "Omega")))


@dataclass(frozen=True)
class ControlInput:
    """Per-quadrotor collective thrust f [N] and body-frame moment M [N m]."""

    f: np.ndarray
    M: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "f", np.atleast_1d(np.asarray(self.f, float)))
        object.__setattr__(self, "M", np.asarray(self.M, float).reshape(-1, 3))

    @classmethod
    def zero(cls, params: SystemParams) -> "ControlInput":
        return cls(np.zeros(params.n_quad), np.zeros((params.n_quad, 3)))


def node_positions(params: SystemParams, state: SystemState) -> np.ndarray:
    """(n+1, 3) joint positions: x_i = x0 + sum_{k<=i} l_k q_k."""
    steps = params.lengths[:, None] * state.q
    out = np.empty((params.n + 1, 3))
    out[0] = state.x0
    out[1:] = state.x0 + np.cumsum(steps, axis=0)
    return out


def node_velocities(params: SystemParams, state: SystemState) -> np.ndarray:
    """(n+1, 3) joint velocities with q_dot = omega x q."""
    qdot = cross_rows(state.omega, state.q)
    steps = params.lengths[:, None] * qdot
    out = np.empty((params.n + 1, 3))
    out[0] = state.v0
    out[1:] = state.v0 + np.cumsum(steps, axis=0)
    return out


def dof_counts(params: SystemParams) -> tuple[int, int, int]:
    """(degrees of freedom, of actuation, of under-actuation)."""
    n, nq = params.n, params.n_quad
    dof = 3 * (nq + 1) + 2 * n
    doa = 4 * nq
    return dof, doa, 2 * n + 3 - nq


# ---------------------------------------------------------------------------
# Flat packing for integrators
# ---------------------------------------------------------------------------


def state_size(params: SystemParams) -> int:
    return 6 + 6 * params.n + 12 * params.n_quad


def pack_state(state: SystemState) -> np.ndarray:
    return np.concatenate(
        [
            state.x0,
            state.v0,
            state.q.ravel(),
            state.omega.ravel(),
            state.R.reshape(-1),
            state.Omega.ravel(),
        ]
    )


def unpack_state(params: SystemParams, y: np.ndarray) -> SystemState:
    n, nq = params.n, params.n_quad
    o = 6 + 3 * n
    p = o + 3 * n
    r = p + 9 * nq
    return SystemState(
        x0=y[0:3],
        v0=y[3:6],
        q=y[6:o].reshape(n, 3),
        omega=y[o:p].reshape(n, 3),
        R=y[p:r].reshape(nq, 3, 3),
        Omega=y[r:].reshape(nq, 3),
    )
