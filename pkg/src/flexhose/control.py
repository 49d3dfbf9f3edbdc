"""Finite-horizon LQR on the variation-linearized dynamics, plus the
quadrotor-position feed-forward baseline used for comparisons.

The Riccati equation -Pdot = Q1 - P B Q2^-1 B^T P + A^T P + P A is integrated
backward from P(T) = P_T with classical fourth-order steps on the controller
grid (matrices linearly interpolated between samples, symmetric projection
each step). Gains K(t) = Q2^-1 B(t)^T P(t) are tabulated once and interpolated
online; queries outside the horizon clamp to the boundary gain.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import RiccatiBlowupError, ValidationError
from .flatness import DesiredPoint
from .geometry import E3, cross_rows, hat
from .linearization import ErrorState, LinearizedSystem, error_dim
from .model import ControlInput, SystemParams, SystemState, node_positions, node_velocities

log = logging.getLogger(__name__)

_E1 = np.array([1.0, 0.0, 0.0])


@dataclass(frozen=True)
class LqrWeights:
    """Quadratic cost data: state weight Q1, input weight Q2, terminal P_T."""

    Q1: np.ndarray
    Q2: np.ndarray
    P_T: np.ndarray
    horizon: float

    def __post_init__(self):
        for name in ("Q1", "Q2", "P_T"):
            M = np.asarray(getattr(self, name), float)
            object.__setattr__(self, name, M)
            if np.linalg.norm(M - M.T) > 1e-12:
                raise ValidationError(f"{name} must be symmetric")
        if np.any(np.linalg.eigvalsh(self.Q2) <= 0.0):
            raise ValidationError("Q2 must be positive definite")
        if self.horizon <= 0.0:
            raise ValidationError("horizon must be positive")


def weights_from_config(
    params: SystemParams,
    q_x: float,
    q_q: float,
    q_R: float,
    q_Omega: float,
    r: float,
    p_T: float,
    horizon: float,
) -> LqrWeights:
    """Block-diagonal weights from per-block scalars.

    q_x weights the position and velocity errors, q_q the link attitude and
    rate errors, q_R the quadrotor attitude errors, q_Omega their rates.
    """
    n, nq = params.n, params.n_quad
    diag = np.concatenate(
        [
            np.full(3, q_x),
            np.full(3 * n, q_q),
            np.full(3, q_x),
            np.full(3 * n, q_q),
            np.full(3 * nq, q_R),
            np.full(3 * nq, q_Omega),
        ]
    )
    nx = error_dim(params)
    return LqrWeights(
        Q1=np.diag(diag),
        Q2=r * np.eye(4 * nq),
        P_T=p_T * np.eye(nx),
        horizon=horizon,
    )


@dataclass(frozen=True)
class GainSchedule:
    """Tabulated Riccati solutions P(t) and feedback gains K(t)."""

    t: np.ndarray
    P: np.ndarray
    K: np.ndarray

    def k_at(self, t: float) -> np.ndarray:
        ts = self.t
        if t < ts[0] - 1e-12 or t > ts[-1] + 1e-12:
            log.warning("gain lookup at t=%.6g outside [%g, %g]; clamping", t, ts[0], ts[-1])
        if t <= ts[0]:
            return self.K[0]
        if t >= ts[-1]:
            return self.K[-1]
        k = int(np.searchsorted(ts, t) - 1)
        lam = (t - ts[k]) / (ts[k + 1] - ts[k])
        return (1.0 - lam) * self.K[k] + lam * self.K[k + 1]

    def save(self, path) -> None:
        np.savez(path, t=self.t, P=self.P, K=self.K)

    @classmethod
    def load(cls, path) -> "GainSchedule":
        with np.load(path) as data:
            return cls(t=data["t"].copy(), P=data["P"].copy(), K=data["K"].copy())


def riccati_backward(
    linsys: LinearizedSystem, weights: LqrWeights, grid_dt: float = 1e-2
) -> GainSchedule:
    """Backward Riccati sweep over [0, horizon] on a uniform grid."""
    T = weights.horizon
    if linsys.t[0] > 1e-12 or linsys.t[-1] < T - 1e-9:
        raise ValidationError("linearized system does not cover the horizon")
    steps = int(round(T / grid_dt))
    if abs(steps * grid_dt - T) > 1e-9 * max(1.0, T):
        raise ValidationError("horizon must be a whole number of grid steps")
    ts = np.linspace(0.0, T, steps + 1)
    Q1 = weights.Q1
    Q2_inv = np.linalg.inv(weights.Q2)

    def pdot(t: float, P: np.ndarray) -> np.ndarray:
        A = linsys.a_at(t)
        B = linsys.b_at(t)
        return -(Q1 - P @ B @ Q2_inv @ B.T @ P + A.T @ P + P @ A)

    P = weights.P_T.copy()
    P_table = np.empty((steps + 1,) + P.shape)
    P_table[-1] = P
    h = grid_dt
    for k in range(steps, 0, -1):
        t = ts[k]
        k1 = pdot(t, P)
        k2 = pdot(t - h / 2, P - h / 2 * k1)
        k3 = pdot(t - h / 2, P - h / 2 * k2)
        k4 = pdot(t - h, P - h * k3)
        P = P - h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        P = 0.5 * (P + P.T)
        if not np.isfinite(P).all() or np.abs(P).max() > 1e12:
            raise RiccatiBlowupError(
                f"Riccati solution escaped at t = {ts[k - 1]:.6g}", time=float(ts[k - 1])
            )
        P_table[k - 1] = P
    K_table = np.stack([Q2_inv @ linsys.b_at(t).T @ Pk for t, Pk in zip(ts, P_table)])
    return GainSchedule(t=ts, P=P_table, K=K_table)


def lqr_feedback(schedule: GainSchedule, t: float, err: ErrorState) -> np.ndarray:
    """Input correction du = -K(t) dx, stacked thrusts then moments."""
    return -schedule.k_at(t) @ err.vector


def apply_feedback(desired: DesiredPoint, du: np.ndarray, params: SystemParams) -> ControlInput:
    """Net input u = u_d + du distributed to the quadrotors."""
    nq = params.n_quad
    return ControlInput(
        f=desired.input.f + du[:nq],
        M=desired.input.M + du[nq:].reshape(nq, 3),
    )


@dataclass(frozen=True)
class FeedforwardGains:
    """PD gains for the baseline quadrotor position/attitude loops."""

    kp: float = 16.0
    kd: float = 8.0  # critical damping for the position double integrator
    kR: float = 100.0
    kOmega: float = 20.0


def feedforward_baseline(
    params: SystemParams, equilibrium: DesiredPoint, gains: FeedforwardGains = FeedforwardGains()
):
    """Per-quadrotor PD position hold with the steady cable force fed forward.

    Each quadrotor regulates its own position toward the equilibrium node and
    carries the constant thrust vector that balanced it there; hose swings are
    deliberately not fed back (that is the point of the comparison).
    """
    eq_pos = node_positions(params, equilibrium.state)
    feedforward = [
        equilibrium.input.f[slot] * equilibrium.state.R[slot] @ E3
        for slot in range(params.n_quad)
    ]

    def controller(t: float, state: SystemState) -> ControlInput:
        pos = node_positions(params, state)
        vel = node_velocities(params, state)
        f = np.empty(params.n_quad)
        M = np.empty((params.n_quad, 3))
        for slot, k in enumerate(params.attach):
            m_q = params.quad_mass[slot]
            e_p = pos[k] - eq_pos[k]
            e_v = vel[k]
            force = feedforward[slot] - m_q * (gains.kp * e_p + gains.kd * e_v)
            R = state.R[slot]
            f[slot] = force @ R[:, 2]
            # attitude setpoint: body z along the commanded force, yaw 0
            b3 = force / max(math.sqrt(force @ force), 1e-9)
            lateral = cross_rows(b3, _E1)
            b2 = lateral / max(math.sqrt(lateral @ lateral), 1e-9)
            R_des = np.stack([cross_rows(b2, b3), b2, b3], axis=1)
            A = R_des.T @ R
            e_R = 0.5 * np.array([A[2, 1] - A[1, 2], A[0, 2] - A[2, 0], A[1, 0] - A[0, 1]])
            Om = state.Omega[slot]
            J = params.quad_inertia[slot]
            M[slot] = -J @ (gains.kR * e_R + gains.kOmega * Om) + cross_rows(Om, J @ Om)
        return ControlInput(f=f, M=M)

    return controller
