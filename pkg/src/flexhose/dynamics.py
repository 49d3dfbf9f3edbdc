"""Coordinate-free equations of motion for the quadrotor-hose chain.

The translational/link block solves a 3(n+1) linear system

    [ M00 I        -M0j qj^        ] [dv0    ]   [ sum_i M0i |w_i|^2 q_i + sum_k u_k ]
    [ Mi0 qi^   Mii I   -Mij qi^qj^] [domega_i] = [ qi^ (sum_k Mik |w_k|^2 q_k + l_i S_i) ]

with S_i the suffix sum of the net joint forces u_k = -mbar_k g e3 + f_k R_k e3
(thrust only at attachments), and the scalar mass table

    M00 = sum mbar_k,  M0i = l_i sum_{k>=i} mbar_k,  Mij = l_i l_j sum_{k>=max(i,j)} mbar_k.

All rows are written in one self-consistent sign convention (the published
block pattern carries the link rows with the opposite overall sign, which
leaves the solution unchanged); an independent Lagrange-multiplier oracle in
the test suite pins the physics. Quadrotor attitudes decouple:
J dOmega = M - Omega x J Omega.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from .errors import DynamicsSolveError, NumericalError, ValidationError
from .geometry import E3, cross_rows, hat_rows
from .model import ControlInput, SystemParams, SystemState, node_velocities

_EYE3 = np.eye(3)
_DERIVED: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _derived(params: SystemParams) -> dict:
    """Per-params memo of state-independent tables (mass table, J inverses)."""
    entry = _DERIVED.get(params)
    if entry is None:
        mbar = params.net_masses()
        tail = np.cumsum(mbar[::-1])[::-1]  # tail[i] = sum_{k>=i} mbar_k
        n = params.n
        ell = np.concatenate([[1.0], params.lengths])
        idx = np.maximum.outer(np.arange(n + 1), np.arange(n + 1))
        Mtab = np.outer(ell, ell) * tail[idx]
        entry = {
            "mbar": mbar,
            "Mtab": Mtab,
            "Jinv": np.stack([np.linalg.inv(J) for J in params.quad_inertia]),
            "grav": -params.gravity * np.outer(mbar, E3),
        }
        _DERIVED[params] = entry
    return entry


@dataclass(frozen=True)
class Accelerations:
    """Solution of the equations of motion at one instant.

    tangency_defect records max |q_i . domega_i| before the post-solve
    projection onto the tangent planes (health metric; stays near roundoff
    for constraint-satisfying states).
    """

    dv0: np.ndarray
    domega: np.ndarray
    dOmega: np.ndarray
    tangency_defect: float = 0.0


@dataclass(frozen=True)
class StateDerivative:
    dx0: np.ndarray
    dv0: np.ndarray
    dq: np.ndarray
    domega: np.ndarray
    dR: np.ndarray
    dOmega: np.ndarray
    tangency_defect: float = 0.0


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    potential: float

    @property
    def total(self) -> float:
        return self.kinetic + self.potential

    @property
    def lagrangian(self) -> float:
        return self.kinetic - self.potential


def mass_entries(params: SystemParams) -> np.ndarray:
    """(n+1, n+1) scalar mass table; symmetric positive definite."""
    return _derived(params)["Mtab"].copy()


def input_forces(params: SystemParams, state: SystemState, u: ControlInput) -> np.ndarray:
    """(n+1, 3) net joint forces: gravity everywhere, thrust at attachments."""
    forces = _derived(params)["grav"].copy()
    for slot, k in enumerate(params.attach):
        forces[k] += u.f[slot] * (state.R[slot] @ E3)
    return forces


def _assemble_core(
    params: SystemParams, q: np.ndarray, omega: np.ndarray, forces: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Blockwise build of the 3(n+1) system from raw arrays.

    ``forces`` is the (n+1, 3) table of net joint forces u_k. Blocks are
    written one at a time, directly mirroring their definitions.
    """
    n = params.n
    Mtab = _derived(params)["Mtab"]
    qh = hat_rows(q)
    suffix = np.cumsum(forces[::-1], axis=0)[::-1]  # suffix[i] = sum_{k>=i} u_k
    w2 = np.einsum("ij,ij->i", omega, omega)
    Mw2 = Mtab[:, 1:] * w2  # row k: M_{k,i} |w_i|^2

    big = np.zeros((3 * (n + 1), 3 * (n + 1)))
    rhs_vec = np.empty(3 * (n + 1))
    big[0:3, 0:3] = Mtab[0, 0] * _EYE3
    rhs_vec[0:3] = Mw2[0] @ q + suffix[0]
    for i in range(1, n + 1):
        ri = slice(3 * i, 3 * i + 3)
        qhi = qh[i - 1]
        big[0:3, ri] = -Mtab[0, i] * qhi
        big[ri, 0:3] = Mtab[i, 0] * qhi
        for j in range(1, n + 1):
            if j == i:
                big[ri, ri] = Mtab[i, i] * _EYE3
            else:
                big[ri, 3 * j : 3 * j + 3] = -Mtab[i, j] * (qhi @ qh[j - 1])
        pulled = Mw2[i] @ q + params.lengths[i - 1] * suffix[i]
        rhs_vec[ri] = qhi @ pulled
    return big, rhs_vec


def assemble(
    params: SystemParams, state: SystemState, u: ControlInput
) -> tuple[np.ndarray, np.ndarray]:
    """Block matrix and right-hand side of the translational/link system."""
    return _assemble_core(params, state.q, state.omega, input_forces(params, state, u))


def _solve_block(big: np.ndarray, rhs_vec: np.ndarray, context: str) -> np.ndarray:
    try:
        sol = np.linalg.solve(big, rhs_vec)
    except np.linalg.LinAlgError as exc:
        raise DynamicsSolveError(
            f"{context}: singular system (cond {np.linalg.cond(big):.3e})"
        ) from exc
    if not np.isfinite(sol).all():
        raise DynamicsSolveError(
            f"{context}: non-finite solution (cond {np.linalg.cond(big):.3e})"
        )
    return sol


def _quad_angular_accel(params: SystemParams, state: SystemState, u: ControlInput) -> np.ndarray:
    Jinv = _derived(params)["Jinv"]
    JOm = np.einsum("jab,jb->ja", params.quad_inertia, state.Omega)
    torque = u.M - cross_rows(state.Omega, JOm)
    return np.einsum("jab,jb->ja", Jinv, torque)


def accelerations(params: SystemParams, state: SystemState, u: ControlInput) -> Accelerations:
    """Solve for dv0, link domega (tangent-projected), and quadrotor dOmega."""
    big, rhs_vec = assemble(params, state, u)
    sol = _solve_block(big, rhs_vec, "accelerations")
    dv0 = sol[0:3]
    domega = sol[3:].reshape(params.n, 3)
    along = np.einsum("ij,ij->i", state.q, domega)
    defect = float(np.abs(along).max())
    domega = domega - along[:, None] * state.q
    return Accelerations(dv0, domega, _quad_angular_accel(params, state, u), defect)


def rhs(params: SystemParams, state: SystemState, u: ControlInput) -> StateDerivative:
    """Full first-order state derivative (free-flying system)."""
    acc = accelerations(params, state, u)
    dR = np.einsum("jab,jbc->jac", state.R, hat_rows(state.Omega))
    return StateDerivative(
        dx0=state.v0.copy(),
        dv0=acc.dv0,
        dq=cross_rows(state.omega, state.q),
        domega=acc.domega,
        dR=dR,
        dOmega=acc.dOmega,
        tangency_defect=acc.tangency_defect,
    )


def tethered_rhs(params: SystemParams, state: SystemState, u: ControlInput) -> StateDerivative:
    """State derivative with the hose start pinned to the origin.

    Drops the translational row/column of the block system; x0 and v0 must be
    identically zero in the supplied state.
    """
    if np.linalg.norm(state.x0) > 1e-9 or np.linalg.norm(state.v0) > 1e-9:
        raise ValidationError("tethered dynamics require x0 = v0 = 0")
    big, vec = assemble(params, state, u)
    sol = _solve_block(big[3:, 3:], vec[3:], "tethered accelerations")
    domega = sol.reshape(params.n, 3)
    along = np.einsum("ij,ij->i", state.q, domega)
    defect = float(np.abs(along).max())
    domega = domega - along[:, None] * state.q
    dR = np.einsum("jab,jbc->jac", state.R, hat_rows(state.Omega))
    return StateDerivative(
        dx0=np.zeros(3),
        dv0=np.zeros(3),
        dq=cross_rows(state.omega, state.q),
        domega=domega,
        dR=dR,
        dOmega=_quad_angular_accel(params, state, u),
        tangency_defect=defect,
    )


def rhs_packed(params: SystemParams, y: np.ndarray, u: ControlInput, tethered: bool = False) -> np.ndarray:
    """State derivative on the packed ambient vector (integrator fast path).

    Same physics as :func:`rhs` through the shared assembly core, but works on
    array views and skips the structured containers.
    """
    n, nq = params.n, params.n_quad
    o = 6 + 3 * n
    p = o + 3 * n
    r = p + 9 * nq
    q = y[6:o].reshape(n, 3)
    omega = y[o:p].reshape(n, 3)
    R = y[p:r].reshape(nq, 3, 3)
    Omega = y[r:].reshape(nq, 3)

    forces = _derived(params)["grav"].copy()
    for slot, k in enumerate(params.attach):
        forces[k] += u.f[slot] * (R[slot] @ E3)
    big, vec = _assemble_core(params, q, omega, forces)
    ydot = np.empty_like(y)
    if tethered:
        sol = _solve_block(big[3:, 3:], vec[3:], "tethered accelerations")
        ydot[0:6] = 0.0
        domega = sol.reshape(n, 3)
    else:
        sol = _solve_block(big, vec, "accelerations")
        ydot[0:3] = y[3:6]
        ydot[3:6] = sol[0:3]
        domega = sol[3:].reshape(n, 3)
    domega = domega - np.einsum("ij,ij->i", q, domega)[:, None] * q
    ydot[6:o] = cross_rows(omega, q).ravel()
    ydot[o:p] = domega.ravel()
    ydot[p:r] = np.einsum("jab,jbc->jac", R, hat_rows(Omega)).reshape(-1)
    Jinv = _derived(params)["Jinv"]
    JOm = np.einsum("jab,jb->ja", params.quad_inertia, Omega)
    ydot[r:] = np.einsum("jab,jb->ja", Jinv, u.M - cross_rows(Omega, JOm)).ravel()
    return ydot


def energy(params: SystemParams, state: SystemState) -> EnergyBreakdown:
    """Kinetic and potential energy of joints plus quadrotor rotations."""
    mbar = _derived(params)["mbar"]
    vel = node_velocities(params, state)
    kinetic = 0.5 * float(mbar @ np.einsum("ij,ij->i", vel, vel))
    for slot in range(params.n_quad):
        Om = state.Omega[slot]
        kinetic += 0.5 * float(Om @ params.quad_inertia[slot] @ Om)
    steps = params.lengths[:, None] * state.q
    z = state.x0[2] + np.concatenate([[0.0], np.cumsum(steps[:, 2])])
    potential = params.gravity * float(mbar @ z)
    return EnergyBreakdown(kinetic=kinetic, potential=potential)


def link_tensions(
    params: SystemParams,
    state: SystemState,
    accel: Accelerations,
    u: ControlInput,
    residual_tol: float = 1e-6,
) -> np.ndarray:
    """Recover the n link tension vectors from joint force balances.

    Walks the chain from joint 0 (mbar_0 a_0 = T_1 - mbar_0 g e3 + thrust)
    upward; the terminal joint balance must close to ``residual_tol`` times
    the local force scale, otherwise the (state, accel, input) triple is
    inconsistent.
    """
    n = params.n
    mbar = _derived(params)["mbar"]
    g = params.gravity
    qdd = cross_rows(accel.domega, state.q) - (
        np.einsum("ij,ij->i", state.omega, state.omega)[:, None] * state.q
    )
    anode = np.empty((n + 1, 3))
    anode[0] = accel.dv0
    anode[1:] = accel.dv0 + np.cumsum(params.lengths[:, None] * qdd, axis=0)

    thrust = np.zeros((n + 1, 3))
    for slot, k in enumerate(params.attach):
        thrust[k] = u.f[slot] * (state.R[slot] @ E3)

    tensions = np.empty((n, 3))
    T = np.zeros(3)
    for k in range(n):
        T = mbar[k] * anode[k] + T + mbar[k] * g * E3 - thrust[k]
        tensions[k] = T
    closure = mbar[n] * anode[n] + T + mbar[n] * g * E3 - thrust[n]
    scale = max(1.0, float(mbar @ np.abs(anode).max(axis=1)) + g * mbar.sum())
    if np.linalg.norm(closure) > residual_tol * scale:
        raise NumericalError(
            f"link_tensions: terminal balance residual {np.linalg.norm(closure):.3e} "
            "— accelerations inconsistent with state/input"
        )
    return tensions
