"""Variation-based linearization about a time-varying reference trajectory.

Error coordinates are intrinsic: xi_i = q_id x q_i on each link sphere and
eta_j = 0.5 (R_jd^T R_j - R_j^T R_jd)^vee on each quadrotor, stacked as

    dx = [dx, xi_1..xi_n, dv, domega_1..n, eta_j1.., dOmega_j1..]  (n_x = 6+6n+6nq)

The continuous error dynamics dxdot = A(t) dx + B(t) du hold on the subspace
C(t) dx = 0 cut out by the sphere constraints. The A/B middle rows are the
mass-matrix solve of the force-balance variation; every block here is checked
against finite differences of the nonlinear dynamics (quadratic convergence),
which is what pins the sign conventions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import assemble, input_forces, mass_entries, rhs
from .errors import ValidationError
from .flatness import DesiredPoint
from .geometry import E3, hat, hat_rows, so3_exp
from .model import ControlInput, SystemParams, SystemState


def state_block_slices(params: SystemParams) -> dict:
    """Index ranges of the error-state blocks (also used for matrix dumps)."""
    n, nq = params.n, params.n_quad
    o = {}
    o["dx"] = slice(0, 3)
    o["xi"] = slice(3, 3 + 3 * n)
    o["dv"] = slice(3 + 3 * n, 6 + 3 * n)
    o["domega"] = slice(6 + 3 * n, 6 + 6 * n)
    o["eta"] = slice(6 + 6 * n, 6 + 6 * n + 3 * nq)
    o["dOmega"] = slice(6 + 6 * n + 3 * nq, 6 + 6 * n + 6 * nq)
    return o


def error_dim(params: SystemParams) -> int:
    return 6 + 6 * params.n + 6 * params.n_quad


@dataclass(frozen=True)
class ErrorState:
    """Intrinsic error blocks; ``vector`` stacks them in the canonical order."""

    dx: np.ndarray
    xi: np.ndarray
    dv: np.ndarray
    domega: np.ndarray
    eta: np.ndarray
    dOmega: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate(
            [
                self.dx,
                self.xi.ravel(),
                self.dv,
                self.domega.ravel(),
                self.eta.ravel(),
                self.dOmega.ravel(),
            ]
        )

    @classmethod
    def from_vector(cls, params: SystemParams, vec: np.ndarray) -> "ErrorState":
        s = state_block_slices(params)
        n, nq = params.n, params.n_quad
        return cls(
            dx=vec[s["dx"]].copy(),
            xi=vec[s["xi"]].reshape(n, 3).copy(),
            dv=vec[s["dv"]].copy(),
            domega=vec[s["domega"]].reshape(n, 3).copy(),
            eta=vec[s["eta"]].reshape(nq, 3).copy(),
            dOmega=vec[s["dOmega"]].reshape(nq, 3).copy(),
        )


def error_state(state: SystemState, desired: DesiredPoint) -> ErrorState:
    """Intrinsic error of ``state`` relative to the reference point.

    Rate errors are plain differences (omega - omega_d, Omega - Omega_d):
    the state-matrix blocks below are their exact Jacobians, which the
    finite-difference suite verifies. Transported variants differ only at
    second order but would break that first-order match.
    """
    sd = desired.state
    xi = np.cross(sd.q, state.q)
    domega = state.omega - sd.omega
    nq = sd.R.shape[0]
    eta = np.empty((nq, 3))
    dOmega = np.empty((nq, 3))
    for j in range(nq):
        A = sd.R[j].T @ state.R[j]
        S = 0.5 * (A - A.T)
        eta[j] = np.array([S[2, 1], S[0, 2], S[1, 0]])
        dOmega[j] = state.Omega[j] - sd.Omega[j]
    return ErrorState(
        dx=state.x0 - sd.x0,
        xi=xi,
        dv=state.v0 - sd.v0,
        domega=domega,
        eta=eta,
        dOmega=dOmega,
    )


def retract(desired: DesiredPoint, err: ErrorState) -> SystemState:
    """Map an error back to a valid state; exact inverse of ``error_state``.

    Exact for errors that came from a valid state. Raw error vectors whose
    rate block is not tangent at the retracted attitude get the off-tangent
    component projected away (an O(|err|^2) adjustment). Injectivity needs
    ||xi|| < 1 and ||eta|| < 1.
    """
    sd = desired.state
    n = sd.q.shape[0]
    q = np.empty((n, 3))
    omega = np.empty((n, 3))
    for i in range(n):
        mag = np.linalg.norm(err.xi[i])
        if mag >= 1.0:
            raise ValidationError(f"xi[{i}] norm {mag:.3f} outside the injectivity radius")
        if mag < 1e-15:
            q[i] = sd.q[i]
        else:
            theta = np.arcsin(mag)
            axis = err.xi[i] / mag
            q[i] = np.cos(theta) * sd.q[i] + np.sin(theta) * np.cross(axis, sd.q[i])
        w = sd.omega[i] + err.domega[i]
        omega[i] = w - (q[i] @ w) * q[i]
    nq = sd.R.shape[0]
    R = np.empty((nq, 3, 3))
    Omega = np.empty((nq, 3))
    for j in range(nq):
        mag = np.linalg.norm(err.eta[j])
        if mag >= 1.0:
            raise ValidationError(f"eta[{j}] norm {mag:.3f} outside the injectivity radius")
        if mag < 1e-15:
            R[j] = sd.R[j]
        else:
            R[j] = sd.R[j] @ so3_exp(np.arcsin(mag) * err.eta[j] / mag)
        Omega[j] = sd.Omega[j] + err.dOmega[j]
    return SystemState(
        x0=sd.x0 + err.dx,
        v0=sd.v0 + err.dv,
        q=q,
        omega=omega,
        R=R,
        Omega=Omega,
    )


def _force_variation_blocks(desired: DesiredPoint, params: SystemParams):
    """F (w.r.t. the error state) and G (w.r.t. the input) of the force balance."""
    n, nq = params.n, params.n_quad
    sd = desired.state
    nx = error_dim(params)
    s = state_block_slices(params)
    Mtab = mass_entries(params)
    qh = hat_rows(sd.q)
    w2 = np.einsum("ij,ij->i", sd.omega, sd.omega)
    dwh = hat_rows(desired.accel.domega)
    forces = input_forces(params, sd, desired.input)
    suffix = np.cumsum(forces[::-1], axis=0)[::-1]

    F = np.zeros((3 * (n + 1), nx))
    G = np.zeros((3 * (n + 1), 4 * nq))
    xi0, w0 = s["xi"].start, s["domega"].start
    eta0 = s["eta"].start

    # Row 0: variation of the translational balance.
    for i in range(1, n + 1):
        ci = slice(xi0 + 3 * (i - 1), xi0 + 3 * i)
        F[0:3, ci] = Mtab[0, i] * ((dwh[i - 1] - w2[i - 1] * np.eye(3)) @ qh[i - 1])
        cw = slice(w0 + 3 * (i - 1), w0 + 3 * i)
        F[0:3, cw] = Mtab[0, i] * 2.0 * np.outer(sd.q[i - 1], sd.omega[i - 1])
    for slot, j in enumerate(params.attach):
        ce = slice(eta0 + 3 * slot, eta0 + 3 * slot + 3)
        F[0:3, ce] = -desired.input.f[slot] * sd.R[slot] @ hat(E3)
        G[0:3, slot] = sd.R[slot] @ E3

    # Rows i: variation of each link balance.
    for i in range(1, n + 1):
        ri = slice(3 * i, 3 * i + 3)
        li = params.lengths[i - 1]
        # Diagonal xi block: everything the varied hat(q_i) multiplies.
        core = Mtab[i, 0] * hat(desired.accel.dv0) - li * hat(suffix[i])
        for j in range(1, n + 1):
            if j == i:
                continue
            core -= Mtab[i, j] * (
                hat(np.cross(sd.q[j - 1], desired.accel.domega[j - 1]))
                + w2[j - 1] * qh[j - 1]
            )
        ci = slice(xi0 + 3 * (i - 1), xi0 + 3 * i)
        F[ri, ci] = core @ (-qh[i - 1])
        for j in range(1, n + 1):
            if j == i:
                continue
            cj = slice(xi0 + 3 * (j - 1), xi0 + 3 * j)
            F[ri, cj] = Mtab[i, j] * qh[i - 1] @ (
                (dwh[j - 1] - w2[j - 1] * np.eye(3)) @ qh[j - 1]
            )
            cw = slice(w0 + 3 * (j - 1), w0 + 3 * j)
            F[ri, cw] = Mtab[i, j] * 2.0 * qh[i - 1] @ np.outer(sd.q[j - 1], sd.omega[j - 1])
        for slot, j in enumerate(params.attach):
            if j < i:
                continue
            ce = slice(eta0 + 3 * slot, eta0 + 3 * slot + 3)
            F[ri, ce] = -li * qh[i - 1] @ (desired.input.f[slot] * sd.R[slot] @ hat(E3))
            G[ri, slot] = li * qh[i - 1] @ (sd.R[slot] @ E3)
    return F, G


def build_A(desired: DesiredPoint, params: SystemParams) -> np.ndarray:
    """State matrix of the error dynamics at one reference point."""
    n, nq = params.n, params.n_quad
    nx = error_dim(params)
    s = state_block_slices(params)
    sd = desired.state
    A = np.zeros((nx, nx))
    A[s["dx"], s["dv"]] = np.eye(3)
    xi0, w0 = s["xi"].start, s["domega"].start
    for i in range(n):
        qd = sd.q[i]
        Pi = np.eye(3) - np.outer(qd, qd)
        A[xi0 + 3 * i : xi0 + 3 * i + 3, xi0 + 3 * i : xi0 + 3 * i + 3] = (
            np.outer(qd, qd) @ hat(sd.omega[i])
        )
        A[xi0 + 3 * i : xi0 + 3 * i + 3, w0 + 3 * i : w0 + 3 * i + 3] = Pi

    F, _ = _force_variation_blocks(desired, params)
    big, _ = assemble(params, sd, desired.input)
    A[s["dv"].start : s["domega"].stop, :] = np.linalg.solve(big, F)

    eta0, Om0 = s["eta"].start, s["dOmega"].start
    for slot in range(nq):
        J = params.quad_inertia[slot]
        Om = sd.Omega[slot]
        re = slice(eta0 + 3 * slot, eta0 + 3 * slot + 3)
        rO = slice(Om0 + 3 * slot, Om0 + 3 * slot + 3)
        A[re, re] = -hat(Om)
        A[re, rO] = np.eye(3)
        A[rO, rO] = np.linalg.solve(J, hat(J @ Om) - hat(Om) @ J)
    return A


def build_B(desired: DesiredPoint, params: SystemParams) -> np.ndarray:
    """Input matrix; thrust columns first, then body moments."""
    nq = params.n_quad
    nx = error_dim(params)
    s = state_block_slices(params)
    B = np.zeros((nx, 4 * nq))
    _, G = _force_variation_blocks(desired, params)
    big, _ = assemble(params, desired.state, desired.input)
    B[s["dv"].start : s["domega"].stop, :] = np.linalg.solve(big, G)
    Om0 = s["dOmega"].start
    for slot in range(nq):
        rO = slice(Om0 + 3 * slot, Om0 + 3 * slot + 3)
        cM = slice(nq + 3 * slot, nq + 3 * slot + 3)
        B[rO, cM] = np.linalg.inv(params.quad_inertia[slot])
    return B


def build_C(desired: DesiredPoint, params: SystemParams) -> np.ndarray:
    """Constraint matrix: sphere tangency rows for xi, then the rate rows."""
    n = params.n
    nx = error_dim(params)
    s = state_block_slices(params)
    sd = desired.state
    C = np.zeros((2 * n, nx))
    xi0, w0 = s["xi"].start, s["domega"].start
    for i in range(n):
        C[i, xi0 + 3 * i : xi0 + 3 * i + 3] = sd.q[i]
        C[n + i, xi0 + 3 * i : xi0 + 3 * i + 3] = -sd.omega[i] @ hat(sd.q[i])
        C[n + i, w0 + 3 * i : w0 + 3 * i + 3] = sd.q[i]
    return C


def error_rate(
    params: SystemParams, state: SystemState, u: ControlInput, desired: DesiredPoint
) -> np.ndarray:
    """Exact time derivative of the error coordinates along the nonlinear flow."""
    sd = desired.state
    deriv = rhs(params, state, u)
    qdot_d = np.cross(sd.omega, sd.q)
    dxi = np.cross(qdot_d, state.q) + np.cross(sd.q, deriv.dq)
    ddomega = deriv.domega - desired.accel.domega
    nq = params.n_quad
    deta = np.empty((nq, 3))
    Omh = hat_rows(state.Omega)
    Omdh = hat_rows(sd.Omega)
    for j in range(nq):
        Rd, R = sd.R[j], state.R[j]
        Rdot = R @ Omh[j]
        Rdot_d = Rd @ Omdh[j]
        S = 0.5 * (Rd.T @ Rdot + Rdot_d.T @ R - Rdot.T @ Rd - R.T @ Rdot_d)
        deta[j] = np.array([S[2, 1], S[0, 2], S[1, 0]])
    return ErrorState(
        dx=state.v0 - sd.v0,
        xi=dxi,
        dv=deriv.dv0 - desired.accel.dv0,
        domega=ddomega,
        eta=deta,
        dOmega=deriv.dOmega - desired.accel.dOmega,
    ).vector


def constraint_directions(
    params: SystemParams, desired: DesiredPoint, rng: np.random.Generator
) -> np.ndarray:
    """Random unit error vector satisfying C dx = 0 exactly."""
    n = params.n
    sd = desired.state
    err = ErrorState(
        dx=rng.normal(size=3),
        xi=np.empty((n, 3)),
        dv=rng.normal(size=3),
        domega=np.empty((n, 3)),
        eta=rng.normal(size=(params.n_quad, 3)),
        dOmega=rng.normal(size=(params.n_quad, 3)),
    )
    for i in range(n):
        qd = sd.q[i]
        xi = rng.normal(size=3)
        xi -= (qd @ xi) * qd
        err.xi[i] = xi
        w = rng.normal(size=3)
        w -= (qd @ w) * qd
        # rate row: q_d . domega = omega_d . (q_d x xi)
        err.domega[i] = w + (sd.omega[i] @ np.cross(qd, xi)) * qd
    vec = err.vector
    return vec / np.linalg.norm(vec)


@dataclass(frozen=True)
class FdReport:
    """Quadratic-convergence certificate for the linearization."""

    epsilons: np.ndarray
    residuals: np.ndarray  # (n_points, n_eps)
    ratios: np.ndarray  # (n_points, n_eps - 1)

    def ratios_within(self, lo: float = 3.5, hi: float = 4.5) -> bool:
        return bool(np.all((self.ratios >= lo) & (self.ratios <= hi)))


def fd_validate(
    points: list[DesiredPoint],
    params: SystemParams,
    epsilons=(1e-3, 5e-4, 2.5e-4),
    n_directions: int = 8,
    seed: int = 0,
    A_override=None,
    B_override=None,
) -> FdReport:
    """Compare nonlinear error rates against the linear model across scales.

    For each reference point and each scale eps, the residual is the RMS over
    random constraint-satisfying directions (dx, du) of

        || error_rate(retract(eps dx), u_d + eps du) - eps (A dx + B du) ||.

    Halving eps must shrink it ~4x (quadratic remainder); A/B overrides let
    tests corrupt blocks and watch the ratio collapse.
    """
    epsilons = np.asarray(sorted(epsilons, reverse=True), float)
    if np.any(np.diff(epsilons) >= 0.0):
        raise ValidationError("epsilons must be strictly decreasing")
    rng = np.random.default_rng(seed)
    residuals = np.empty((len(points), len(epsilons)))
    for p_idx, point in enumerate(points):
        A = build_A(point, params) if A_override is None else A_override[p_idx]
        B = build_B(point, params) if B_override is None else B_override[p_idx]
        dirs = [constraint_directions(params, point, rng) for _ in range(n_directions)]
        du_dirs = [rng.normal(size=4 * params.n_quad) for _ in dirs]
        du_dirs = [d / np.linalg.norm(d) for d in du_dirs]
        for e_idx, eps in enumerate(epsilons):
            acc = 0.0
            for dvec, du in zip(dirs, du_dirs):
                err = ErrorState.from_vector(params, eps * dvec)
                state = retract(point, err)
                u = ControlInput(
                    f=point.input.f + eps * du[: params.n_quad],
                    M=point.input.M + eps * du[params.n_quad :].reshape(-1, 3),
                )
                rate = error_rate(params, state, u, point)
                model = eps * (A @ dvec + B @ du)
                acc += float(np.linalg.norm(rate - model)) ** 2
            residuals[p_idx, e_idx] = np.sqrt(acc / len(dirs))
    ratios = residuals[:, :-1] / residuals[:, 1:]
    return FdReport(epsilons=epsilons, residuals=residuals, ratios=ratios)


@dataclass(frozen=True)
class LinearizedSystem:
    """Sampled (A, B, C) along a reference trajectory, linearly interpolated."""

    t: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    points: list[DesiredPoint]

    def _interp(self, stack: np.ndarray, t: float) -> np.ndarray:
        ts = self.t
        if t <= ts[0]:
            return stack[0]
        if t >= ts[-1]:
            return stack[-1]
        k = int(np.searchsorted(ts, t) - 1)
        lam = (t - ts[k]) / (ts[k + 1] - ts[k])
        return (1.0 - lam) * stack[k] + lam * stack[k + 1]

    def a_at(self, t: float) -> np.ndarray:
        return self._interp(self.A, t)

    def b_at(self, t: float) -> np.ndarray:
        return self._interp(self.B, t)

    def c_at(self, t: float) -> np.ndarray:
        return self._interp(self.C, t)


def propagate_error_flow(
    linsys: LinearizedSystem, params: SystemParams, x0: np.ndarray, stride: int = 2
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate dxdot = A(t) dx with RK4 stages pinned to the sample grid.

    Uses step h = stride * grid spacing so every RK4 stage lands exactly on a
    stored A sample (no interpolation error contaminates the constraint
    defect). Returns (max |C(t) dx(t)| over the run, final dx).
    """
    if stride < 2 or stride % 2:
        raise ValidationError("stride must be an even integer >= 2")
    spacings = np.diff(linsys.t)
    if np.abs(spacings - spacings[0]).max() > 1e-9 * spacings[0]:
        raise ValidationError("flow propagation needs a uniform sample grid")
    h = stride * float(spacings[0])
    x = np.asarray(x0, float).copy()
    worst = float(np.abs(linsys.C[0] @ x).max())
    k = 0
    while k + stride < len(linsys.t):
        A1 = linsys.A[k]
        A2 = linsys.A[k + stride // 2]
        A3 = linsys.A[k + stride]
        k1 = A1 @ x
        k2 = A2 @ (x + 0.5 * h * k1)
        k3 = A2 @ (x + 0.5 * h * k2)
        k4 = A3 @ (x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        k += stride
        worst = max(worst, float(np.abs(linsys.C[k] @ x).max()))
    return worst, x


def linearize_points(points: list[DesiredPoint], params: SystemParams) -> LinearizedSystem:
    """Build the sampled LTV system from reference points (ascending times)."""
    t = np.array([p.t for p in points])
    if len(points) >= 2 and np.any(np.diff(t) <= 0.0):
        raise ValidationError("reference points must have strictly increasing times")
    A = np.stack([build_A(p, params) for p in points])
    B = np.stack([build_B(p, params) for p in points])
    C = np.stack([build_C(p, params) for p in points])
    return LinearizedSystem(t=t, A=A, B=B, C=C, points=list(points))
