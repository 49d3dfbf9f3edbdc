"""Differential-flatness expansion.

For a hose whose last joint carries a quadrotor, the start position x0, the
quadrotor yaws, and the tension vectors in the links just after each interior
quadrotor form a flat output set. Expansion walks the chain joint by joint in
jet arithmetic: each joint's force balance either produces the next tension
jet (plain joint) or, at an attachment, hands over to the flat tension output
and yields that quadrotor's thrust-vector jet instead. Attitudes, rates, and
moments then come out of the thrust-vector and yaw jets.

Tensions are oriented along the link they live in (q = T/||T||), so the
expansion breaks down if a tension jet passes through zero norm; that is the
flatness singularity surfaced below.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import Accelerations
from .errors import (
    AttitudeRecoverySingularityError,
    FlatnessSingularityError,
    ShootingError,
    ValidationError,
)
from .geometry import E3
from .jets import (
    Channel,
    ConstantChannel,
    ScalarJet,
    Vec3Jet,
    constant_vec3,
    jet_add,
    jet_cross,
    jet_dot,
    jet_norm,
    jet_normalize,
    jet_scale,
    jet_sincos,
    jet_sub,
    sample_primitive,
)
from .model import ControlInput, SystemParams, SystemState, net_mass

TENSION_FLOOR = 1e-6


@dataclass(frozen=True)
class FlatOutputs:
    """Flat-output channel bundle.

    x0: three channels for the hose start (None in the tethered variant,
    where t1 supplies the first-link tension instead). psi: one yaw channel
    per attachment, keyed by joint index. tension: three channels per
    interior attachment k (the tension in link k+1), keyed by k.
    """

    x0: tuple[Channel, Channel, Channel] | None
    psi: dict[int, Channel]
    tension: dict[int, tuple[Channel, Channel, Channel]]
    t1: tuple[Channel, Channel, Channel] | None = None

    def validate(self, params: SystemParams) -> None:
        attach = params.attach
        if attach[-1] != params.n:
            raise ValidationError(
                "flat outputs require a quadrotor at the hose end (joint n)"
            )
        if sorted(self.psi) != list(attach):
            raise ValidationError("need exactly one yaw channel per attachment")
        interior = [k for k in attach if k != params.n]
        if self.x0 is not None:
            if sorted(self.tension) != interior:
                raise ValidationError(
                    f"need tension channels exactly for attachments {interior}"
                )
        else:
            if self.t1 is None:
                raise ValidationError("tethered flat outputs need the first-link tension")
            if 0 in attach:
                raise ValidationError("tethered variant cannot have a quadrotor at joint 0")
            if sorted(self.tension) != interior:
                raise ValidationError(
                    f"need tension channels exactly for attachments {interior}"
                )

    def count(self, params: SystemParams) -> int:
        """Number of scalar flat outputs; equals the input count 4 n_quad."""
        return 3 + len(self.psi) + 3 * len(self.tension)


@dataclass(frozen=True)
class DesiredPoint:
    """One instant of a dynamically consistent reference trajectory."""

    t: float
    state: SystemState
    input: ControlInput
    accel: Accelerations


def required_jet_order(n: int, attach) -> dict:
    """Derivative counts each flat output must supply for an n-link hose."""
    attach = tuple(attach)
    if attach[-1] != n:
        raise ValidationError("the hose end must carry a quadrotor")
    orders = {"x0": 2 * n + 4, "psi": 2}
    for k in attach:
        if k != n:
            orders[("tension", k)] = 2 * (n - k) + 2
    return orders


def thrust_to_attitude(
    force: Vec3Jet, psi: ScalarJet, inertia: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, float, np.ndarray]:
    """Quadrotor attitude, rates, thrust, and moment from a thrust-vector jet.

    The body z-axis follows the thrust vector; the body x-axis is the yaw
    heading [cos psi, sin psi, 0] projected onto the plane normal to it.
    Returns (R, Omega, dOmega, f, M).
    """
    if force.order < 2 or psi.order < 2:
        raise ValidationError("attitude recovery needs jets of order >= 2")
    K = min(force.order, 2)
    force = force.truncated(K)
    fmag = jet_norm(force)
    if fmag.value <= TENSION_FLOOR:
        raise AttitudeRecoverySingularityError(
            f"thrust magnitude {fmag.value:.3e} too small for attitude recovery"
        )
    b3 = jet_normalize(force)
    if b3.value[2] < -1.0 + 1e-9:
        raise AttitudeRecoverySingularityError(
            "thrust vector anti-parallel to e3; yaw convention undefined"
        )
    sin_psi, cos_psi = jet_sincos(psi.truncated(K))
    heading = Vec3Jet(np.stack([cos_psi.coeffs, sin_psi.coeffs, np.zeros(K + 1)], axis=1))
    lateral = jet_cross(b3, heading)
    if float(np.linalg.norm(lateral.value)) <= 1e-6:
        raise AttitudeRecoverySingularityError(
            "thrust vector parallel to the yaw heading; attitude undefined"
        )
    b2 = jet_normalize(lateral)
    b1 = jet_cross(b2, b3)

    R = np.stack([b1.value, b2.value, b3.value], axis=1)
    # Omega^ = R^T Rdot, extracted entrywise from column jets
    om1 = jet_dot(b3.truncated(K - 1), b2.derivative())
    om2 = jet_dot(b1.truncated(K - 1), b3.derivative())
    om3 = jet_dot(b2.truncated(K - 1), b1.derivative())
    Omega = np.array([om1.coeffs[0], om2.coeffs[0], om3.coeffs[0]])
    dOmega = np.array([om1.coeffs[1], om2.coeffs[1], om3.coeffs[1]])
    M = inertia @ dOmega + np.cross(Omega, inertia @ Omega)
    return R, Omega, dOmega, float(fmag.value), M


def _expand_chain(
    flat: FlatOutputs, params: SystemParams, t: float, tethered: bool
) -> DesiredPoint:
    flat.validate(params)
    n = params.n
    g = params.gravity
    attach = set(params.attach)
    orders = required_jet_order(n, params.attach)

    if tethered:
        x_jet = constant_vec3(np.zeros(3), 2 * n + 4)
    else:
        x_jet = sample_primitive(flat.x0, t, orders["x0"])
    x0_jet = x_jet

    q_jets: list[Vec3Jet] = []
    thrust_jets: dict[int, Vec3Jet] = {}
    T_jet = constant_vec3(np.zeros(3), 2 * n + 2)  # placeholder "T_0"

    for k in range(n + 1):
        m_k = net_mass(params, k)
        acc_k = x_jet.derivative(2)
        K = acc_k.order
        weight = constant_vec3(m_k * g * E3, K)
        balance = jet_add(jet_add(jet_scale(acc_k, m_k), T_jet.truncated(K)), weight)
        if k == n:
            thrust_jets[n] = balance
            break
        if k in attach:
            T_next = sample_primitive(flat.tension[k], t, orders[("tension", k)])
            thrust_jets[k] = jet_sub(balance.truncated(T_next.order), T_next)
        elif k == 0 and tethered:
            T_next = sample_primitive(flat.t1, t, 2 * n + 2)
        else:
            T_next = balance
        if float(np.linalg.norm(T_next.value)) < TENSION_FLOOR:
            raise FlatnessSingularityError(
                f"tension in link {k + 1} has norm < {TENSION_FLOOR:g} at t = {t:g}"
            )
        q_next = jet_normalize(T_next)
        q_jets.append(q_next)
        x_jet = jet_add(
            x_jet.truncated(q_next.order), jet_scale(q_next, params.lengths[k])
        )
        T_jet = T_next

    q = np.stack([qj.value for qj in q_jets])
    omega = np.stack(
        [np.cross(qj.coeffs[0], qj.coeffs[1]) for qj in q_jets]
    )  # omega = q x qdot
    domega = np.stack([np.cross(qj.coeffs[0], qj.coeffs[2]) for qj in q_jets])

    R = np.empty((params.n_quad, 3, 3))
    Omega = np.empty((params.n_quad, 3))
    dOmega = np.empty((params.n_quad, 3))
    f = np.empty(params.n_quad)
    M = np.empty((params.n_quad, 3))
    for slot, j in enumerate(params.attach):
        psi_jet = sample_primitive(flat.psi[j], t, max(2, orders["psi"]))
        Rj, Omj, dOmj, fj, Mj = thrust_to_attitude(
            thrust_jets[j], psi_jet, params.quad_inertia[slot]
        )
        R[slot], Omega[slot], dOmega[slot], f[slot], M[slot] = Rj, Omj, dOmj, fj, Mj

    state = SystemState(
        x0=x0_jet.coeffs[0].copy(),
        v0=x0_jet.coeffs[1].copy(),
        q=q,
        omega=omega,
        R=R,
        Omega=Omega,
    )
    accel = Accelerations(dv0=x0_jet.coeffs[2].copy(), domega=domega, dOmega=dOmega)
    return DesiredPoint(t=t, state=state, input=ControlInput(f=f, M=M), accel=accel)


def expand(flat: FlatOutputs, params: SystemParams, t: float) -> DesiredPoint:
    """Free-flying expansion: flat outputs (x0, yaws, interior tensions)."""
    if flat.x0 is None:
        raise ValidationError("free-flying expansion needs x0 channels (use tethered_expand)")
    return _expand_chain(flat, params, t, tethered=False)


def tethered_expand(flat: FlatOutputs, params: SystemParams, t: float) -> DesiredPoint:
    """Tethered expansion: x0 pinned at the origin, T1 supplied as flat output."""
    return _expand_chain(flat, params, t, tethered=True)


# ---------------------------------------------------------------------------
# Static setpoints via shooting on the constant tension outputs
# ---------------------------------------------------------------------------


def _static_chain_targets(
    params: SystemParams, x0: np.ndarray, tensions: dict[int, np.ndarray]
) -> dict[int, np.ndarray]:
    """Walk the static chain; return joint positions at attachments."""
    g = params.gravity
    attach = set(params.attach)
    pos = {0: x0.copy()}
    x = x0.copy()
    T = np.zeros(3)
    for k in range(params.n):
        if k in attach and k != params.n:
            T = tensions[k].copy()
        else:
            T = T + net_mass(params, k) * g * E3
        nrm = np.linalg.norm(T)
        if nrm < TENSION_FLOOR:
            raise FlatnessSingularityError(f"static tension in link {k + 1} vanished")
        x = x + params.lengths[k] * T / nrm
        pos[k + 1] = x.copy()
    return pos


def solve_static_shape(
    params: SystemParams,
    x0_target: np.ndarray,
    quad_targets: dict[int, np.ndarray],
    tol: float = 1e-9,
    max_iter: int = 200,
) -> tuple[FlatOutputs, DesiredPoint]:
    """Constant flat outputs whose static chain hits the quadrotor setpoints.

    Damped Newton (finite-difference Jacobian) over the constant interior
    tensions. Requires a quadrotor at joint 0 riding at ``x0_target`` and one
    position target per remaining attachment; each inter-attachment span must
    be strictly slack.
    """
    x0_target = np.asarray(x0_target, float)
    if params.attach[0] != 0:
        # without a quadrotor at the start the chain below the first (only)
        # attachment hangs vertically: nothing to shoot for, just verify
        if params.n_quad != 1 or params.attach != (params.n,):
            raise ValidationError(
                "setpoints without a quadrotor at joint 0 are only supported "
                "for a single end-attached quadrotor"
            )
        pos = _static_chain_targets(params, x0_target, {})
        target = np.asarray(quad_targets[params.n], float)
        if np.abs(pos[params.n] - target).max() > tol:
            raise ValidationError(
                "unreachable target: a chain hanging from one quadrotor fixes "
                f"its position at {pos[params.n]}, requested {target}"
            )
        flat = FlatOutputs(
            x0=tuple(ConstantChannel(float(c)) for c in x0_target),
            psi={params.n: ConstantChannel(0.0)},
            tension={},
        )
        return flat, expand(flat, params, 0.0)
    want = [k for k in params.attach if k != 0]
    if sorted(quad_targets) != want:
        raise ValidationError(f"need position targets exactly for attachments {want}")

    # Reachability: every span must be shorter than the cable between anchors.
    anchors = {0: x0_target, **{k: np.asarray(v, float) for k, v in quad_targets.items()}}
    bounds = list(params.attach)
    for a, b in zip(bounds[:-1], bounds[1:]):
        cable = params.lengths[a:b].sum()
        span = np.linalg.norm(anchors[b] - anchors[a])
        if span >= cable - 1e-12:
            raise ValidationError(
                f"unreachable target: span {span:.6g} m between joints {a} and {b} "
                f"is not slack (cable {cable:.6g} m)"
            )

    free = [k for k in params.attach if k != params.n]
    mbar = params.net_masses()
    g = params.gravity

    # Initial guess: per segment, point sideways at the far anchor and carry
    # half the interior weight downward.
    z0 = np.empty(3 * len(free))
    for idx, k in enumerate(free):
        nxt = params.attach[params.attach.index(k) + 1]
        seg_w = g * mbar[k + 1 : nxt].sum()
        horiz = anchors[nxt] - anchors[k]
        horiz = horiz - (horiz @ E3) * E3
        hn = np.linalg.norm(horiz)
        horiz = horiz / hn if hn > 1e-12 else np.array([1.0, 0.0, 0.0])
        z0[3 * idx : 3 * idx + 3] = max(seg_w, 1e-3) * horiz - 0.5 * (seg_w + 1e-3) * E3

    target_vec = np.concatenate([anchors[k] for k in want])

    def residual(z: np.ndarray) -> np.ndarray:
        tensions = {k: z[3 * i : 3 * i + 3] for i, k in enumerate(free)}
        pos = _static_chain_targets(params, x0_target, tensions)
        return np.concatenate([pos[k] for k in want]) - target_vec

    z = z0.copy()
    r = residual(z)
    for _ in range(max_iter):
        if np.linalg.norm(r, ord=np.inf) < tol:
            break
        J = np.empty((len(r), len(z)))
        h = 1e-7
        for c in range(len(z)):
            zp = z.copy()
            zp[c] += h
            J[:, c] = (residual(zp) - r) / h
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise ShootingError(f"singular shooting Jacobian ({exc})") from exc
        lam = 1.0
        for _ in range(40):
            z_new = z + lam * step
            try:
                r_new = residual(z_new)
            except FlatnessSingularityError:
                lam *= 0.5
                continue
            if np.linalg.norm(r_new) < np.linalg.norm(r):
                break
            lam *= 0.5
        else:
            raise ShootingError("shooting line search stalled")
        z, r = z_new, r_new
    else:
        raise ShootingError(
            f"static shape did not converge in {max_iter} iterations "
            f"(residual {np.linalg.norm(r, ord=np.inf):.3e})"
        )

    def const3(v):
        return tuple(ConstantChannel(float(c)) for c in v)

    flat = FlatOutputs(
        x0=const3(x0_target),
        psi={j: ConstantChannel(0.0) for j in params.attach},
        tension={k: const3(z[3 * i : 3 * i + 3]) for i, k in enumerate(free)},
    )
    return flat, expand(flat, params, 0.0)
