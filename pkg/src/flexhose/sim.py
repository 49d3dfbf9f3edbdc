"""Time integration and scenario orchestration.

One integrator step is classical RK4 on the ambient state vector followed by
manifold projection (links renormalized with rates re-tangented, quadrotor
attitudes re-orthonormalized), which keeps constraint defects at roundoff for
sane step sizes. Rollouts hold the control input between controller updates
(zero-order hold on the controller grid) and log at a decimated rate.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .control import (
    FeedforwardGains,
    GainSchedule,
    LqrWeights,
    apply_feedback,
    feedforward_baseline,
    lqr_feedback,
    riccati_backward,
    weights_from_config,
)
from .dynamics import accelerations, energy, link_tensions, rhs_packed
from .errors import DivergenceError, ValidationError
from .flatness import (
    DesiredPoint,
    FlatOutputs,
    expand,
    solve_static_shape,
    tethered_expand,
)
from .geometry import polar_repair, s2_config_error, so3_config_error
from .linearization import ErrorState, error_state, linearize_points, retract
from .model import (
    ControlInput,
    SystemParams,
    SystemState,
    node_positions,
    pack_state,
    unpack_state,
)

BLOWUP_POSITION = 1e3

MODES = ("setpoint", "trajectory", "tethered", "freefall")
CONTROLLERS = ("lqr", "feedforward", "open-loop", "none")


def _project(params: SystemParams, y: np.ndarray) -> np.ndarray:
    """Restore manifold constraints in place after an ambient step."""
    n, nq = params.n, params.n_quad
    o = 6 + 3 * n
    q = y[6:o].reshape(n, 3)
    q /= np.linalg.norm(q, axis=1)[:, None]
    w = y[o : o + 3 * n].reshape(n, 3)
    w -= np.einsum("ij,ij->i", q, w)[:, None] * q
    r0 = o + 3 * n
    for j in range(nq):
        sl = slice(r0 + 9 * j, r0 + 9 * (j + 1))
        y[sl] = polar_repair(y[sl].reshape(3, 3)).reshape(-1)
    return y


def _rk4_packed(
    params: SystemParams, y: np.ndarray, u: ControlInput, dt: float, tethered: bool
) -> np.ndarray:
    k1 = rhs_packed(params, y, u, tethered)
    k2 = rhs_packed(params, y + 0.5 * dt * k1, u, tethered)
    k3 = rhs_packed(params, y + 0.5 * dt * k2, u, tethered)
    k4 = rhs_packed(params, y + dt * k3, u, tethered)
    y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return _project(params, y)


def step(
    params: SystemParams,
    state: SystemState,
    u: ControlInput,
    dt: float,
    tethered: bool = False,
) -> SystemState:
    """One RK4 step of length dt followed by manifold projection."""
    if dt <= 0.0:
        raise ValidationError("step size must be positive")
    return unpack_state(params, _rk4_packed(params, pack_state(state), u, dt, tethered))


@dataclass(frozen=True)
class InitialError:
    """Deterministic initial-condition perturbation applied through retract.

    Every link attitude is rotated by ``link_angle_deg`` about a seeded random
    axis perpendicular to its reference direction; x0 may be offset too.
    """

    link_angle_deg: float = 0.0
    x0_offset: tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass
class Scenario:
    params: SystemParams
    mode: str
    controller: str = "none"
    duration: float = 10.0
    dt: float = 1e-3
    control_dt: float = 1e-2
    log_rate: float = 100.0
    seed: int = 0
    flat: FlatOutputs | None = None
    x0_target: np.ndarray | None = None
    quad_targets: dict | None = None
    initial_error: InitialError = field(default_factory=InitialError)
    weights: LqrWeights | None = None
    lqr_scalars: tuple = (0.5, 0.75, 1.0, 0.75, 0.2, 0.01)  # q_x q_q q_R q_Omega r p_T
    ff_gains: FeedforwardGains = field(default_factory=FeedforwardGains)
    gain_schedule: GainSchedule | None = None
    linearization_dt: float = 5e-3

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}")
        if self.controller not in CONTROLLERS:
            raise ValidationError(f"unknown controller {self.controller!r}")
        if self.dt <= 0.0 or self.duration < self.dt:
            raise ValidationError("need dt > 0 and duration >= dt")
        for name, period in (("control_dt", self.control_dt), ("log period", 1.0 / self.log_rate)):
            ratio = period / self.dt
            if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
                raise ValidationError(f"{name} must be a positive multiple of dt")
        if self.mode in ("trajectory", "tethered") and self.flat is None:
            raise ValidationError(f"{self.mode} mode needs flat outputs")
        if self.mode == "setpoint" and (self.x0_target is None or not self.quad_targets):
            raise ValidationError("setpoint mode needs x0 and quadrotor targets")
        if self.controller == "feedforward" and self.mode not in ("setpoint", "freefall"):
            raise ValidationError("the feed-forward baseline only holds static setpoints")


@dataclass(frozen=True)
class LogRecord:
    t: float
    x0: np.ndarray
    v0: np.ndarray
    q: np.ndarray
    omega: np.ndarray
    R: np.ndarray
    psi_q: np.ndarray
    xi_norm: np.ndarray
    psi_R: np.ndarray
    eta_norm: np.ndarray
    f: np.ndarray
    M: np.ndarray
    kinetic: float
    potential: float
    defect_qnorm: float
    defect_qw: float
    defect_orth: float
    tensions: np.ndarray


@dataclass
class RunResult:
    records: list
    diverged: bool
    wall_time: float
    equilibrium: DesiredPoint | None = None
    schedule: GainSchedule | None = None

    @property
    def final_max_psi_q(self) -> float:
        return float(np.max(self.records[-1].psi_q))

    @property
    def final_max_psi_R(self) -> float:
        return float(np.max(self.records[-1].psi_R))


class _DesiredProvider:
    """Memoized reference-point lookup (expansion is deterministic in t)."""

    def __init__(self, fn):
        self._fn = fn
        self._cache = {}

    def __call__(self, t: float) -> DesiredPoint:
        key = round(t, 9)
        point = self._cache.get(key)
        if point is None:
            point = self._fn(t)
            self._cache[key] = point
        return point


def _make_record(
    params: SystemParams,
    t: float,
    state: SystemState,
    u: ControlInput,
    desired: DesiredPoint | None,
) -> LogRecord:
    n, nq = params.n, params.n_quad
    if desired is not None:
        sd = desired.state
        psi_q = np.array([s2_config_error(sd.q[i], state.q[i]) for i in range(n)])
        psi_R = np.array([so3_config_error(sd.R[j], state.R[j]) for j in range(nq)])
        err = error_state(state, desired)
        xi_norm = np.linalg.norm(err.xi, axis=1)
        eta_norm = np.linalg.norm(err.eta, axis=1)
    else:
        psi_q = np.zeros(n)
        psi_R = np.zeros(nq)
        xi_norm = np.zeros(n)
        eta_norm = np.zeros(nq)
    acc = accelerations(params, state, u)
    tensions = link_tensions(params, state, acc, u)
    en = energy(params, state)
    qn = float(np.abs(np.linalg.norm(state.q, axis=1) - 1.0).max())
    qw = float(np.abs(np.einsum("ij,ij->i", state.q, state.omega)).max())
    orth = max(
        float(np.linalg.norm(state.R[j].T @ state.R[j] - np.eye(3))) for j in range(nq)
    )
    return LogRecord(
        t=t,
        x0=state.x0.copy(),
        v0=state.v0.copy(),
        q=state.q.copy(),
        omega=state.omega.copy(),
        R=state.R.copy(),
        psi_q=psi_q,
        xi_norm=xi_norm,
        psi_R=psi_R,
        eta_norm=eta_norm,
        f=u.f.copy(),
        M=u.M.copy(),
        kinetic=en.kinetic,
        potential=en.potential,
        defect_qnorm=qn,
        defect_qw=qw,
        defect_orth=orth,
        tensions=tensions,
    )


def _initial_state(
    scenario: Scenario, desired0: DesiredPoint, rng: np.random.Generator
) -> SystemState:
    params = scenario.params
    n = params.n
    spec = scenario.initial_error
    xi = np.zeros((n, 3))
    if spec.link_angle_deg != 0.0:
        mag = math.sin(math.radians(spec.link_angle_deg))
        for i in range(n):
            qd = desired0.state.q[i]
            axis = rng.normal(size=3)
            axis -= (qd @ axis) * qd
            axis /= np.linalg.norm(axis)
            xi[i] = mag * axis
    err = ErrorState(
        dx=np.asarray(spec.x0_offset, float),
        xi=xi,
        dv=np.zeros(3),
        domega=np.zeros((n, 3)),
        eta=np.zeros((params.n_quad, 3)),
        dOmega=np.zeros((params.n_quad, 3)),
    )
    return retract(desired0, err).validated(params)


def _build_lqr(scenario: Scenario, provider: _DesiredProvider) -> GainSchedule:
    if scenario.gain_schedule is not None:
        return scenario.gain_schedule
    params = scenario.params
    weights = scenario.weights
    if weights is None:
        qx, qq, qR, qOm, r, pT = scenario.lqr_scalars
        weights = weights_from_config(params, qx, qq, qR, qOm, r, pT, scenario.duration)
    if scenario.mode == "setpoint":
        from dataclasses import replace

        p0 = provider(0.0)
        points = [p0, replace(p0, t=scenario.duration)]
    else:
        grid = np.arange(0.0, scenario.duration + scenario.linearization_dt / 2,
                         scenario.linearization_dt)
        points = [provider(float(t)) for t in grid]
    linsys = linearize_points(points, params)
    return riccati_backward(linsys, weights, grid_dt=scenario.control_dt)


def run(scenario: Scenario) -> RunResult:
    """Closed-loop (or open-loop) rollout with decimated logging."""
    scenario.validate()
    params = scenario.params
    rng = np.random.default_rng(scenario.seed)
    tethered = scenario.mode == "tethered"

    if scenario.mode == "setpoint":
        flat, equilibrium = solve_static_shape(
            params, scenario.x0_target, scenario.quad_targets
        )
        provider = _DesiredProvider(lambda t: equilibrium)
    elif scenario.mode == "trajectory":
        provider = _DesiredProvider(lambda t: expand(scenario.flat, params, t))
        equilibrium = None
    elif scenario.mode == "tethered":
        provider = _DesiredProvider(lambda t: tethered_expand(scenario.flat, params, t))
        equilibrium = None
    else:  # freefall
        provider = None
        equilibrium = None

    schedule = None
    if scenario.controller == "lqr":
        schedule = _build_lqr(scenario, provider)
        if scenario.mode == "setpoint":
            equilibrium = provider(0.0)

        def control(t: float, state: SystemState) -> ControlInput:
            desired = provider(t)
            du = lqr_feedback(schedule, t, error_state(state, desired))
            return apply_feedback(desired, du, params)

    elif scenario.controller == "feedforward":
        if scenario.mode != "setpoint" or equilibrium is None:
            raise ValidationError("feed-forward baseline needs a setpoint scenario")
        control = feedforward_baseline(params, equilibrium, scenario.ff_gains)
    elif scenario.controller == "open-loop":

        def control(t: float, state: SystemState) -> ControlInput:
            return provider(t).input

    else:  # none: zero inputs (free fall / conservative rollouts)

        def control(t: float, state: SystemState) -> ControlInput:
            return ControlInput.zero(params)

    if provider is not None:
        state = _initial_state(scenario, provider(0.0), rng)
    else:
        state = _freefall_initial_state(scenario, rng)

    dt = scenario.dt
    n_steps = int(round(scenario.duration / dt))
    control_every = int(round(scenario.control_dt / dt))
    log_every = int(round((1.0 / scenario.log_rate) / dt))

    records = []
    diverged = False
    u = control(0.0, state)
    started = time.perf_counter()
    records.append(_make_record(params, 0.0, state, u, provider(0.0) if provider else None))
    y = pack_state(state)
    for k in range(n_steps):
        t = k * dt
        if k % control_every == 0 and k > 0:
            u = control(t, unpack_state(params, y))
        y = _rk4_packed(params, y, u, dt, tethered)
        t_next = (k + 1) * dt
        if not np.isfinite(y[0:3]).all() or y[0:3] @ y[0:3] > BLOWUP_POSITION**2:
            diverged = True
            break
        if (k + 1) % log_every == 0:
            desired = provider(t_next) if provider else None
            records.append(_make_record(params, t_next, unpack_state(params, y), u, desired))
    wall = time.perf_counter() - started
    return RunResult(
        records=records,
        diverged=diverged,
        wall_time=wall,
        equilibrium=equilibrium,
        schedule=schedule,
    )


def _freefall_initial_state(scenario: Scenario, rng: np.random.Generator) -> SystemState:
    """Hanging chain released from rest with a seeded sideways lean."""
    params = scenario.params
    n, nq = params.n, params.n_quad
    lean = math.radians(scenario.initial_error.link_angle_deg)
    q = np.zeros((n, 3))
    q[:, 0] = math.sin(lean)
    q[:, 2] = -math.cos(lean)
    R = np.tile(np.eye(3), (nq, 1, 1))
    return SystemState(
        x0=np.zeros(3),
        v0=np.zeros(3),
        q=q,
        omega=np.zeros((n, 3)),
        R=R,
        Omega=np.zeros((nq, 3)),
    ).validated(params)


def benchmark(
    n_list,
    duration: float = 10.0,
    dt: float = 2.5e-3,
    total_length: float = 1.0,
    total_mass: float = 1.0,
    quad_mass: float = 0.85,
    quad_inertia_diag=(0.0557, 0.0557, 0.1050),
    span_fraction: float = 0.6,
) -> list[tuple[int, float]]:
    """Wall time to simulate the same cable at different discretizations.

    Link lengths and joint masses rescale with n so the total cable length
    and mass stay fixed; quadrotors hold the two ends with the feed-forward
    baseline. The fastest chain mode scales like n, so each discretization
    integrates at its own stability-margin step: ``dt`` applies to the finest
    n and coarser chains take proportionally longer steps (equal margin,
    comparable per-mode resolution). Returns (n, wall seconds) rows.
    """
    from .model import uniform_params

    n_list = list(n_list)
    if n_list != sorted(n_list):
        raise ValidationError("benchmark discretizations must be ascending")
    n_finest = n_list[-1]
    rows = []
    for n in n_list:
        attach = (0, n) if n > 1 else (n,)
        params = uniform_params(
            n,
            total_length / n,
            total_mass / (n + 1),
            attach=attach,
            quad_mass=quad_mass,
            quad_inertia_diag=quad_inertia_diag,
        )
        if n > 1:
            targets = {n: np.array([span_fraction * total_length, 0.0, 0.0])}
        else:
            # a single link cannot span two anchors; hang it under one quadrotor
            targets = {n: np.array([0.0, 0.0, total_length])}
        steps_n = max(1, round(duration / (dt * n_finest / n)))
        dt_n = duration / steps_n
        scenario = Scenario(
            params=params,
            mode="setpoint",
            controller="feedforward",
            duration=duration,
            dt=dt_n,
            control_dt=dt_n * max(1, round(1e-2 / dt_n)),
            log_rate=1.0 / duration,
            x0_target=np.zeros(3),
            quad_targets=targets,
        )
        result = run(scenario)
        if result.diverged:
            raise DivergenceError(f"benchmark rollout diverged at n = {n} (dt = {dt_n:g})")
        rows.append((n, result.wall_time))
    return rows
