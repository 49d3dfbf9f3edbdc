"""Scenario configuration: INI files with typed sections.

Sections: [system] gravity; [hose] links + uniform or per-link geometry;
one [quadrotor.K] per attachment joint K (mass, inertia, optional setpoint
target); [scenario] mode/timing/seed/initial error; [controller] kind and
gains; [output] log rate; flat-output channels in [flat.x0], [flat.yaw.K],
[flat.tension.K]; [benchmark] for the discretization-scaling study. Units
are SI throughout. Values may be plain numbers or integer fractions like
1/7 (exact trajectory frequencies).
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .control import FeedforwardGains
from .errors import ValidationError
from .jets import Channel, ConstantChannel, PolynomialChannel, SinusoidChannel
from .model import SystemParams
from .sim import InitialError, Scenario


class ConfigError(ValidationError):
    """Bad configuration input; message carries a file/section anchor."""


def _number(text: str) -> float:
    text = text.strip()
    try:
        if "/" in text:
            return float(Fraction(text))
        return float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot parse number {text!r}") from exc


def _vector(text: str, length: int | None = 3) -> np.ndarray:
    parts = [p for p in text.replace(",", " ").split() if p]
    vals = np.array([_number(p) for p in parts])
    if length is not None and len(vals) != length:
        raise ConfigError(f"expected {length} numbers, got {len(vals)} in {text!r}")
    return vals


def parse_channel(text: str) -> Channel:
    """Parse one flat-output channel: '<kind> key=value ...'.

    Kinds: constant (value), sinusoid (freq, amp_sin, amp_cos, offset),
    polynomial (coeffs=c0,c1,...). Example: 'sinusoid freq=1/4 amp_cos=-2 offset=2'.
    """
    tokens = text.split()
    if not tokens:
        raise ConfigError("empty channel specification")
    kind, kv = tokens[0], {}
    for tok in tokens[1:]:
        if "=" not in tok:
            raise ConfigError(f"channel parameter {tok!r} is not key=value")
        key, val = tok.split("=", 1)
        kv[key] = val
    try:
        if kind == "constant":
            return ConstantChannel(value=_number(kv.get("value", "0")))
        if kind == "sinusoid":
            return SinusoidChannel(
                freq=_number(kv["freq"]),
                amp_sin=_number(kv.get("amp_sin", "0")),
                amp_cos=_number(kv.get("amp_cos", "0")),
                offset=_number(kv.get("offset", "0")),
            )
        if kind == "polynomial":
            coeffs = [_number(c) for c in kv["coeffs"].split(",")]
            return PolynomialChannel(poly=tuple(coeffs))
    except KeyError as exc:
        raise ConfigError(f"channel {kind!r} is missing parameter {exc}") from exc
    raise ConfigError(f"unknown channel kind {kind!r}")


def channel_text(chan: Channel) -> str:
    if isinstance(chan, ConstantChannel):
        return f"constant value={chan.value!r}"
    if isinstance(chan, SinusoidChannel):
        return (
            f"sinusoid freq={chan.freq!r} amp_sin={chan.amp_sin!r} "
            f"amp_cos={chan.amp_cos!r} offset={chan.offset!r}"
        )
    if isinstance(chan, PolynomialChannel):
        return "polynomial coeffs=" + ",".join(repr(c) for c in chan.poly)
    raise ConfigError(f"cannot serialize channel {chan!r}")


@dataclass
class BenchmarkSpec:
    n_list: list
    duration: float = 10.0
    dt: float = 2.5e-3
    total_length: float = 1.0
    total_mass: float = 1.0
    quad_mass: float = 0.85
    quad_inertia_diag: tuple = (0.0557, 0.0557, 0.1050)
    span_fraction: float = 0.6


@dataclass
class RunConfig:
    """Everything resolved from one config file."""

    params: SystemParams
    scenario: Scenario | None
    benchmark: BenchmarkSpec | None
    raw: configparser.ConfigParser
    source: str


def _get(cp: configparser.ConfigParser, section: str, key: str, default=None, required=False):
    if cp.has_option(section, key):
        return cp.get(section, key)
    if required:
        raise ConfigError(f"[{section}] {key}: required key missing")
    return default


def _parse_params(cp: configparser.ConfigParser) -> SystemParams:
    if not cp.has_section("hose"):
        raise ConfigError("[hose]: section missing")
    n = int(_get(cp, "hose", "links", required=True))
    if cp.has_option("hose", "lengths"):
        lengths = _vector(cp.get("hose", "lengths"), n)
    else:
        lengths = np.full(n, _number(_get(cp, "hose", "link_length", required=True)))
    if cp.has_option("hose", "masses"):
        masses = _vector(cp.get("hose", "masses"), n + 1)
    else:
        masses = np.full(n + 1, _number(_get(cp, "hose", "node_mass", required=True)))
    gravity = _number(_get(cp, "system", "gravity", "9.81") if cp.has_section("system") else "9.81")

    quads = []
    for section in cp.sections():
        if section.startswith("quadrotor."):
            try:
                k = int(section.split(".", 1)[1])
            except ValueError as exc:
                raise ConfigError(f"[{section}]: attachment index must be an integer") from exc
            mass = _number(_get(cp, section, "mass", required=True))
            inertia_text = _get(cp, section, "inertia", required=True)
            entries = _vector(inertia_text, None)
            if len(entries) == 3:
                J = np.diag(entries)
            elif len(entries) == 9:
                J = entries.reshape(3, 3)
            else:
                raise ConfigError(f"[{section}] inertia: need 3 (diagonal) or 9 entries")
            quads.append((k, mass, J))
    if not quads:
        raise ConfigError("no [quadrotor.K] sections found")
    quads.sort(key=lambda item: item[0])
    try:
        return SystemParams(
            lengths=lengths,
            masses=masses,
            attach=tuple(k for k, _, _ in quads),
            quad_mass=np.array([m for _, m, _ in quads]),
            quad_inertia=np.stack([J for _, _, J in quads]),
            gravity=gravity,
        )
    except ValidationError as exc:
        raise ConfigError(f"[hose]/[quadrotor.*]: {exc}") from exc


def _parse_flat(cp: configparser.ConfigParser, params: SystemParams, tethered: bool):
    from .flatness import FlatOutputs

    def channels(section: str) -> tuple:
        out = []
        for axis in ("x", "y", "z"):
            text = _get(cp, section, axis, required=True)
            out.append(parse_channel(text))
        return tuple(out)

    x0 = None
    t1 = None
    if tethered:
        if not cp.has_section("flat.t1"):
            raise ConfigError("[flat.t1]: tethered mode needs first-link tension channels")
        t1 = channels("flat.t1")
    else:
        if not cp.has_section("flat.x0"):
            raise ConfigError("[flat.x0]: trajectory mode needs start-position channels")
        x0 = channels("flat.x0")
    psi = {}
    tension = {}
    for section in cp.sections():
        if section.startswith("flat.yaw."):
            j = int(section.split(".")[-1])
            psi[j] = parse_channel(_get(cp, section, "value", "constant value=0"))
        elif section.startswith("flat.tension."):
            k = int(section.split(".")[-1])
            tension[k] = channels(section)
    for j in params.attach:
        psi.setdefault(j, ConstantChannel(0.0))
    flat = FlatOutputs(x0=x0, psi=psi, tension=tension, t1=t1)
    try:
        flat.validate(params)
    except ValidationError as exc:
        raise ConfigError(f"[flat.*]: {exc}") from exc
    return flat


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Parse and validate a config file, applying CLI overrides."""
    path = Path(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path) as fh:
            cp.read_file(fh, source=str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    overrides = overrides or {}

    params = _parse_params(cp)

    benchmark = None
    if cp.has_section("benchmark"):
        n_list = [int(round(v)) for v in _vector(cp.get("benchmark", "n_list"), None)]
        benchmark = BenchmarkSpec(
            n_list=n_list,
            duration=_number(_get(cp, "benchmark", "duration", "10.0")),
            dt=_number(_get(cp, "benchmark", "dt", "0.0025")),
            total_length=_number(_get(cp, "benchmark", "total_length", "1.0")),
            total_mass=_number(_get(cp, "benchmark", "total_mass", "1.0")),
            quad_mass=_number(_get(cp, "benchmark", "quad_mass", "0.85")),
            span_fraction=_number(_get(cp, "benchmark", "span_fraction", "0.6")),
        )

    scenario = None
    if cp.has_section("scenario"):
        mode = _get(cp, "scenario", "mode", required=True)
        duration = float(overrides.get("duration") or _number(_get(cp, "scenario", "duration", "10.0")))
        dt = float(overrides.get("dt") or _number(_get(cp, "scenario", "dt", "0.001")))
        seed = int(overrides["seed"]) if overrides.get("seed") is not None else int(
            _get(cp, "scenario", "seed", "0")
        )
        log_rate = float(overrides.get("log_rate") or _number(
            _get(cp, "output", "log_rate", "100.0") if cp.has_section("output") else "100.0"
        ))
        kind = _get(cp, "controller", "kind", "none") if cp.has_section("controller") else "none"
        control_dt = _number(_get(cp, "controller", "control_dt", "0.01")) if cp.has_section("controller") else 0.01

        flat = None
        x0_target = None
        quad_targets = None
        if mode in ("trajectory", "tethered"):
            flat = _parse_flat(cp, params, tethered=(mode == "tethered"))
        elif mode == "setpoint":
            x0_target = _vector(_get(cp, "scenario", "x0_target", required=True))
            quad_targets = {}
            for k in params.attach:
                section = f"quadrotor.{k}"
                if cp.has_option(section, "target"):
                    quad_targets[k] = _vector(cp.get(section, "target"))
            want = [k for k in params.attach if k != 0]
            missing = [k for k in want if k not in quad_targets]
            if missing:
                raise ConfigError(
                    f"[quadrotor.*]: setpoint mode needs target= for attachments {missing}"
                )
            quad_targets.pop(0, None)

        scalars = (
            _number(_get(cp, "controller", "q_x", "0.5")),
            _number(_get(cp, "controller", "q_q", "0.75")),
            _number(_get(cp, "controller", "q_R", "1.0")),
            _number(_get(cp, "controller", "q_Omega", "0.75")),
            _number(_get(cp, "controller", "r", "0.2")),
            _number(_get(cp, "controller", "p_T", "0.01")),
        ) if cp.has_section("controller") else (0.5, 0.75, 1.0, 0.75, 0.2, 0.01)
        gains = FeedforwardGains(
            kp=_number(_get(cp, "controller", "kp", "16.0")),
            kd=_number(_get(cp, "controller", "kd", "8.0")),
            kR=_number(_get(cp, "controller", "kR", "100.0")),
            kOmega=_number(_get(cp, "controller", "kOmega", "20.0")),
        ) if cp.has_section("controller") else FeedforwardGains()

        initial = InitialError(
            link_angle_deg=_number(_get(cp, "scenario", "link_error_deg", "0.0")),
            x0_offset=tuple(_vector(_get(cp, "scenario", "x0_error", "0 0 0"))),
        )
        scenario = Scenario(
            params=params,
            mode=mode,
            controller=kind,
            duration=duration,
            dt=dt,
            control_dt=control_dt,
            log_rate=log_rate,
            seed=seed,
            flat=flat,
            x0_target=x0_target,
            quad_targets=quad_targets,
            initial_error=initial,
            lqr_scalars=scalars,
            ff_gains=gains,
        )
        try:
            scenario.validate()
        except ValidationError as exc:
            raise ConfigError(f"[scenario]: {exc}") from exc

    return RunConfig(
        params=params, scenario=scenario, benchmark=benchmark, raw=cp, source=str(path)
    )


def dump_config(cfg: RunConfig) -> str:
    """Serialize the parsed configuration back to INI text (round-trip safe)."""
    import io

    out = io.StringIO()
    cfg.raw.write(out)
    return out.getvalue()
