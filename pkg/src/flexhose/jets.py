"""Truncated Taylor (jet) arithmetic.

A jet of order K stores the value and the first K time derivatives of a
signal at one instant, as raw derivatives (no 1/k! scaling). Products use
binomially weighted convolution (Leibniz); norms and quotients use the
square-root and division recurrences, so no symbolic differentiation is
ever needed. Order mismatches are errors, never silent truncation: callers
drop order explicitly with ``truncated``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTensionError, ValidationError

_PAIR_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}
_ROW_CACHE: dict[int, np.ndarray] = {}


def _pair_table(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Binomial weights W[j,m] = C(j+m, j) and target index j+m (overflow -> order+1)."""
    cached = _PAIR_CACHE.get(order)
    if cached is not None:
        return cached
    j = np.arange(order + 1)
    total = j[:, None] + j[None, :]
    W = np.zeros((order + 1, order + 1))
    for a in range(order + 1):
        for b in range(order + 1 - a):
            W[a, b] = math.comb(a + b, a)
    idx = np.minimum(total, order + 1)
    _PAIR_CACHE[order] = (W, idx)
    return W, idx


def _binom_row(k: int) -> np.ndarray:
    row = _ROW_CACHE.get(k)
    if row is None:
        row = np.array([math.comb(k, j) for j in range(k + 1)], dtype=float)
        _ROW_CACHE[k] = row
    return row


@dataclass(frozen=True)
class ScalarJet:
    """Derivatives c[k] = f^(k)(t) of a scalar signal, k = 0..order."""

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float))
        if self.coeffs.ndim != 1:
            raise ValidationError("ScalarJet needs a 1-D coefficient array")

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    def derivative(self, m: int = 1) -> "ScalarJet":
        if m > self.order:
            raise ValidationError(f"cannot take {m} derivatives of an order-{self.order} jet")
        return ScalarJet(self.coeffs[m:])

    def truncated(self, order: int) -> "ScalarJet":
        if order > self.order:
            raise ValidationError(f"cannot raise jet order {self.order} -> {order}")
        return ScalarJet(self.coeffs[: order + 1])


@dataclass(frozen=True)
class Vec3Jet:
    """Derivatives c[k] = f^(k)(t) of an R^3-valued signal; shape (order+1, 3)."""

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float))
        if self.coeffs.ndim != 2 or self.coeffs.shape[1] != 3:
            raise ValidationError("Vec3Jet needs an (order+1, 3) coefficient array")

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def value(self) -> np.ndarray:
        return self.coeffs[0].copy()

    def derivative(self, m: int = 1) -> "Vec3Jet":
        if m > self.order:
            raise ValidationError(f"cannot take {m} derivatives of an order-{self.order} jet")
        return Vec3Jet(self.coeffs[m:])

    def truncated(self, order: int) -> "Vec3Jet":
        if order > self.order:
            raise ValidationError(f"cannot raise jet order {self.order} -> {order}")
        return Vec3Jet(self.coeffs[: order + 1])


Jet = ScalarJet | Vec3Jet


def constant_scalar(value: float, order: int) -> ScalarJet:
    c = np.zeros(order + 1)
    c[0] = value
    return ScalarJet(c)


def constant_vec3(value: np.ndarray, order: int) -> Vec3Jet:
    c = np.zeros((order + 1, 3))
    c[0] = value
    return Vec3Jet(c)


def _check_orders(a: Jet, b: Jet) -> int:
    if a.order != b.order:
        raise ValidationError(f"jet order mismatch: {a.order} vs {b.order}")
    return a.order


def jet_add(a: Jet, b: Jet):
    _check_orders(a, b)
    return type(a)(a.coeffs + b.coeffs)


def jet_sub(a: Jet, b: Jet):
    _check_orders(a, b)
    return type(a)(a.coeffs - b.coeffs)


def jet_scale(a: Jet, s: float):
    return type(a)(s * a.coeffs)


def _pair_reduce(P: np.ndarray, order: int) -> np.ndarray:
    """Sum P[j,m] over antidiagonals j+m=k with binomial weights."""
    W, idx = _pair_table(order)
    flat_idx = idx.ravel()
    if P.ndim == 2:
        out = np.bincount(flat_idx, weights=(W * P).ravel(), minlength=order + 2)
        return out[: order + 1]
    out = np.empty((order + 1, P.shape[2]))
    WP = W[:, :, None] * P
    for c in range(P.shape[2]):
        out[:, c] = np.bincount(flat_idx, weights=WP[:, :, c].ravel(), minlength=order + 2)[
            : order + 1
        ]
    return out


def jet_mul(a: Jet, b: Jet):
    """Leibniz product; scalar*scalar -> scalar, scalar*vec3 -> vec3."""
    order = _check_orders(a, b)
    if isinstance(a, ScalarJet) and isinstance(b, ScalarJet):
        P = np.outer(a.coeffs, b.coeffs)
        return ScalarJet(_pair_reduce(P, order))
    if isinstance(a, ScalarJet) and isinstance(b, Vec3Jet):
        P = a.coeffs[:, None, None] * b.coeffs[None, :, :]
        return Vec3Jet(_pair_reduce(P, order))
    if isinstance(a, Vec3Jet) and isinstance(b, ScalarJet):
        return jet_mul(b, a)
    raise ValidationError("jet_mul of two Vec3Jets is ambiguous; use jet_dot or jet_cross")


def jet_dot(a: Vec3Jet, b: Vec3Jet) -> ScalarJet:
    order = _check_orders(a, b)
    P = a.coeffs @ b.coeffs.T
    return ScalarJet(_pair_reduce(P, order))


def jet_cross(a: Vec3Jet, b: Vec3Jet) -> Vec3Jet:
    order = _check_orders(a, b)
    P = np.cross(a.coeffs[:, None, :], b.coeffs[None, :, :])
    return Vec3Jet(_pair_reduce(P, order))


def jet_sqrt(s: ScalarJet) -> ScalarJet:
    """Square-root jet via the recurrence on r*r = s; requires s[0] > 0."""
    if s.coeffs[0] <= 0.0:
        raise ValidationError("jet_sqrt needs a strictly positive value coefficient")
    K = s.order
    r = np.zeros(K + 1)
    r[0] = math.sqrt(s.coeffs[0])
    for k in range(1, K + 1):
        row = _binom_row(k)
        acc = 0.0
        if k >= 2:
            acc = float(row[1:k] @ (r[1:k] * r[k - 1 : 0 : -1]))
        r[k] = (s.coeffs[k] - acc) / (2.0 * r[0])
    return ScalarJet(r)


def jet_norm(a: Vec3Jet) -> ScalarJet:
    """Euclidean norm of a vector jet (value must stay away from zero)."""
    s = jet_dot(a, a)
    if s.coeffs[0] <= 1e-18:
        raise DegenerateTensionError("jet_norm: vector jet has (near) zero value")
    return jet_sqrt(s)


def jet_normalize(a: Vec3Jet) -> Vec3Jet:
    """Unit-vector jet a/||a||; degenerate below 1e-9 value norm."""
    nrm0 = float(np.linalg.norm(a.coeffs[0]))
    if nrm0 <= 1e-9:
        raise DegenerateTensionError(
            f"jet_normalize: value norm {nrm0:.3e} too small to normalize"
        )
    r = jet_norm(a)
    K = a.order
    out = np.zeros((K + 1, 3))
    out[0] = a.coeffs[0] / r.coeffs[0]
    for k in range(1, K + 1):
        row = _binom_row(k)
        acc = (row[:k, None] * out[:k] * r.coeffs[k:0:-1, None]).sum(axis=0)
        out[k] = (a.coeffs[k] - acc) / r.coeffs[0]
    return Vec3Jet(out)


def jet_sincos(psi: ScalarJet) -> tuple[ScalarJet, ScalarJet]:
    """Jets of sin(psi(t)) and cos(psi(t)) from the jet of psi."""
    K = psi.order
    s = np.zeros(K + 1)
    c = np.zeros(K + 1)
    s[0] = math.sin(psi.coeffs[0])
    c[0] = math.cos(psi.coeffs[0])
    for k in range(K):
        row = _binom_row(k)
        # s^(k+1) = sum_j C(k,j) c^(j) psi^(k+1-j), and the mirrored cosine rule
        s[k + 1] = float(row @ (c[: k + 1] * psi.coeffs[k + 1 : 0 : -1]))
        c[k + 1] = -float(row @ (s[: k + 1] * psi.coeffs[k + 1 : 0 : -1]))
    return ScalarJet(s), ScalarJet(c)


# ---------------------------------------------------------------------------
# Analytic signal primitives (exact jets of closed-form channels)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SinusoidChannel:
    """offset + amp_sin*sin(2 pi f t) + amp_cos*cos(2 pi f t)."""

    freq: float
    amp_sin: float = 0.0
    amp_cos: float = 0.0
    offset: float = 0.0

    def jet(self, t: float, order: int) -> ScalarJet:
        w = 2.0 * math.pi * self.freq
        s, c = self.amp_sin, self.amp_cos
        wt = w * t
        coeffs = np.empty(order + 1)
        coeffs[0] = self.offset + s * math.sin(wt) + c * math.cos(wt)
        for k in range(1, order + 1):
            s, c = -w * c, w * s
            coeffs[k] = s * math.sin(wt) + c * math.cos(wt)
        return ScalarJet(coeffs)


@dataclass(frozen=True)
class PolynomialChannel:
    """sum_m coeffs[m] * t^m."""

    poly: tuple[float, ...]

    def jet(self, t: float, order: int) -> ScalarJet:
        coeffs = np.zeros(order + 1)
        for k in range(order + 1):
            acc = 0.0
            for m in range(k, len(self.poly)):
                acc += self.poly[m] * math.perm(m, k) * t ** (m - k)
            coeffs[k] = acc
        return ScalarJet(coeffs)


@dataclass(frozen=True)
class ConstantChannel:
    value: float = 0.0

    def jet(self, t: float, order: int) -> ScalarJet:
        return constant_scalar(self.value, order)


Channel = SinusoidChannel | PolynomialChannel | ConstantChannel


def channel(kind: str, **params) -> Channel:
    """Factory for signal channels: kind in {sinusoid, polynomial, constant}."""
    if kind == "sinusoid":
        return SinusoidChannel(**params)
    if kind == "polynomial":
        return PolynomialChannel(poly=tuple(params["poly"]))
    if kind == "constant":
        return ConstantChannel(**params)
    raise ValidationError(f"unsupported channel kind {kind!r}")


def sample_primitive(channels, t: float, order: int):
    """Exact jet of a channel (scalar) or a triple of channels (Vec3) at time t."""
    if order < 0:
        raise ValidationError("jet order must be non-negative")
    if isinstance(channels, (SinusoidChannel, PolynomialChannel, ConstantChannel)):
        return channels.jet(t, order)
    chans = tuple(channels)
    if len(chans) != 3:
        raise ValidationError("vector primitive needs exactly three channels")
    cols = [ch.jet(t, order).coeffs for ch in chans]
    return Vec3Jet(np.stack(cols, axis=1))
