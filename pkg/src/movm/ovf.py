"""Optimal velocity functions: values, derivatives up to third order, inverses.

Four families are supported. Each maps headway [m] to a desired velocity
[m/s], is monotone increasing and bounded on its domain, and is smooth
wherever the platoon analysis needs derivatives.

    underwood       v0 * exp(-2*ym / y)                       (y > 0)
    bando           v0 * (tanh((y-ym)/yt) + tanh(ym/yt))
    trigonometric   v0 * (atan((y-ym)/yt) + atan(ym/yt))
    hyperbolic      0 for y <= y0, else v0 * w^n/(yt^n + w^n),  w = y - y0
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ConvergenceError, DomainError, RangeError

FAMILIES = ("underwood", "bando", "trigonometric", "hyperbolic")

_JSON_KEYS = {"family", "v0", "ym", "y_tilde", "y0", "n"}


@dataclass(frozen=True)
class OvfSpec:
    """One optimal-velocity-function family together with its parameters.

    Unused parameters for a family may be left as None; provided values are
    validated regardless.
    """

    family: str
    v0: float
    ym: float | None = None
    y_tilde: float | None = None
    y0: float | None = None
    n: int | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown OVF family {self.family!r}")
        if not self.v0 > 0:
            raise ConfigError("v0 must be positive")
        for name in ("ym", "y_tilde"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ConfigError(f"{name} must be positive when provided")
        if self.family in ("underwood", "bando", "trigonometric") and self.ym is None:
            raise ConfigError(f"{self.family} OVF requires ym")
        if self.family in ("bando", "trigonometric", "hyperbolic") and self.y_tilde is None:
            raise ConfigError(f"{self.family} OVF requires y_tilde")
        if self.family == "hyperbolic":
            if self.n is None or self.y0 is None:
                raise ConfigError("hyperbolic OVF requires y0 and n")
            if int(self.n) != self.n or self.n < 1:
                raise ConfigError("n must be an integer >= 1")
            if self.y0 < 0:
                raise ConfigError("y0 must be non-negative")

    def to_json_dict(self) -> dict:
        return {
            "family": self.family,
            "v0": self.v0,
            "ym": self.ym,
            "y_tilde": self.y_tilde,
            "y0": self.y0,
            "n": self.n,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "OvfSpec":
        unknown = set(data) - _JSON_KEYS
        if unknown:
            raise ConfigError(f"unknown OVF fields: {sorted(unknown)}")
        if "family" not in data or "v0" not in data:
            raise ConfigError("OVF JSON requires 'family' and 'v0'")
        kwargs = {k: data.get(k) for k in _JSON_KEYS}
        if kwargs["n"] is not None:
            kwargs["n"] = int(kwargs["n"])
        return cls(**kwargs)


def v_max(spec: OvfSpec) -> float:
    """Supremum of the OVF as headway grows without bound."""
    if spec.family == "bando":
        return spec.v0 * (1.0 + math.tanh(spec.ym / spec.y_tilde))
    if spec.family == "trigonometric":
        return spec.v0 * (math.pi / 2 + math.atan(spec.ym / spec.y_tilde))
    return spec.v0  # underwood, hyperbolic


def _check_domain(spec: OvfSpec, y) -> None:
    arr = np.asarray(y, dtype=float)
    if np.any(arr < 0):
        raise DomainError("headway must be non-negative")
    if spec.family == "underwood" and np.any(arr == 0):
        raise DomainError("underwood OVF is undefined at zero headway")


def ovf_value(spec: OvfSpec, y):
    """Evaluate the OVF. Accepts scalars or numpy arrays."""
    _check_domain(spec, y)
    return _value_raw(spec, y)


def _value_raw(spec: OvfSpec, y):
    y = np.asarray(y, dtype=float)
    if spec.family == "underwood":
        out = spec.v0 * np.exp(-2.0 * spec.ym / y)
    elif spec.family == "bando":
        out = spec.v0 * (np.tanh((y - spec.ym) / spec.y_tilde) + np.tanh(spec.ym / spec.y_tilde))
    elif spec.family == "trigonometric":
        out = spec.v0 * (np.arctan((y - spec.ym) / spec.y_tilde) + np.arctan(spec.ym / spec.y_tilde))
    else:
        w = np.maximum(y - spec.y0, 0.0)
        wn = w ** spec.n
        out = spec.v0 * wn / (spec.y_tilde ** spec.n + wn)
    return out if out.ndim else float(out)


def value_extended(spec: OvfSpec, y):
    """Total extension of the OVF used by the nonlinear integrator.

    Runaway trajectories may drive headways to or below zero; integration
    continues through them (collisions are flagged elsewhere).  Underwood is
    extended continuously by its y -> 0+ limit (0); bando/trigonometric are
    already entire; hyperbolic is 0 below y0.
    """
    y = np.asarray(y, dtype=float)
    if spec.family == "underwood":
        return spec.v0 * np.exp(-2.0 * spec.ym / np.maximum(y, 1e-300))
    if spec.family == "hyperbolic":
        return _value_raw(spec, np.maximum(y, spec.y0))
    return _value_raw(spec, y)


def ovf_derivative(spec: OvfSpec, y, order: int):
    """Closed-form derivative of the OVF, order 1, 2 or 3.

    No finite differencing happens here; each family is differentiated
    analytically.
    """
    if order not in (1, 2, 3):
        raise DomainError("order must be 1, 2 or 3")
    _check_domain(spec, y)
    y = np.asarray(y, dtype=float)
    if spec.family == "underwood":
        g = 2.0 * spec.ym
        v = spec.v0 * np.exp(-g / y)
        if order == 1:
            out = v * g / y**2
        elif order == 2:
            out = v * (g**2 / y**4 - 2 * g / y**3)
        else:
            out = v * (g**3 / y**6 - 6 * g**2 / y**5 + 6 * g / y**4)
    elif spec.family == "bando":
        yt = spec.y_tilde
        x = (y - spec.ym) / yt
        sech2 = 1.0 / np.cosh(x) ** 2
        if order == 1:
            out = spec.v0 / yt * sech2
        elif order == 2:
            out = -2.0 * spec.v0 / yt**2 * sech2 * np.tanh(x)
        else:
            out = 2.0 * spec.v0 / yt**3 * sech2 * (2.0 * np.tanh(x) ** 2 - sech2)
    elif spec.family == "trigonometric":
        yt = spec.y_tilde
        x = (y - spec.ym) / yt
        den = 1.0 + x**2
        if order == 1:
            out = spec.v0 / yt / den
        elif order == 2:
            out = -2.0 * spec.v0 / yt**2 * x / den**2
        else:
            out = 2.0 * spec.v0 / yt**3 * (3.0 * x**2 - 1.0) / den**3
    else:
        out = _hyperbolic_derivative(spec, y, order)
    return out if np.ndim(out) else float(out)


def _hyperbolic_derivative(spec: OvfSpec, y, order):
    n, c = spec.n, spec.y_tilde ** spec.n
    w = np.asarray(y, dtype=float) - spec.y0
    flat = w <= 0
    w = np.where(flat, 1.0, w)  # dummy, masked below
    u = w**n
    u1 = n * w ** (n - 1)
    u2 = n * (n - 1) * w ** (n - 2) if n >= 2 else np.zeros_like(w)
    u3 = n * (n - 1) * (n - 2) * w ** (n - 3) if n >= 3 else np.zeros_like(w)
    cu = c + u
    if order == 1:
        out = spec.v0 * c * u1 / cu**2
    elif order == 2:
        out = spec.v0 * c * (u2 * cu - 2 * u1**2) / cu**3
    else:
        nnum = u2 * cu - 2 * u1**2
        nprime = u3 * cu - 3 * u1 * u2
        out = spec.v0 * c * (nprime * cu - 3 * nnum * u1) / cu**4
    return np.where(flat, 0.0, out)


def ovf_inverse(spec: OvfSpec, v: float) -> float:
    """Headway at which the OVF attains velocity v, for 0 < v < v_max.

    Underwood and bando invert in closed form; the other families bisect on
    the monotone branch and polish with Newton steps.
    """
    vm = v_max(spec)
    if not (0.0 < v < vm):
        raise RangeError(f"velocity {v} outside attainable range (0, {vm})")
    if spec.family == "underwood":
        return 2.0 * spec.ym / math.log(spec.v0 / v)
    if spec.family == "bando":
        arg = v / spec.v0 - math.tanh(spec.ym / spec.y_tilde)
        return spec.ym + spec.y_tilde * math.atanh(arg)
    lo = spec.y0 if spec.family == "hyperbolic" else 0.0
    hi = max(lo + 1.0, 2.0 * (spec.ym or 1.0))
    while _value_raw(spec, hi) <= v:
        hi = lo + 2.0 * (hi - lo)
        if hi - lo > 1e12:
            raise ConvergenceError("bisection bracket for OVF inverse did not close")
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if _value_raw(spec, mid) < v:
            lo = mid
        else:
            hi = mid
    y = 0.5 * (lo + hi)
    for _ in range(4):  # Newton polish toward machine precision
        slope = ovf_derivative(spec, y, 1)
        if slope <= 0:
            break
        y -= (_value_raw(spec, y) - v) / slope
    if abs(_value_raw(spec, y) - v) > 1e-10 * spec.v0:
        raise ConvergenceError("OVF inverse did not reach the requested accuracy")
    return float(y)
