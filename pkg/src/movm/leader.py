"""Lead-vehicle velocity profiles.

Every profile settles to a finite positive velocity with zero acceleration;
the profile's value for t < 0 is its value at t = 0 (constant pre-history).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class SmoothExponential:
    """v(t) = v_inf * (1 - exp(-rate t)); starts from rest, settles at v_inf."""

    v_inf: float
    rate: float

    def __post_init__(self):
        if not (self.v_inf > 0 and self.rate > 0):
            raise ConfigError("v_inf and rate must be positive")

    def velocity(self, t):
        t = np.asarray(t, dtype=float)
        out = self.v_inf * (1.0 - np.exp(-self.rate * np.maximum(t, 0.0)))
        return out if out.ndim else float(out)

    def acceleration(self, t):
        t = np.asarray(t, dtype=float)
        out = np.where(t < 0.0, 0.0, self.v_inf * self.rate * np.exp(-self.rate * np.maximum(t, 0.0)))
        return out if out.ndim else float(out)

    @property
    def v_equilibrium(self) -> float:
        return self.v_inf

    def settle_time(self, tol: float = 1e-9) -> float:
        """Time after which velocity stays within tol*v_inf of v_inf."""
        return -np.log(tol) / self.rate

    def to_json_dict(self) -> dict:
        return {"kind": "smooth_exponential", "v_inf": self.v_inf, "rate": self.rate}


@dataclass(frozen=True)
class Constant:
    v: float

    def __post_init__(self):
        if not self.v > 0:
            raise ConfigError("constant leader velocity must be positive")

    def velocity(self, t):
        t = np.asarray(t, dtype=float)
        out = np.full_like(t, self.v)
        return out if out.ndim else float(out)

    def acceleration(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        return out if out.ndim else float(out)

    @property
    def v_equilibrium(self) -> float:
        return self.v

    def settle_time(self, tol: float = 1e-9) -> float:
        return 0.0

    def to_json_dict(self) -> dict:
        return {"kind": "constant", "v": self.v}


@dataclass(frozen=True)
class PiecewiseLinear:
    """Velocity interpolated linearly between (t, v) knots, clamped outside."""

    knots: tuple

    def __post_init__(self):
        kn = tuple((float(t), float(v)) for t, v in self.knots)
        object.__setattr__(self, "knots", kn)
        if len(kn) < 1:
            raise ConfigError("piecewise-linear profile needs at least one knot")
        times = [t for t, _ in kn]
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise ConfigError("knot times must be strictly increasing")
        if not kn[-1][1] > 0:
            raise ConfigError("final velocity must be positive")

    def velocity(self, t):
        t = np.asarray(t, dtype=float)
        times = np.array([k[0] for k in self.knots])
        vels = np.array([k[1] for k in self.knots])
        out = np.interp(t, times, vels)
        return out if out.ndim else float(out)

    def acceleration(self, t):
        t = np.asarray(t, dtype=float)
        times = np.array([k[0] for k in self.knots])
        vels = np.array([k[1] for k in self.knots])
        slopes = np.zeros(len(times) + 1)
        if len(times) > 1:
            slopes[1:-1] = np.diff(vels) / np.diff(times)
        idx = np.searchsorted(times, t, side="right")
        out = slopes[idx]
        return out if out.ndim else float(out)

    @property
    def v_equilibrium(self) -> float:
        return self.knots[-1][1]

    def settle_time(self, tol: float = 1e-9) -> float:
        return self.knots[-1][0]

    def to_json_dict(self) -> dict:
        return {"kind": "piecewise_linear", "knots": [list(k) for k in self.knots]}


LeaderProfile = SmoothExponential | Constant | PiecewiseLinear

_KINDS = {
    "smooth_exponential": (SmoothExponential, {"v_inf", "rate"}),
    "constant": (Constant, {"v"}),
    "piecewise_linear": (PiecewiseLinear, {"knots"}),
}


def leader_from_json_dict(data: dict) -> LeaderProfile:
    if "kind" not in data:
        raise ConfigError("leader JSON requires 'kind'")
    kind = data["kind"]
    if kind not in _KINDS:
        raise ConfigError(f"unknown leader kind {kind!r}")
    cls, keys = _KINDS[kind]
    unknown = set(data) - keys - {"kind"}
    if unknown:
        raise ConfigError(f"unknown leader fields: {sorted(unknown)}")
    missing = keys - set(data)
    if missing:
        raise ConfigError(f"missing leader fields: {sorted(missing)}")
    kwargs = {k: data[k] for k in keys}
    if kind == "piecewise_linear":
        kwargs["knots"] = tuple(tuple(k) for k in kwargs["knots"])
    return cls(**kwargs)
