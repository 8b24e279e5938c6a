"""Platoon model: configuration, equilibrium, linearization, characteristic function.

The platoon state collects N relative velocities followed by N headways.
Each vehicle pair i carries its own reaction delay tau_i; pair i is driven
by pair i-1 (pair 1 by the leader), so the characteristic function of the
linearized dynamics factors into per-pair quasi-polynomials

    lambda^2 + kappa*a*lambda*e^(-lambda*tau_i) + kappa^2*d*e^(-lambda*tau_i),

with d = a * d_tilde the equilibrium coupling gain.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .leader import Constant, LeaderProfile, leader_from_json_dict
from .ovf import OvfSpec, ovf_derivative, ovf_inverse, v_max

MAX_VEHICLE_PAIRS = 32

_CONFIG_KEYS = {"n", "a", "tau", "ovf", "leader", "kappa", "x0_dot_eq"}


@dataclass(frozen=True)
class PlatoonConfig:
    """Full description of one platoon run.

    n vehicle pairs behind the leader, sensitivity a [1/s], per-pair reaction
    delays tau [s], an OVF, a leader profile settling at x0_dot_eq [m/s], and
    the exogenous gain kappa (1 recovers the physical model).
    """

    n: int
    a: float
    tau: tuple
    ovf: OvfSpec
    leader: LeaderProfile
    x0_dot_eq: float
    kappa: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "tau", tuple(float(t) for t in self.tau))
        if not (1 <= self.n <= MAX_VEHICLE_PAIRS):
            raise ConfigError(f"n must be in [1, {MAX_VEHICLE_PAIRS}]")
        if not self.a > 0:
            raise ConfigError("sensitivity a must be positive")
        if len(self.tau) != self.n:
            raise ConfigError("tau must list one delay per vehicle pair")
        if any(t < 0 for t in self.tau):
            raise ConfigError("delays must be non-negative")
        if not self.kappa > 0:
            raise ConfigError("kappa must be positive")
        if not (0.0 < self.x0_dot_eq < v_max(self.ovf)):
            raise ConfigError("x0_dot_eq must lie strictly inside the OVF range")
        if abs(self.leader.v_equilibrium - self.x0_dot_eq) > 1e-9 * max(1.0, self.x0_dot_eq):
            raise ConfigError("leader profile must settle at x0_dot_eq")

    def with_delay(self, vehicle_index: int, tau_value: float) -> "PlatoonConfig":
        """Copy of this config with vehicle_index's (1-based) delay replaced."""
        if not 1 <= vehicle_index <= self.n:
            raise ConfigError("vehicle_index out of range")
        tau = list(self.tau)
        tau[vehicle_index - 1] = float(tau_value)
        return replace(self, tau=tuple(tau))

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "a": self.a,
            "tau": list(self.tau),
            "ovf": self.ovf.to_json_dict(),
            "leader": self.leader.to_json_dict(),
            "kappa": self.kappa,
            "x0_dot_eq": self.x0_dot_eq,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "PlatoonConfig":
        unknown = set(data) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        missing = {"n", "a", "tau", "ovf", "leader", "x0_dot_eq"} - set(data)
        if missing:
            raise ConfigError(f"missing config fields: {sorted(missing)}")
        return cls(
            n=int(data["n"]),
            a=float(data["a"]),
            tau=tuple(data["tau"]),
            ovf=OvfSpec.from_json_dict(data["ovf"]),
            leader=leader_from_json_dict(data["leader"]),
            x0_dot_eq=float(data["x0_dot_eq"]),
            kappa=float(data.get("kappa", 1.0)),
        )


@dataclass(frozen=True)
class Equilibrium:
    """Uniform-flow equilibrium of a platoon configuration.

    v_star is identically zero; y_star is the headway at which the OVF meets
    the leader's settled velocity; d_tilde is the OVF slope there and
    d = a * d_tilde the equilibrium coefficient.
    """

    y_star: float
    d_tilde: float
    d: float
    v_star: float = 0.0


def equilibrium(config: PlatoonConfig) -> Equilibrium:
    y_star = ovf_inverse(config.ovf, config.x0_dot_eq)
    d_tilde = float(ovf_derivative(config.ovf, y_star, 1))
    return Equilibrium(y_star=y_star, d_tilde=d_tilde, d=config.a * d_tilde)


def linearized_matrices(config: PlatoonConfig) -> list:
    """Delay-indexed system matrices A_0 .. A_N of the linearized platoon.

    A_0 carries the headway integrators (identity in the lower-left block);
    A_k couples pair k's own delayed state and feeds pair k+1.  Indices follow
    the 1-based layout of the state [v_1..v_N, u_1..u_N].  The exogenous gain
    is not applied here; scale every matrix by kappa for the gain-scaled
    system.
    """
    n = config.n
    a = config.a
    d = equilibrium(config).d
    mats = []
    a0 = np.zeros((2 * n, 2 * n))
    a0[n:, :n] = np.eye(n)
    mats.append(a0)
    for k in range(1, n + 1):
        ak = np.zeros((2 * n, 2 * n))
        ak[k - 1, k - 1] = -a
        ak[k - 1, n + k - 1] = -d
        if k < n:
            ak[k, k - 1] = d
        mats.append(ak)
    return mats


def characteristic_value(lam: complex, a: float, d_tilde: float, tau_i: float, kappa: float) -> complex:
    """Per-pair characteristic function at lambda."""
    d = a * d_tilde
    exp_term = np.exp(-lam * tau_i)
    return lam * lam + kappa * a * lam * exp_term + kappa * kappa * d * exp_term


def characteristic_determinant(config: PlatoonConfig, lam: complex) -> complex:
    """det(lambda I - sum_k e^(-lambda tau_k) kappa A_k) of the full 2N system."""
    mats = linearized_matrices(config)
    kappa = config.kappa
    n = config.n
    m = lam * np.eye(2 * n, dtype=complex)
    m -= kappa * mats[0]  # tau_0 = 0
    for k in range(1, n + 1):
        m -= np.exp(-lam * config.tau[k - 1]) * kappa * mats[k]
    return complex(np.linalg.det(m))


def equilibrium_residual(config: PlatoonConfig) -> float:
    """Max |rhs| of the nonlinear dynamics at (v*, y*) with the leader settled.

    Uses a constant leader at x0_dot_eq so the equilibrium is exact; the
    result should vanish to rounding.
    """
    from .ovf import ovf_value

    eq = equilibrium(config)
    n, a, kappa = config.n, config.a, config.kappa
    vels = np.zeros(n)
    heads = np.full(n, eq.y_star)
    vals = ovf_value(config.ovf, heads)
    rhs = np.empty(2 * n)
    rhs[0] = kappa * a * (config.x0_dot_eq - vals[0] - vels[0])
    for k in range(1, n):
        rhs[k] = kappa * a * (vals[k - 1] - vals[k] - vels[k])
    rhs[n:] = kappa * vels
    return float(np.max(np.abs(rhs)))


# re-export for convenience; the leader lives in its own module to avoid cycles
__all__ = [
    "PlatoonConfig",
    "Equilibrium",
    "equilibrium",
    "linearized_matrices",
    "characteristic_value",
    "characteristic_determinant",
    "equilibrium_residual",
    "Constant",
    "MAX_VEHICLE_PAIRS",
]
