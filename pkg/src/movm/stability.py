"""Stability, non-oscillatory-convergence and rate-of-convergence analysis.

All quantities are per vehicle pair: a pair with delay tau is locally stable
iff tau < critical_delay(a, d_tilde), and loses stability through a pair of
conjugate roots crossing the imaginary axis (a Hopf bifurcation when the
exogenous gain is the parameter).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, DomainError, NotSettledError
from .spectrum import (
    _count_right_of,
    _im_bound,
    rightmost_root,
    rightmost_root_real_part,
    shifted_char_factory,
)

M_MINUS = -2.0 - math.sqrt(2.0)
M_PLUS = -2.0 + math.sqrt(2.0)

SIGMA_BISECTION_TOL = 1e-6
RATE_CROSS_CHECK_TOL = 1e-5


@dataclass(frozen=True)
class HopfPoint:
    """Imaginary-axis crossing of one vehicle pair.

    chi is the frequency scale of the crossing, omega0 the crossing angular
    frequency at the pair's own delay, kappa_cr the critical exogenous gain
    and tau_cr the critical delay at unit gain.
    """

    chi: float
    omega0: float
    kappa_cr: float
    tau_cr: float


def no_delay_stable(a: float, d_tilde: float) -> bool:
    """Delay-free platoon pairs are stable exactly when both gains are positive."""
    return a > 0 and d_tilde > 0


def small_delay_sufficient(a: float, d_tilde: float, tau_i: float) -> bool:
    """First-order-in-delay sufficient condition for local stability."""
    if tau_i < 0:
        raise DomainError("tau_i must be non-negative")
    return max(a, d_tilde) * tau_i < 1.0


def chi(a: float, d_tilde: float) -> float:
    """Crossing frequency scale sqrt(a (a + sqrt(a^2 + 4 d_tilde^2)) / 2)."""
    if a <= 0 or d_tilde <= 0:
        raise DomainError("a and d_tilde must be positive")
    return math.sqrt(a * (a + math.sqrt(a * a + 4.0 * d_tilde * d_tilde)) / 2.0)


def critical_delay(a: float, d_tilde: float) -> float:
    """Delay bound for local stability: arctan(chi/d_tilde)/chi, arctan in (0, pi/2)."""
    c = chi(a, d_tilde)
    return math.atan2(c, d_tilde) / c


def hopf_point(a: float, d_tilde: float, tau_i: float) -> HopfPoint:
    """Crossing frequency and critical gain for a pair with delay tau_i."""
    if tau_i <= 0:
        raise DegenerateInputError("hopf_point requires tau_i > 0 (no finite critical gain at zero delay)")
    c = chi(a, d_tilde)
    angle = math.atan2(c, d_tilde)
    return HopfPoint(chi=c, omega0=angle / tau_i, kappa_cr=angle / (tau_i * c),
                     tau_cr=angle / c)


def _inverse_gain_derivative(a: float, d_tilde: float, tau_i: float) -> complex:
    """(d lambda / d kappa)^(-1) at the pair's crossing, by implicit differentiation."""
    hp = hopf_point(a, d_tilde, tau_i)
    lam = 1j * hp.omega0
    kap = hp.kappa_cr
    d = a * d_tilde
    return kap / lam + kap * tau_i * (a * lam + kap * d) / (a * lam + 2.0 * kap * d)


def transversality(a: float, d_tilde: float, tau_i: float) -> float:
    """Real part of (d lambda/d kappa)^(-1) at the crossing; positive.

    Positivity means the crossing pair moves left-to-right as the gain grows,
    so stability, once lost, is not recovered by increasing the gain.
    """
    return _inverse_gain_derivative(a, d_tilde, tau_i).real


def crossing_speed(a: float, d_tilde: float, tau_i: float) -> float:
    """Real part of d lambda/d kappa at the crossing (same sign as transversality)."""
    return (1.0 / _inverse_gain_derivative(a, d_tilde, tau_i)).real


def noc_boundary(a: float, d_tilde: float) -> float | None:
    """Delay below which the real-root tangency of the pair exists.

    Returns None when the closed form gives no admissible boundary (log
    argument not positive, or the value not inside (0, critical_delay)).
    """
    if a <= 0 or d_tilde <= 0:
        raise DomainError("a and d_tilde must be positive")
    m = M_MINUS
    log_arg = -a * (m + 1.0) / (m * m * d_tilde)
    if log_arg <= 0.0:
        return None
    tau_noc = math.log(log_arg) / (m * d_tilde)
    if not 0.0 < tau_noc < critical_delay(a, d_tilde):
        return None
    return tau_noc


def noc_tangency_residuals(a: float, d_tilde: float) -> tuple:
    """Residuals of the two real-root tangency conditions at the boundary.

    Evaluated at sigma = d_tilde * M_MINUS and tau = the boundary delay:
    (a sigma + d)^2 - sigma^4 e^(2 sigma tau) and a^2 - 2 sigma^2 e^(2 sigma tau).
    Returns (None, None) when no boundary exists.
    """
    tau_noc = noc_boundary(a, d_tilde)
    if tau_noc is None:
        return None, None
    sigma = d_tilde * M_MINUS
    d = a * d_tilde
    e2 = math.exp(2.0 * sigma * tau_noc)
    r1 = (a * sigma + d) ** 2 - sigma**4 * e2
    r2 = a * a - 2.0 * sigma**2 * e2
    return r1, r2


def rate_of_convergence(a: float, d_tilde: float, tau_i: float, tol: float = SIGMA_BISECTION_TOL) -> float:
    """Largest exponential decay rate sigma* [1/s] of a stable pair.

    Bisects on the decay rate, testing whether the rate-shifted
    characteristic equation keeps every root in the open left half-plane,
    and cross-checks the result against the negated rightmost-root real part.
    Returns 0 at or beyond the stability boundary.
    """
    if a <= 0 or d_tilde <= 0 or tau_i < 0:
        raise DomainError("invalid parameters")
    if tau_i >= critical_delay(a, d_tilde):
        return 0.0
    if tau_i == 0.0:
        roots = np.roots([1.0, a, a * d_tilde])
        return float(-np.max(roots.real))

    d = a * d_tilde
    c = chi(a, d_tilde)
    im_floor = 4 * max(math.atan2(c, d_tilde) / tau_i, c) + 10.0 / tau_i

    def shifted_stable(s: float) -> bool:
        f = shifted_char_factory(a, d_tilde, tau_i, s * tau_i)
        es = math.exp(s * tau_i)
        # |lam|^2 <= 2s|lam| + a es |lam| + (d + a s) es + s^2 on Re >= 0
        b = 2.0 * s + a * es
        ccoef = (d + a * s) * es + s * s
        re_hi = (b + math.sqrt(b * b + 4.0 * ccoef)) / 2.0 + 1.0
        bound = lambda sig: _im_bound(a, d_tilde, tau_i, 1.0, sig) + b + 2.0 * s
        n, _ = _count_right_of(f, 0.0, re_hi, im_floor, bound)
        return n == 0

    lo, hi = 0.0, 1.0
    while shifted_stable(hi):
        lo, hi = hi, hi * 2.0
        if hi > 1e6:
            raise DomainError("decay rate did not bracket")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if shifted_stable(mid):
            lo = mid
        else:
            hi = mid
    sigma_star = 0.5 * (lo + hi)
    cross = -rightmost_root_real_part(a, d_tilde, tau_i, 1.0)
    if abs(sigma_star - cross) > max(RATE_CROSS_CHECK_TOL, 2 * tol):
        raise DomainError(
            f"rate bisection {sigma_star:.8f} disagrees with rightmost root {cross:.8f}")
    return sigma_star


def settling_time(trajectory, epsilon: float, equilibrium) -> tuple:
    """Per-pair settling times and their total.

    t_i is the first time after which pair i's relative velocity and headway
    deviation both stay within the epsilon band to the end of the horizon.
    Raises NotSettledError if some pair never stays in band.
    """
    t = trajectory.t
    inside = (np.abs(trajectory.v) <= epsilon) & (
        np.abs(trajectory.y - equilibrium.y_star) <= epsilon)
    times = []
    for i in range(trajectory.v.shape[1]):
        col = inside[:, i]
        if not col[-1]:
            raise NotSettledError(f"vehicle pair {i + 1} never settles into the band")
        bad = np.where(~col)[0]
        times.append(float(t[bad[-1] + 1]) if len(bad) else 0.0)
    return times, float(sum(times))


@dataclass(frozen=True)
class PairStability:
    tau_i: float
    tau_cr: float
    tau_noc: float | None
    sigma: float
    small_delay_sufficient: bool
    locally_stable: bool
    non_oscillatory: bool


@dataclass(frozen=True)
class StabilityReport:
    pairs: tuple
    m_minus: float = M_MINUS
    m_plus: float = M_PLUS


def stability_report(config) -> StabilityReport:
    """Per-pair stability summary for a full platoon configuration."""
    from .model import equilibrium as model_equilibrium

    eq = model_equilibrium(config)
    a, dt = config.a, eq.d_tilde
    tau_cr = critical_delay(a, dt)
    tau_noc = noc_boundary(a, dt)
    pairs = []
    for tau_i in config.tau:
        stable = tau_i < tau_cr
        pairs.append(PairStability(
            tau_i=tau_i,
            tau_cr=tau_cr,
            tau_noc=tau_noc,
            sigma=rate_of_convergence(a, dt, tau_i),
            small_delay_sufficient=small_delay_sufficient(a, dt, tau_i),
            locally_stable=stable,
            non_oscillatory=(tau_noc is not None and tau_i < tau_noc),
        ))
    return StabilityReport(pairs=tuple(pairs))


def write_stability_chart(path, a_values, d_tilde: float, tau: float) -> None:
    """CSV chart over a sensitivity sweep: a,d_tilde,tau_cr,tau_noc,sigma.

    The tau_noc field is left empty where no boundary exists; sigma is the
    decay rate at the given delay.  Formatting is fixed at 12 significant
    digits so identical inputs produce byte-identical files.
    """
    fmt = "%.12g"
    lines = ["a,d_tilde,tau_cr,tau_noc,sigma"]
    for a in a_values:
        tau_cr = critical_delay(a, d_tilde)
        tau_noc = noc_boundary(a, d_tilde)
        sigma = rate_of_convergence(a, d_tilde, tau)
        noc_field = fmt % tau_noc if tau_noc is not None else ""
        lines.append(",".join([fmt % a, fmt % d_tilde, fmt % tau_cr, noc_field, fmt % sigma]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


__all__ = [
    "HopfPoint",
    "M_MINUS",
    "M_PLUS",
    "chi",
    "critical_delay",
    "crossing_speed",
    "hopf_point",
    "no_delay_stable",
    "noc_boundary",
    "noc_tangency_residuals",
    "rate_of_convergence",
    "rightmost_root",
    "rightmost_root_real_part",
    "settling_time",
    "small_delay_sufficient",
    "stability_report",
    "StabilityReport",
    "PairStability",
    "transversality",
    "write_stability_chart",
]
