"""Fixed-step time-domain integration of the platoon and limit-cycle metrics.

The integrator is explicit Euler with per-vehicle circular delay lookup:
delays are rounded to whole steps (error at most Ts/2) and the pre-history
(t < 0) is the constant initial state.  The default initial state is the
uniform-flow equilibrium, so any excitation comes from the leader profile
alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BlowUpError, ConfigError, DomainError, NonStationaryError
from .leader import Constant, LeaderProfile  # noqa: F401  (re-export)
from .model import PlatoonConfig, equilibrium
from .ovf import value_extended
from .stability import critical_delay, hopf_point

BLOWUP_LIMIT = 1e6
_GUARD_EVERY = 128


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled platoon trajectory.

    v and y are (samples, n) arrays of relative velocities and headways;
    leader_v holds the leader's velocity at each sample.
    """

    ts: float
    t: np.ndarray
    v: np.ndarray
    y: np.ndarray
    leader_v: np.ndarray
    y_star: float
    delay_steps: tuple
    collision: bool
    collision_time: float | None
    config: PlatoonConfig
    history_policy: str = "constant-initial-state"

    @property
    def horizon(self) -> float:
        return float(self.t[-1])


def _integrate(config: PlatoonConfig, horizon: float, ts: float, kappas: np.ndarray,
               initial_v: np.ndarray, initial_y: np.ndarray):
    """Euler integration batched over exogenous gains; returns (t, v, y, leader_v).

    State arrays have shape (samples, K, n).  A single recurrence is
    sequential by nature; batching amortizes the per-step cost across gains.
    """
    n = config.n
    a = config.a
    steps = int(round(horizon / ts))
    dsteps = np.round(np.array(config.tau) / ts).astype(int)
    kap = np.asarray(kappas, dtype=float)[:, None]
    k_count = kap.shape[0]

    v = np.zeros((steps + 1, k_count, n))
    y = np.zeros((steps + 1, k_count, n))
    v[0] = initial_v[None, :]
    y[0] = initial_y[None, :]

    tgrid = np.arange(steps + 1) * ts
    leader_v_now = np.asarray(config.leader.velocity(tgrid), dtype=float)
    leader_v_del = np.asarray(config.leader.velocity(tgrid - config.tau[0]), dtype=float)
    leader_a_now = np.asarray(config.leader.acceleration(tgrid), dtype=float)

    cols = np.arange(n)
    spec = config.ovf
    acc = np.empty((k_count, n))
    for k in range(steps):
        kd = np.maximum(k - dsteps, 0)
        vd = v[kd, :, cols].T                      # (K, n) own delayed velocities
        yd = y[kd, :, cols].T
        vals = value_extended(spec, yd)
        acc[:, 0] = leader_a_now[k] + kap[:, 0] * a * (leader_v_del[k] - vals[:, 0] - vd[:, 0])
        if n > 1:
            kdp = np.maximum(k - dsteps[:-1], 0)
            vals_prev = value_extended(spec, y[kdp, :, cols[:-1]].T)
            acc[:, 1:] = kap * a * (vals_prev - vals[:, 1:] - vd[:, 1:])
        v[k + 1] = v[k] + ts * acc
        y[k + 1] = y[k] + ts * kap * v[k]
        if k % _GUARD_EVERY == 0:
            peak = max(np.abs(v[k + 1]).max(), np.abs(y[k + 1]).max())
            if not peak < BLOWUP_LIMIT:
                raise BlowUpError(f"state magnitude {peak:g} exceeded {BLOWUP_LIMIT:g} at t={k * ts:g}")
    peak = max(np.abs(v).max(), np.abs(y).max())
    if not peak < BLOWUP_LIMIT:
        raise BlowUpError(f"state magnitude {peak:g} exceeded {BLOWUP_LIMIT:g}")
    return tgrid, v, y, leader_v_now


def _check_sim_args(config: PlatoonConfig, horizon: float, ts: float):
    if ts <= 0:
        raise ConfigError("ts must be positive")
    if horizon <= max(config.tau):
        raise ConfigError("horizon must exceed the longest delay")


def _initial_state(config: PlatoonConfig, initial):
    eq = equilibrium(config)
    if initial is None:
        return np.zeros(config.n), np.full(config.n, eq.y_star), eq
    v0, y0 = initial
    v0 = np.asarray(v0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    if v0.shape != (config.n,) or y0.shape != (config.n,):
        raise ConfigError("initial state must provide n velocities and n headways")
    return v0, y0, eq


def _wrap(config, ts, tgrid, v, y, leader_v, y_star, dsteps) -> Trajectory:
    collide = y.min() <= 0.0
    ct = float(tgrid[np.argmax((y <= 0.0).any(axis=1))]) if collide else None
    return Trajectory(ts=ts, t=tgrid, v=v, y=y, leader_v=leader_v, y_star=y_star,
                      delay_steps=tuple(int(d) for d in dsteps),
                      collision=bool(collide), collision_time=ct, config=config)


def simulate(config: PlatoonConfig, horizon: float, ts: float = 1e-4, initial=None) -> Trajectory:
    """Integrate the nonlinear platoon over [0, horizon].

    initial, when given, is a (velocities, headways) pair; by default the
    platoon starts at equilibrium and the leader profile supplies the
    excitation.  Raises BlowUpError on runaway; a non-positive headway only
    sets the collision flag.
    """
    _check_sim_args(config, horizon, ts)
    v0, y0, eq = _initial_state(config, initial)
    tgrid, v, y, leader_v = _integrate(config, horizon, ts, np.array([config.kappa]), v0, y0)
    dsteps = np.round(np.array(config.tau) / ts).astype(int)
    return _wrap(config, ts, tgrid, v[:, 0, :], y[:, 0, :], leader_v, eq.y_star, dsteps)


def simulate_linear(config: PlatoonConfig, horizon: float, ts: float = 1e-4, initial=None) -> Trajectory:
    """Integrate the gain-scaled linearized dynamics (perturbation form).

    The leader is held at its settled velocity; the trajectory's headways are
    y_star plus the headway perturbation.
    """
    _check_sim_args(config, horizon, ts)
    v0, y0, eq = _initial_state(config, initial)
    n, a, kap = config.n, config.a, config.kappa
    d = eq.d
    steps = int(round(horizon / ts))
    dsteps = np.round(np.array(config.tau) / ts).astype(int)
    v = np.zeros((steps + 1, n))
    u = np.zeros((steps + 1, n))
    v[0] = v0
    u[0] = y0 - eq.y_star
    cols = np.arange(n)
    for k in range(steps):
        kd = np.maximum(k - dsteps, 0)
        vd = v[kd, cols]
        ud = u[kd, cols]
        acc = np.empty(n)
        acc[0] = kap * (-d * ud[0] - a * vd[0])
        if n > 1:
            kdp = np.maximum(k - dsteps[:-1], 0)
            acc[1:] = kap * (d * u[kdp, cols[:-1]] - d * ud[1:] - a * vd[1:])
        v[k + 1] = v[k] + ts * acc
        u[k + 1] = u[k] + ts * kap * v[k]
    tgrid = np.arange(steps + 1) * ts
    leader_v = np.full(steps + 1, config.x0_dot_eq)
    return _wrap(config, ts, tgrid, v, eq.y_star + u, leader_v, eq.y_star, dsteps)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def _retained(trajectory: Trajectory, vehicle_index: int, settle_fraction: float) -> np.ndarray:
    if not 1 <= vehicle_index <= trajectory.v.shape[1]:
        raise DomainError("vehicle_index out of range (1-based)")
    if not 0.0 <= settle_fraction < 1.0:
        raise DomainError("settle_fraction must lie in [0, 1)")
    start = int(settle_fraction * len(trajectory.t))
    return trajectory.v[start:, vehicle_index - 1]


def limit_cycle_amplitude(trajectory: Trajectory, vehicle_index: int,
                          settle_fraction: float = 0.5) -> float:
    """Half the peak-to-peak of a vehicle's relative velocity after settling.

    Returns 0 when the retained window is flat (peak-to-peak below 1e-6);
    raises NonStationaryError when the two halves of the window still differ
    by more than 5 percent in amplitude.
    """
    seg = _retained(trajectory, vehicle_index, settle_fraction)
    ptp = float(seg.max() - seg.min())
    if ptp < 1e-6:
        return 0.0
    half = len(seg) // 2
    amp1 = float(seg[:half].max() - seg[:half].min()) / 2.0
    amp2 = float(seg[half:].max() - seg[half:].min()) / 2.0
    if abs(amp1 - amp2) > 0.05 * max(amp1, amp2):
        raise NonStationaryError(
            f"amplitude still drifting: {amp1:.6g} vs {amp2:.6g} over half-windows")
    return ptp / 2.0


def oscillation_count(trajectory: Trajectory, vehicle_index: int, transient_cut: float) -> int:
    """Sign changes of the headway deviation after the transient cut."""
    if transient_cut >= trajectory.horizon:
        raise DomainError("transient_cut must be smaller than the horizon")
    start = int(math.ceil(transient_cut / trajectory.ts))
    dev = trajectory.y[start:, vehicle_index - 1] - trajectory.y_star
    signs = np.sign(dev)
    signs = signs[signs != 0.0]
    if len(signs) < 2:
        return 0
    return int(np.sum(signs[1:] != signs[:-1]))


def measure_cycle_frequency(trajectory: Trajectory, vehicle_index: int,
                            settle_fraction: float = 0.5) -> float:
    """Angular frequency [rad/s] from mean-crossing intervals of the cycle."""
    seg = _retained(trajectory, vehicle_index, settle_fraction)
    seg = seg - seg.mean()
    signs = np.sign(seg)
    signs[signs == 0] = 1.0
    idx = np.where(signs[1:] != signs[:-1])[0]
    if len(idx) < 4:
        raise DomainError("too few oscillations to measure a frequency")
    periods = 2.0 * np.diff(idx) * trajectory.ts
    return float(2.0 * math.pi / periods.mean())


def fit_decay_rate(t: np.ndarray, signal: np.ndarray) -> float:
    """Exponential decay rate of an envelope, from log-linear peak regression."""
    mag = np.abs(signal)
    top = mag.max()
    if top == 0.0:
        raise DomainError("signal is identically zero")
    interior = mag[1:-1]
    is_peak = (interior >= mag[:-2]) & (interior >= mag[2:]) & (interior > 1e-12 * top)
    idx = np.where(is_peak)[0] + 1
    if len(idx) < 3:
        raise DomainError("too few envelope peaks to fit a decay rate")
    coeffs = np.polyfit(t[idx], np.log(mag[idx]), 1)
    return float(-coeffs[0])


def fit_sqrt_law(kappas, amplitudes, kappa_cr: float = 1.0) -> tuple:
    """Least-squares fit A = C sqrt(kappa - kappa_cr); returns (C, R^2)."""
    k = np.asarray(kappas, dtype=float)
    amp = np.asarray(amplitudes, dtype=float)
    if np.any(k <= kappa_cr):
        raise DomainError("sqrt-law fit needs kappa values beyond kappa_cr")
    x = np.sqrt(k - kappa_cr)
    coef = float(np.dot(amp, x) / np.dot(x, x))
    resid = amp - coef * x
    total = amp - amp.mean()
    r2 = 1.0 - float(np.dot(resid, resid)) / float(np.dot(total, total))
    return coef, r2


# ---------------------------------------------------------------------------
# bifurcation sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BifurcationPoint:
    kappa: float
    amplitude: float
    status: str


def tune_to_boundary(config: PlatoonConfig, vehicle_index: int) -> PlatoonConfig:
    """Copy of config with the designated vehicle's delay set to its critical value."""
    eq = equilibrium(config)
    return config.with_delay(vehicle_index, critical_delay(config.a, eq.d_tilde))


def bifurcation_diagram(config: PlatoonConfig, kappa_values, vehicle_index: int,
                        horizon: float | None = None, ts: float = 1e-3,
                        settle_fraction: float = 0.5) -> list:
    """Simulated cycle amplitude of the designated vehicle per exogenous gain.

    Requires the designated vehicle to sit exactly on its stability boundary
    (critical gain 1); use tune_to_boundary first.  Gains below 1 are
    rejected.  Per-point failures are recorded in the status field instead of
    aborting the sweep.
    """
    kappa_values = [float(k) for k in kappa_values]
    if any(k < 1.0 for k in kappa_values):
        raise ConfigError("kappa values must be >= 1")
    eq = equilibrium(config)
    hp = hopf_point(config.a, eq.d_tilde, config.tau[vehicle_index - 1])
    if abs(hp.kappa_cr - 1.0) > 1e-9:
        raise ConfigError(
            f"designated vehicle has critical gain {hp.kappa_cr:.6f}; tune its delay first")
    if horizon is None:
        horizon = 400.0 / hp.omega0
    _check_sim_args(config, horizon, ts)
    v0, y0, _ = _initial_state(config, None)
    dsteps = np.round(np.array(config.tau) / ts).astype(int)

    points = []
    try:
        tgrid, v, y, leader_v = _integrate(config, horizon, ts, np.array(kappa_values), v0, y0)
        runs = [(k, _wrap(config, ts, tgrid, v[:, i, :], y[:, i, :], leader_v, eq.y_star, dsteps))
                for i, k in enumerate(kappa_values)]
    except BlowUpError:
        # a runaway gain poisons the whole batch; fall back to one run per gain
        runs = []
        for k in kappa_values:
            try:
                tgrid, v, y, leader_v = _integrate(config, horizon, ts, np.array([k]), v0, y0)
                runs.append((k, _wrap(config, ts, tgrid, v[:, 0, :], y[:, 0, :], leader_v,
                                      eq.y_star, dsteps)))
            except BlowUpError as exc:
                points.append(BifurcationPoint(kappa=k, amplitude=float("nan"),
                                               status=f"error: {exc}"))
    for k, traj in runs:
        try:
            amp = limit_cycle_amplitude(traj, vehicle_index, settle_fraction)
            points.append(BifurcationPoint(kappa=k, amplitude=amp, status="ok"))
        except NonStationaryError as exc:
            points.append(BifurcationPoint(kappa=k, amplitude=float("nan"),
                                           status=f"error: {exc}"))
    points.sort(key=lambda p: p.kappa)
    return points


# ---------------------------------------------------------------------------
# file emission
# ---------------------------------------------------------------------------

def write_trajectory_csv(trajectory: Trajectory, path, stride: int = 1) -> None:
    """CSV with header t,v_1..v_N,y_1..y_N,leader_v, one row per (strided) sample."""
    if stride < 1:
        raise ConfigError("stride must be >= 1")
    n = trajectory.v.shape[1]
    header = ",".join(["t"] + [f"v_{i + 1}" for i in range(n)]
                      + [f"y_{i + 1}" for i in range(n)] + ["leader_v"])
    fmt = "%.12g"
    sel = slice(None, None, stride)
    block = np.column_stack([trajectory.t[sel], trajectory.v[sel], trajectory.y[sel],
                             trajectory.leader_v[sel]])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in block:
            fh.write(",".join(fmt % x for x in row) + "\n")


def run_metadata(trajectory: Trajectory) -> dict:
    """Machine-readable record of how a trajectory was produced."""
    return {
        "config": trajectory.config.to_json_dict(),
        "ts": trajectory.ts,
        "horizon": trajectory.horizon,
        "samples": int(len(trajectory.t)),
        "delay_steps": list(trajectory.delay_steps),
        "history_policy": trajectory.history_policy,
        "y_star": trajectory.y_star,
        "flags": {
            "collision": trajectory.collision,
            "collision_time": trajectory.collision_time,
        },
    }
