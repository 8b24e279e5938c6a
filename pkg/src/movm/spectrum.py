"""Rightmost characteristic roots of the per-pair delay system.

Two independent engines:

* argument-principle zero counting on rectangles with bisection over the
  real part (primary); contours refine adaptively until every phase step is
  below pi/2, and the rectangle edge is jittered off any root it grazes;
* Chebyshev collocation of the solution operator's generator, whose
  eigenvalues approximate the spectrum (cross-check and bracket seed).

Every public call runs both and insists they agree.
"""

from __future__ import annotations

import functools
import math

import numpy as np

from .errors import ConvergenceError

CROSS_CHECK_TOL = 1e-4
_COLLOC_ORDERS = (40, 80)


def pair_char(lam, a, d_tilde, tau, kappa):
    """Vectorized per-pair characteristic function."""
    d = a * d_tilde
    e = np.exp(-lam * tau)
    return lam * lam + kappa * a * lam * e + kappa * kappa * d * e


def shifted_char_factory(a, d_tilde, tau, sigma):
    """Characteristic function of the rate-shifted system (gain fixed at 1).

    sigma is the shift in the delay-normalized variable (sigma = s*tau for a
    physical shift s); the returned function's roots are the original roots
    translated right by sigma/tau.
    """
    d = a * d_tilde
    es = math.exp(sigma)
    s_phys = sigma / tau

    def f(lam):
        e = np.exp(-lam * tau)
        return (lam * lam - 2.0 * s_phys * lam + a * es * lam * e
                + (d - a * s_phys) * es * e + s_phys * s_phys)

    return f


# ---------------------------------------------------------------------------
# argument principle
# ---------------------------------------------------------------------------

def _edge_phase_sum(f, c0: complex, c1: complex, n0: int = 48, max_pts: int = 400000) -> float:
    """Total phase change of f along the segment c0 -> c1.

    Splits any sub-segment whose phase step exceeds pi/2; raises if a zero
    sits on the segment or the refinement budget runs out.
    """
    ts = np.linspace(0.0, 1.0, n0 + 1)
    pts = c0 + (c1 - c0) * ts
    vals = f(pts)
    while True:
        if np.min(np.abs(vals)) == 0.0:
            raise ConvergenceError("zero on contour")
        phase = np.angle(vals)
        steps = (np.diff(phase) + np.pi) % (2 * np.pi) - np.pi
        bad = np.abs(steps) > np.pi / 2
        if not bad.any():
            return float(steps.sum())
        if len(pts) > max_pts:
            raise ConvergenceError("contour refinement budget exceeded")
        idx = np.where(bad)[0]
        mids = (pts[idx] + pts[idx + 1]) / 2
        order = np.argsort(np.concatenate([np.arange(len(pts), dtype=float), idx + 0.5]))
        pts = np.concatenate([pts, mids])[order]
        vals = np.concatenate([vals, f(mids)])[order]


def count_zeros_in_rectangle(f, re_lo: float, re_hi: float, im_max: float) -> int:
    """Number of zeros of f (with multiplicity) inside the closed rectangle."""
    corners = [
        re_lo - 1j * im_max,
        re_hi - 1j * im_max,
        re_hi + 1j * im_max,
        re_lo + 1j * im_max,
        re_lo - 1j * im_max,
    ]
    total = sum(_edge_phase_sum(f, c0, c1) for c0, c1 in zip(corners[:-1], corners[1:]))
    winding = total / (2 * np.pi)
    n = int(round(winding))
    if abs(winding - n) > 1e-3:
        raise ConvergenceError(f"winding number {winding} not integral")
    return n


def _im_bound(a, d_tilde, tau, kappa, re_lo) -> float:
    # |lam|^2 <= (kappa a |lam| + kappa^2 d) e^(-re_lo tau) for any root right of re_lo
    d = a * d_tilde
    e = math.exp(max(-re_lo * tau, 0.0))
    return (kappa * a * e + math.sqrt((kappa * a * e) ** 2 + 4 * kappa**2 * d * e)) / 2 + 1.0


def _count_right_of(f, sigma, re_hi, im_floor, im_bound_fn):
    """Count zeros with real part > sigma, jittering sigma off any grazed root.

    Returns (count, effective sigma used).
    """
    scale = max(1.0, abs(sigma), re_hi - sigma)
    for attempt in range(8):
        sig = sigma if attempt == 0 else sigma + ((-1) ** attempt) * attempt * 1e-3 * scale
        om = max(im_floor, im_bound_fn(sig))
        for _ in range(3):
            try:
                return count_zeros_in_rectangle(f, sig, re_hi, om), sig
            except ConvergenceError:
                om *= 2.0  # inconclusive winding: widen and retry
    raise ConvergenceError("argument-principle count failed near sigma=%g" % sigma)


def rightmost_real_part_argument_principle(a, d_tilde, tau, kappa, tol=1e-7, seed=None) -> float:
    """Real part of the rightmost root, located purely by winding counts."""
    if tau == 0.0:
        roots = np.roots([1.0, kappa * a, kappa * kappa * a * d_tilde])
        return float(np.max(roots.real))
    d = a * d_tilde
    re_hi = (kappa * a + math.sqrt((kappa * a) ** 2 + 4 * kappa**2 * d)) / 2 + 1.0
    chi = math.sqrt(a * (a + math.sqrt(a * a + 4 * d_tilde * d_tilde)) / 2)
    im_floor = 4 * max(math.atan2(chi, d_tilde) / tau, chi) + 10.0 / tau
    f = lambda z: pair_char(z, a, d_tilde, tau, kappa)
    bound = lambda s: _im_bound(a, d_tilde, tau, kappa, s)

    lo = None
    if seed is not None:
        n, eff = _count_right_of(f, seed - 0.5, re_hi, im_floor, bound)
        if n > 0:
            lo = eff
    if lo is None:
        lo, step = 0.0, max(1.0, a)
        while True:
            n, eff = _count_right_of(f, lo, re_hi, im_floor, bound)
            if n > 0:
                lo = eff
                break
            lo -= step
            step *= 2.0
            if lo < -200.0 / tau - 10.0 * (a + d):
                raise ConvergenceError("no characteristic roots located")
    hi = re_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        n, eff = _count_right_of(f, mid, re_hi, im_floor, bound)
        if n > 0:
            lo = eff
        else:
            hi = eff
    return 0.5 * (lo + hi)


def has_zero_right_of(f, sigma, re_hi, im_floor, im_bound_fn) -> bool:
    n, _ = _count_right_of(f, sigma, re_hi, im_floor, im_bound_fn)
    return n > 0


# ---------------------------------------------------------------------------
# Chebyshev collocation of the generator
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=16)
def chebyshev_differentiation(m: int):
    """Chebyshev points on [-1, 1] and the differentiation matrix (Trefethen)."""
    if m == 0:
        return np.array([1.0]), np.zeros((1, 1))
    k = np.arange(m + 1)
    x = np.cos(np.pi * k / m)
    c = np.hstack((2.0, np.ones(m - 1), 2.0)) * (-1.0) ** k
    big_x = np.tile(x, (m + 1, 1)).T
    dx = big_x - big_x.T
    dmat = np.outer(c, 1.0 / c) / (dx + np.eye(m + 1))
    dmat -= np.diag(dmat.sum(axis=1))
    return x, dmat


def collocation_spectrum(a, d_tilde, tau, kappa, order: int) -> np.ndarray:
    """Approximate spectrum of one vehicle pair's 2D delay system."""
    if tau == 0.0:
        return np.roots([1.0, kappa * a, kappa * kappa * a * d_tilde])
    d = a * d_tilde
    _, dmat = chebyshev_differentiation(order)
    dth = dmat * (2.0 / tau)  # map [-1,1] -> [-tau, 0]
    m = order + 1
    gen = np.zeros((2 * m, 2 * m))
    gen[:m, :m] = dth
    gen[m:, m:] = dth
    # first collocation point is theta = 0: replace with the RHS functional
    gen[0, :] = 0.0
    gen[m, :] = 0.0
    gen[0, m - 1] = -kappa * a       # v(t - tau)
    gen[0, 2 * m - 1] = -kappa * d   # u(t - tau)
    gen[m, 0] = kappa                # du/dt = kappa v(t)
    return np.linalg.eigvals(gen)


def rightmost_root_collocation(a, d_tilde, tau, kappa, order: int) -> complex:
    ev = collocation_spectrum(a, d_tilde, tau, kappa, order)
    return complex(ev[np.argmax(ev.real)])


def _newton_polish(lam, a, d_tilde, tau, kappa, iters=50):
    d = a * d_tilde
    for _ in range(iters):
        e = np.exp(-lam * tau)
        fval = lam * lam + kappa * a * lam * e + kappa * kappa * d * e
        fp = 2 * lam + kappa * a * e - tau * (kappa * a * lam + kappa**2 * d) * e
        step = fval / fp
        lam = lam - step
        if abs(step) < 1e-15 * max(1.0, abs(lam)):
            break
    return lam


def rightmost_root(a, d_tilde, tau, kappa) -> complex:
    """Rightmost root as a complex number (collocation seed, Newton-polished)."""
    if tau == 0.0:
        roots = np.roots([1.0, kappa * a, kappa * kappa * a * d_tilde])
        return complex(roots[np.argmax(roots.real)])
    seed = rightmost_root_collocation(a, d_tilde, tau, kappa, _COLLOC_ORDERS[1])
    lam = _newton_polish(seed, a, d_tilde, tau, kappa)
    residual = abs(pair_char(lam, a, d_tilde, tau, kappa))
    if residual > 1e-8 * max(1.0, abs(lam) ** 2):
        raise ConvergenceError(f"root polish left residual {residual:g}")
    return complex(lam)


def rightmost_root_real_part(a, d_tilde, tau_i, kappa, tol=1e-7) -> float:
    """Rightmost-root real part, argument principle cross-checked by collocation.

    Raises ConvergenceError when the independent methods disagree beyond
    CROSS_CHECK_TOL.
    """
    if a <= 0 or d_tilde <= 0 or tau_i < 0 or kappa <= 0:
        raise ValueError("parameters must be positive (tau_i >= 0)")
    coarse = rightmost_root_collocation(a, d_tilde, tau_i, kappa, _COLLOC_ORDERS[0]).real
    fine = rightmost_root_collocation(a, d_tilde, tau_i, kappa, _COLLOC_ORDERS[1]).real
    if abs(coarse - fine) > CROSS_CHECK_TOL:
        raise ConvergenceError(
            f"collocation resolutions disagree: {coarse:.8f} vs {fine:.8f}")
    primary = rightmost_real_part_argument_principle(a, d_tilde, tau_i, kappa, tol=tol, seed=fine)
    if abs(primary - fine) > CROSS_CHECK_TOL:
        raise ConvergenceError(
            f"argument principle {primary:.8f} and collocation {fine:.8f} disagree")
    return primary
