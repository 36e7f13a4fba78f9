"""Riemann-Stieltjes quadrature of delay measures on a uniform history grid.

Produces weights over sample offsets theta_s = -s*dt such that
sum_s w_s * g(theta_s) approximates int g dEta for piecewise-linear g, and is
exact in total mass: sum_s w_s equals the measure's total variation.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import HistoryGapError
from .model import DelayMeasure


def _exp_moments(t: float, a: float, b: float) -> tuple[float, float]:
    """(int e^{t x} dx, int x e^{t x} dx) over [a, b]."""
    if abs(t) < 1e-10:
        return b - a, 0.5 * (b * b - a * a)
    ea, eb = math.exp(t * a), math.exp(t * b)
    i0 = (eb - ea) / t
    i1 = (b / t - 1.0 / (t * t)) * eb - (a / t - 1.0 / (t * t)) * ea
    return i0, i1


def _accumulate_density(weights: np.ndarray, dt: float, a: float, b: float,
                        kind: str, param: float):
    """Spread the density (exponential rate `param`, or constant value `param`)
    on [a, b] onto the hat functions of the uniform theta grid."""
    if b <= a:
        return
    n = len(weights)
    # sample s covers theta in [-(s+1)dt, -s dt]
    s_lo = max(int(math.floor(-b / dt)), 0)
    s_hi = min(int(math.ceil(-a / dt)), n - 1)
    for s in range(s_lo, s_hi):
        th_hi = -s * dt        # upper end of the interval (closer to 0)
        th_lo = -(s + 1) * dt
        lo = max(a, th_lo)
        hi = min(b, th_hi)
        if hi <= lo:
            continue
        if kind == "exp":
            i0, i1 = _exp_moments(param, lo, hi)
        else:
            i0 = param * (hi - lo)
            i1 = param * 0.5 * (hi * hi - lo * lo)
        # hat at s rises from th_lo to th_hi; hat at s+1 falls
        weights[s] += (i1 - th_lo * i0) / dt
        weights[s + 1] += (th_hi * i0 - i1) / dt


def _accumulate_atom(weights: np.ndarray, dt: float, pos: float, mass: float):
    s_frac = -pos / dt
    s0 = int(math.floor(s_frac))
    frac = s_frac - s0
    if s0 >= len(weights) - 1:
        s0, frac = len(weights) - 2, 1.0
    weights[s0] += mass * (1.0 - frac)
    weights[s0 + 1] += mass * frac


def delay_quadrature(measure: DelayMeasure, dt: float, n_samples: int):
    """Quadrature weights for the measure over offsets s = 0..n_samples-1.

    Raises HistoryGapError when the sampled window does not reach -r.
    """
    if dt <= 0 or n_samples < 2:
        raise HistoryGapError("need at least two history samples with dt > 0")
    coverage = (n_samples - 1) * dt
    if coverage < measure.r - 1e-9 * max(1.0, measure.r):
        raise HistoryGapError(
            f"history window {coverage} does not cover delay interval "
            f"[-{measure.r}, 0]")
    w = np.zeros(n_samples)
    if measure.kind == "dirac":
        _accumulate_atom(w, dt, -measure.r, 1.0)
    elif measure.kind == "exponential":
        _accumulate_density(w, dt, -measure.r, 0.0, "exp", measure.theta_rate)
    else:
        for pos, mass in measure.atoms:
            _accumulate_atom(w, dt, pos, mass)
        for (a, b), val in zip(zip(measure.density_edges, measure.density_edges[1:]),
                               measure.density_values):
            _accumulate_density(w, dt, max(a, -measure.r), min(b, 0.0), "const", val)
    offsets = np.nonzero(w)[0]
    return offsets, w[offsets]
