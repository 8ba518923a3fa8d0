"""Transport and relaxation observables computed from population time series.

Site populations n_m(t) are reduced to:

* W(t), the second moment of the excitation about a center j0 in centered
  site coordinates,
* M(t) = (1/t) * integral_0^t sqrt(W(tau) - W(0)) dtau, the integrated
  moment whose growth exponent discriminates ballistic (t^1) from diffusive
  (t^0.5) spreading,
* D(t) = log(L) + sum_m n_m log(n_m), the entropy distance from the uniform
  equilibrium distribution (natural log; zero exactly at uniformity),

plus least-squares power-law fits of M and first-crossing detection between
two D(t) curves for anomalous relaxation ordering.

Quadrature runs on the sampled output grid (trapezoid rule), matching how the
quantities would be evaluated from measured data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import DataQualityError, FitDomainError, SpecificationError
from .lattice import centered_positions

POPULATION_SUM_TOL = 1e-3
MIN_FIT_POINTS = 8


def second_moment(populations: np.ndarray, center: float) -> np.ndarray | float:
    """W = sum_m (j_m - center)^2 n_m with j_m the centered site coordinate.

    Accepts one population row or a (T, L) matrix (reduced along the last
    axis). center is real; fractional values handle mixtures whose centroid
    falls between sites.
    """
    populations = np.asarray(populations, dtype=float)
    x = centered_positions(populations.shape[-1])
    return np.sum((x - center) ** 2 * populations, axis=-1)


def population_centroid(populations_row: np.ndarray) -> float:
    """Population-weighted mean of the centered site coordinates."""
    row = np.asarray(populations_row, dtype=float)
    return float(np.sum(centered_positions(row.size) * row))


def integrated_moment(times: np.ndarray, w: np.ndarray) -> np.ndarray:
    """M(t_k) = trapezoidal integral of sqrt(max(W - W(0), 0)) over [0, t_k],
    divided by t_k; M at t=0 is 0 by definition.

    W - W(0) is clamped at zero before the square root: mixtures can dip
    transiently below their initial spread, and M is only meaningful as an
    expansion measure.
    """
    times = np.asarray(times, dtype=float)
    w = np.asarray(w, dtype=float)
    if times.shape != w.shape:
        raise SpecificationError("times and W series must have matching shapes")
    if times.size > 1 and np.any(np.diff(times) <= 0):
        raise SpecificationError("times must be strictly increasing")
    growth = np.sqrt(np.maximum(w - w[0], 0.0))
    integral = cumulative_trapezoid(growth, times, initial=0.0)
    m = np.zeros_like(integral)
    nonzero = times > times[0]
    m[nonzero] = integral[nonzero] / (times[nonzero] - times[0])
    return m


def distance_function(populations: np.ndarray, n_sites: int | None = None) -> np.ndarray | float:
    """Entropy distance from uniformity: log(L) + sum_m n_m log(n_m).

    Natural logarithm; the convention 0*log(0) = 0 applies, and tiny negative
    populations from sampling or integration noise are clamped to 0 before
    evaluation. Raises DataQualityError when a row's sum strays from 1 by
    more than 1e-3.
    """
    pops = np.atleast_2d(np.asarray(populations, dtype=float))
    if n_sites is None:
        n_sites = pops.shape[-1]
    elif n_sites != pops.shape[-1]:
        raise SpecificationError(
            f"n_sites={n_sites} does not match row length {pops.shape[-1]}"
        )
    sums = pops.sum(axis=-1)
    worst = float(np.max(np.abs(sums - 1.0)))
    if worst > POPULATION_SUM_TOL:
        raise DataQualityError(f"populations sum to 1 +- {worst:.3e}, beyond 1e-3")
    clamped = np.maximum(pops, 0.0)
    entropy = np.where(clamped > 0.0, clamped * np.log(np.where(clamped > 0, clamped, 1.0)), 0.0)
    d = np.log(n_sites) + entropy.sum(axis=-1)
    if np.asarray(populations).ndim == 1:
        return float(d[0])
    return d


class PowerLawFit(NamedTuple):
    beta: float
    stderr: float
    n_points: int


def fit_spreading_exponent(times: np.ndarray, m: np.ndarray,
                           window: tuple[float, float]) -> PowerLawFit:
    """Least-squares slope of log M versus log t over a fixed window.

    The window [t_a, t_b] must contain at least 8 grid points with strictly
    positive M (and positive t); violations raise FitDomainError. Windows are
    explicit because late times are contaminated by boundary reflections and
    must be pinned per experiment, never auto-detected.
    """
    times = np.asarray(times, dtype=float)
    m = np.asarray(m, dtype=float)
    if times.shape != m.shape:
        raise SpecificationError("times and M series must have matching shapes")
    t_a, t_b = float(window[0]), float(window[1])
    if not t_a < t_b:
        raise SpecificationError(f"fit window must satisfy t_a < t_b, got ({t_a}, {t_b})")
    mask = (times >= t_a) & (times <= t_b)
    if int(mask.sum()) < MIN_FIT_POINTS:
        raise FitDomainError(
            f"fit window [{t_a}, {t_b}] contains {int(mask.sum())} points, need >= {MIN_FIT_POINTS}"
        )
    if np.any(times[mask] <= 0):
        raise FitDomainError("fit window must exclude t = 0")
    if np.any(m[mask] <= 0):
        raise FitDomainError("M must be strictly positive inside the fit window")
    x = np.log(times[mask])
    y = np.log(m[mask])
    coeffs, cov = np.polyfit(x, y, 1, cov=True)
    return PowerLawFit(beta=float(coeffs[0]), stderr=float(np.sqrt(cov[0, 0])),
                       n_points=int(mask.sum()))


@dataclass
class CrossingReport:
    """First sign change between two relaxation curves.

    crossed: whether the first series ever drops below the second.
    time: linear-interpolation estimate of the first crossing instant.
    sustained: the ordering stays inverted from one grid step past the
    crossing through the end of the series.
    """

    crossed: bool
    time: float | None
    sustained: bool


def detect_mpemba_crossing(times: np.ndarray, d_far: np.ndarray,
                           d_near: np.ndarray) -> CrossingReport:
    """Locate where the initially-farther curve first falls below the nearer.

    d_far must start at or above d_near. Equal series report no crossing
    rather than an error.
    """
    times = np.asarray(times, dtype=float)
    d_far = np.asarray(d_far, dtype=float)
    d_near = np.asarray(d_near, dtype=float)
    if not (times.shape == d_far.shape == d_near.shape):
        raise SpecificationError("crossing detection needs aligned series")
    diff = d_far - d_near
    if diff[0] < 0:
        raise SpecificationError(
            "first series must start at or above the second "
            f"(D_far(0)={d_far[0]:.6g} < D_near(0)={d_near[0]:.6g})"
        )
    above = diff[:-1] > 0
    below_next = diff[1:] <= 0
    hits = np.flatnonzero(above & below_next)
    if hits.size == 0:
        return CrossingReport(crossed=False, time=None, sustained=False)
    k = int(hits[0])
    frac = diff[k] / (diff[k] - diff[k + 1])
    t_cross = float(times[k] + frac * (times[k + 1] - times[k]))
    margin = times[k + 1] - times[k]
    tail = times >= t_cross + margin
    sustained = bool(np.all(diff[tail] < 0))
    return CrossingReport(crossed=True, time=t_cross, sustained=sustained)


@dataclass
class ObservableSeries:
    """Population time series together with its derived observable columns."""

    times: np.ndarray
    populations: np.ndarray
    second_moment: np.ndarray
    integrated_moment: np.ndarray
    distance: np.ndarray
    center: float


def compute_observables(times: np.ndarray, populations: np.ndarray,
                        center: float | None = None) -> ObservableSeries:
    """Build the full observable set from a (T, L) population matrix.

    center defaults to the population centroid at t=0 (centered coordinates),
    which is 0 for a start on the middle site.
    """
    times = np.asarray(times, dtype=float)
    populations = np.asarray(populations, dtype=float)
    if populations.ndim != 2 or populations.shape[0] != times.size:
        raise SpecificationError("populations must be a (len(times), L) matrix")
    if center is None:
        center = population_centroid(populations[0])
    w = second_moment(populations, center)
    return ObservableSeries(
        times=times,
        populations=populations,
        second_moment=w,
        integrated_moment=integrated_moment(times, w),
        distance=np.asarray(distance_function(populations), dtype=float),
        center=float(center),
    )
