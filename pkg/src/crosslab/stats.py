"""Descriptive statistics: Welch t-test, LOWESS and centred moving averages."""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from crosslab import kernels
from crosslab.dataset import BoatType, DepartureCountry, IncidentRecord
from crosslab.errors import (
    BothVariancesZero,
    CrossLabError,
    SampleTooSmall,
    TooFewPoints,
    WindowTooLarge,
)

#: smoother defaults used for figure trend lines
DEFAULT_LOWESS_BANDWIDTH = 0.4
DEFAULT_MA_WINDOW = 6

_EPS = 1e-16
_TINY = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the incomplete-beta continued fraction
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, 10_000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf(t: float, df: float) -> float:
    """Upper tail P(T > t) of Student's t with ``df`` (possibly fractional) degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    tail = 0.5 * regularized_beta(df / 2.0, 0.5, df / (df + t * t))
    return tail if t >= 0 else 1.0 - tail


@dataclass(frozen=True)
class TTestResult:
    mean_a: float
    mean_b: float
    difference: float
    t_statistic: float
    degrees_of_freedom: float
    p_value: float
    n_a: int = 0
    n_b: int = 0


def welch_ttest(sample_a, sample_b) -> TTestResult:
    """Two-sample t-test without the equal-variance assumption (two-sided)."""
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise SampleTooSmall(f"need at least 2 observations per sample, got {a.size} and {b.size}")
    ma, mb = float(a.mean()), float(b.mean())
    va, vb = float(a.var(ddof=1)), float(b.var(ddof=1))
    if va == 0.0 and vb == 0.0:
        raise BothVariancesZero("both samples are constant")
    qa, qb = va / a.size, vb / b.size
    se2 = qa + qb
    if se2 == 0.0:
        raise BothVariancesZero("sample variances underflow to zero")
    diff = ma - mb
    t = diff / math.sqrt(se2)
    # scale-free Satterthwaite form so tiny variances do not underflow
    ra, rb = qa / max(qa, qb), qb / max(qa, qb)
    df = (ra + rb) ** 2 / (ra * ra / (a.size - 1) + rb * rb / (b.size - 1))
    p = min(1.0, 2.0 * student_t_sf(abs(t), df))
    return TTestResult(ma, mb, diff, t, df, p, int(a.size), int(b.size))


def lowess(x, y, bandwidth: float = DEFAULT_LOWESS_BANDWIDTH) -> np.ndarray:
    """Local linear smoother with tricube weights over the ceil(bandwidth * n) nearest points.

    ``x`` must be sorted ascending. No robustness iterations are done.
    """
    x = np.ascontiguousarray(x, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise CrossLabError("x and y must be 1-D arrays of equal length")
    n = x.shape[0]
    if n < 3:
        raise TooFewPoints(f"{n} points; need at least 3")
    if not 0.0 < bandwidth <= 1.0:
        raise CrossLabError("bandwidth must lie in (0, 1]")
    if np.any(np.diff(x) < 0):
        raise CrossLabError("x must be sorted ascending")
    k = max(2, min(n, math.ceil(bandwidth * n - 1e-12)))
    return kernels.lowess_kernel(x, y, k)


def centered_moving_average(series, window: int = DEFAULT_MA_WINDOW) -> np.ndarray:
    """Centred moving average; even windows use half weights on the two end terms.

    The first and last ``window // 2`` entries are NaN.
    """
    x = np.asarray(series, dtype=float)
    if window <= 0:
        raise CrossLabError("window must be positive")
    if window > x.shape[0]:
        raise WindowTooLarge(f"window {window} exceeds series length {x.shape[0]}")
    h = window // 2
    if window % 2 == 0:
        w = np.ones(window + 1)
        w[0] = w[-1] = 0.5
    else:
        w = np.ones(window)
    w /= window
    out = np.full(x.shape[0], np.nan)
    if x.shape[0] > 2 * h:
        out[h:x.shape[0] - h] = np.convolve(x, w, mode="valid")
    return out


#: (label, extractor) pairs for the phase comparison; an extractor returns None to skip a record
PHASE_VARIABLES = (
    ("people_per_boat", lambda r: r.n_people),
    ("rubber_boat", lambda r: {BoatType.RUBBER: 1.0, BoatType.WOODEN: 0.0}.get(r.boat_type)),
    ("in_operational_area", lambda r: None if r.in_operational_area is None else float(r.in_operational_area)),
    ("any_dead_or_missing", lambda r: float(r.n_dead > 0)),
    ("n_dead_or_missing", lambda r: r.n_dead),
    ("share_dead_or_missing", lambda r: r.n_dead / r.n_people if r.n_people else None),
)


@dataclass(frozen=True)
class PhaseRow:
    variable: str
    result: TTestResult | None
    reason: str | None = None


def phase_comparison(incidents: Iterable[IncidentRecord], phase_a: tuple[dt.date, dt.date],
                     phase_b: tuple[dt.date, dt.date],
                     origin: DepartureCountry | None = DepartureCountry.LIBYA) -> list[PhaseRow]:
    """Welch tests of incident characteristics between two inclusive date ranges.

    A variable whose test is undefined (too few values, both samples
    constant) keeps ``result=None`` and the reason instead of aborting the table.
    """
    recs = [r for r in incidents if origin is None or r.departure_country is origin]
    rows = []
    for name, get in PHASE_VARIABLES:
        samples = []
        for lo, hi in (phase_a, phase_b):
            vals = [get(r) for r in recs if lo <= r.date <= hi]
            samples.append([float(v) for v in vals if v is not None])
        try:
            rows.append(PhaseRow(name, welch_ttest(*samples)))
        except (SampleTooSmall, BothVariancesZero) as exc:
            rows.append(PhaseRow(name, None, f"{type(exc).__name__}: {exc}"))
    return rows
