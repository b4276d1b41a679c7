"""Synthetic data generators and a brute-force likelihood oracle.

All randomness comes from ``numpy.random.Generator(PCG64(seed))``; the same
spec and seed always produce bit-identical output.
"""

from __future__ import annotations

import datetime as dt
import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from crosslab import kernels
from crosslab.choice import ChoiceObservation, SizeBin, choice_probabilities
from crosslab.dataset import (
    BoatType,
    DepartureCountry,
    FlowRecord,
    FlowSeries,
    IncidentRecord,
    Route,
)
from crosslab.errors import CrossLabError, UnstableSpec
from crosslab.periods import Month, Quarter
from crosslab.series import DEFAULT_CAP_MULTIPLIER, DerivedPoint, DerivedSeries, QuarterPoint

RESCUE_BOUNDS = (0.01, 0.99)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


class RescueProcess(str, enum.Enum):
    RANDOM_WALK = "random_walk"
    AR1 = "ar1"


@dataclass(frozen=True)
class EcmDgpSpec:
    """Generative ECM: an equilibrium line plus error-correcting monthly changes."""

    beta0: float = -10.0
    beta1: float = 28.0
    alpha0: float = 0.0
    alpha1: float = -0.4
    alpha2: float = 0.0
    rescue_process: RescueProcess = RescueProcess.RANDOM_WALK
    rescue_start: float = 0.7
    rescue_sd: float = 0.03
    rescue_phi: float = 0.95
    rescue_mean: float = 0.7
    noise_sd: float = 1.0
    length: int = 500
    seed: int = 0
    burn_in: int = 50
    start_month: Month = Month(2016, 1)

    def validate(self) -> None:
        if not -2.0 < self.alpha1 < 0.0:
            raise UnstableSpec(f"alpha1={self.alpha1} outside (-2, 0); deviations would not decay")
        if not self.noise_sd > 0.0:
            raise UnstableSpec("noise_sd must be positive")
        if self.length < 3:
            raise UnstableSpec("length must be at least 3")
        if self.rescue_process is RescueProcess.AR1 and not -1.0 < self.rescue_phi < 1.0:
            raise UnstableSpec("AR(1) rescue process needs |phi| < 1")
        lo, hi = RESCUE_BOUNDS
        if not lo <= self.rescue_start <= hi:
            raise UnstableSpec(f"rescue_start must lie in [{lo}, {hi}]")


@dataclass(frozen=True)
class SyntheticEcm:
    spec: EcmDgpSpec
    months: tuple[Month, ...]
    p_rescue: np.ndarray
    n_cross_thousands: np.ndarray

    @property
    def series(self) -> DerivedSeries:
        """The path as a derived series; logs are NaN wherever crossings are not positive."""
        y = self.n_cross_thousands
        m = float(y.max()) * 1000.0 * DEFAULT_CAP_MULTIPLIER
        pts = []
        for month, p, v in zip(self.months, self.p_rescue, y):
            n = v * 1000.0
            pts.append(DerivedPoint(
                month, int(round(n)), float(v), float(p),
                math.log(v) if v > 0 else math.nan,
                math.log(n / (m - n)) if 0 < n < m else math.nan,
            ))
        return DerivedSeries(Route.CENTRAL, m, tuple(pts))


def rescue_path(spec: EcmDgpSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    shocks = rng.normal(0.0, spec.rescue_sd, n)
    phi = 1.0 if spec.rescue_process is RescueProcess.RANDOM_WALK else spec.rescue_phi
    lo, hi = RESCUE_BOUNDS
    return kernels.clamped_walk(float(spec.rescue_start), shocks, float(phi), float(spec.rescue_mean), lo, hi)


def simulate_ecm_path(p: np.ndarray, spec: EcmDgpSpec, eps: np.ndarray | None = None,
                      y0: float | None = None) -> np.ndarray:
    """Run the error-correction recursion for a given rescue path and shocks."""
    p = np.ascontiguousarray(p, dtype=float)
    eps = np.zeros_like(p) if eps is None else np.ascontiguousarray(eps, dtype=float)
    if y0 is None:
        y0 = spec.beta0 + spec.beta1 * p[0]
    return kernels.ecm_path(p, eps, float(spec.beta0), float(spec.beta1), float(spec.alpha0),
                            float(spec.alpha1), float(spec.alpha2), float(y0))


def generate_ecm_data(spec: EcmDgpSpec) -> SyntheticEcm:
    """Simulate ``length`` months after discarding ``burn_in`` months."""
    spec.validate()
    rng = make_rng(spec.seed)
    n = spec.length + spec.burn_in
    p = rescue_path(spec, rng, n)
    eps = rng.normal(0.0, spec.noise_sd, n)
    y = simulate_ecm_path(p, spec, eps)
    keep = slice(spec.burn_in, None)
    months = tuple(spec.start_month.shift(i) for i in range(spec.length))
    return SyntheticEcm(spec, months, p[keep].copy(), y[keep].copy())


def ecm_to_flows(data: SyntheticEcm, route: Route = Route.CENTRAL, dead_share: float = 0.02) -> FlowSeries:
    """Round a synthetic path into monthly person counts for the flow CSV layout."""
    recs = []
    for month, p, y in zip(data.months, data.p_rescue, data.n_cross_thousands):
        total = int(round(y * 1000.0))
        if total <= 0:
            raise CrossLabError(f"{month}: synthetic crossings {y * 1000:.0f} are not positive; "
                                "raise beta0 or narrow the rescue process")
        rescued = int(round(p * total))
        dead = min(total - rescued, int(round(dead_share * total)))
        recs.append(FlowRecord(route, month, rescued, total - rescued - dead, dead))
    return FlowSeries(route, tuple(recs))


@dataclass(frozen=True)
class ChoiceDgpSpec:
    alpha: Mapping[SizeBin, float]
    beta: Mapping[SizeBin, float]
    quarters: tuple[tuple[Quarter, float, int], ...]
    seed: int = 0

    def validate(self) -> None:
        for q, p, n in self.quarters:
            if not 0.0 <= p <= 1.0:
                raise CrossLabError(f"{q}: p={p} outside [0, 1]")
            if n < 1:
                raise CrossLabError(f"{q}: needs at least one incident")

    @classmethod
    def uniform_p(cls, alpha: Mapping[SizeBin, float], beta: Mapping[SizeBin, float], n: int,
                  low: float = 0.0, high: float = 0.8, seed: int = 0) -> "ChoiceDgpSpec":
        """One incident per pseudo-quarter with p drawn uniformly on [low, high]."""
        p = make_rng(seed).uniform(low, high, n)
        quarters = tuple((Quarter(1000 + i // 4, i % 4 + 1), float(v), 1) for i, v in enumerate(p))
        return cls(dict(alpha), dict(beta), quarters, seed)


def coefficients(alpha_mid: float, alpha_large: float, beta_mid: float, beta_large: float):
    return ({SizeBin.MID: alpha_mid, SizeBin.LARGE: alpha_large},
            {SizeBin.MID: beta_mid, SizeBin.LARGE: beta_large})


def generate_choice_data(spec: ChoiceDgpSpec) -> list[ChoiceObservation]:
    """Draw each incident's bin from the logit shares at its quarter's p."""
    spec.validate()
    # choice draws use a stream independent of the one behind uniform_p
    rng = make_rng(spec.seed + 0x9E3779B9)
    p = np.repeat([q[1] for q in spec.quarters], [q[2] for q in spec.quarters])
    labels = [q[0] for q in spec.quarters for _ in range(q[2])]
    cum = np.cumsum(choice_probabilities(spec.alpha, spec.beta, p), axis=1)
    u = rng.random(p.shape[0])
    bins = np.minimum((u[:, None] > cum).sum(axis=1), 2)
    return [ChoiceObservation(f"syn{i:06d}", labels[i], SizeBin(int(b)), float(p[i]))
            for i, b in enumerate(bins)]


_BIN_RANGES = {SizeBin.SMALL: (1, 50), SizeBin.MID: (51, 100), SizeBin.LARGE: (101, 300)}


def choice_to_incidents(observations: Sequence[ChoiceObservation], seed: int) -> list[IncidentRecord]:
    """Incident rows (Libya, rubber, one vessel) whose head counts fall in the chosen bins."""
    rng = make_rng(seed + 0x51ED)
    out = []
    for i, o in enumerate(observations):
        lo, hi = _BIN_RANGES[o.chosen_bin]
        first = o.quarter.months[0]
        day = dt.date(first.year, first.month, 1) + dt.timedelta(days=int(rng.integers(0, 89)))
        out.append(IncidentRecord(o.incident_id, day, DepartureCountry.LIBYA, BoatType.RUBBER,
                                  int(rng.integers(lo, hi + 1)), 0, 1, False))
    return out


def choice_flows(quarters: Sequence[tuple[Quarter, float, int]], persons_per_quarter: int = 30_000
                 ) -> FlowSeries:
    """Central-route monthly flows whose quarterly interception share equals each quarter's p.

    Assumes every rescued person departed from Libya. Quarters must be consecutive.
    """
    recs = []
    for q, p, _ in quarters:
        n_int = int(round(p * persons_per_quarter))
        n_res = persons_per_quarter - n_int
        for k, m in enumerate(q.months):
            # spread remainders onto the first month so quarterly totals are exact
            share = (lambda v: v // 3 + (v % 3 if k == 0 else 0))
            recs.append(FlowRecord(Route.CENTRAL, m, share(n_res), share(n_int), 0))
    return FlowSeries(Route.CENTRAL, tuple(recs))


def quarter_table(quarters: Sequence[tuple[Quarter, float, int]]) -> list[QuarterPoint]:
    return [QuarterPoint(q, 1.0, 0, 0, p) for q, p, _ in quarters]


@dataclass(frozen=True)
class GridMleResult:
    coefficients: tuple[float, float, float, float]  # alpha_mid, alpha_large, beta_mid, beta_large
    log_likelihood: float
    at_bound: tuple[bool, bool, bool, bool]
    nonunique: bool
    n_ties: int
    step: float
    grid: np.ndarray = field(repr=False, default=None)

    @property
    def flagged(self) -> bool:
        return self.nonunique or any(self.at_bound)


def brute_force_logit_mle(observations: Sequence[ChoiceObservation], step: float = 0.25,
                          bounds: tuple[float, float] = (-8.0, 8.0), rel_tol: float = 1e-9) -> GridMleResult:
    """Exhaustive search of the weighted log-likelihood over a 4-D grid.

    Observations are collapsed to weighted bin counts per distinct p, so the
    cost is (grid points)^4 x (distinct p values). ``nonunique`` is set when
    several grid points tie within ``rel_tol`` or p takes a single value;
    ``at_bound`` marks coordinates sitting on the grid edge.
    """
    lo, hi = bounds
    n_steps = int(round((hi - lo) / step))
    if n_steps < 1 or not math.isclose(lo + n_steps * step, hi, rel_tol=0, abs_tol=1e-9):
        raise CrossLabError("bounds must span a whole number of steps")
    grid = lo + step * np.arange(n_steps + 1)
    pv = np.array(sorted({o.p_interception for o in observations}), dtype=float)
    index = {v: i for i, v in enumerate(pv)}
    counts = np.zeros((pv.size, 3))
    for o in observations:
        counts[index[o.p_interception], int(o.chosen_bin)] += o.weight
    best, im, il, ties = kernels.grid_search(counts, pv, grid, rel_tol)
    g = grid.size
    a_m, b_m = divmod(int(im), g)
    a_l, b_l = divmod(int(il), g)
    idx = (a_m, a_l, b_m, b_l)
    coefs = tuple(float(grid[i]) for i in idx)
    at_bound = tuple(i in (0, g - 1) for i in idx)
    return GridMleResult(coefs, float(best), at_bound, bool(ties > 1 or pv.size < 2), int(ties), step, grid)
