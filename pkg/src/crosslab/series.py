"""Derived monthly and quarterly quantities consumed by the estimators."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from crosslab.dataset import DepartureCountry, FlowSeries, IncidentRecord, Route
from crosslab.errors import CrossLabError, EmptyQuarter, ZeroCrossingMonth, ZeroDenominator
from crosslab.periods import Month, Quarter

#: potential crossers = route maximum x 10/9, so no month has all of them crossing
DEFAULT_CAP_MULTIPLIER = 10.0 / 9.0

COVERAGE_LOW = 0.7
COVERAGE_HIGH = 1.1


@dataclass(frozen=True)
class LogOddsCap:
    """How the potential crossing population for the log-odds is chosen.

    ``potential`` (persons) overrides the ``multiplier x route maximum`` rule.
    """

    multiplier: float = DEFAULT_CAP_MULTIPLIER
    potential: float | None = None

    def population(self, max_crossings: float) -> float:
        m = self.potential if self.potential is not None else max_crossings * self.multiplier
        if not m > max_crossings:
            raise CrossLabError(
                f"potential population {m:g} must exceed the largest month ({max_crossings:g})")
        return m


@dataclass(frozen=True)
class DerivedPoint:
    month: Month
    n_cross: int
    n_cross_thousands: float
    p_rescue: float
    log_n_cross: float
    log_odds: float


@dataclass(frozen=True)
class DerivedSeries:
    route: Route
    potential: float
    points: tuple[DerivedPoint, ...]

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, i):
        return self.points[i]

    @property
    def months(self) -> list[Month]:
        return [p.month for p in self.points]

    def window(self, start: Month | None = None, end: Month | None = None) -> "DerivedSeries":
        keep = tuple(p for p in self.points
                     if (start is None or p.month >= start) and (end is None or p.month <= end))
        return DerivedSeries(self.route, self.potential, keep)


@dataclass(frozen=True)
class QuarterPoint:
    quarter: Quarter
    share_libya_rescue: float
    n_interception_libya: int
    n_rescue_total: int
    p_interception: float

    @property
    def n_rescue_libya(self) -> float:
        return self.share_libya_rescue * self.n_rescue_total


def interception_probability(share_libya: float, n_rescue_total: float, n_intercepted: float) -> float:
    """Libya-departure interception rate from the rescued share and quarter totals."""
    rescued_libya = share_libya * n_rescue_total
    denom = rescued_libya + n_intercepted
    if denom <= 0:
        raise ZeroDenominator("no Libya-departure rescues or interceptions in quarter")
    return n_intercepted / denom


def derive_series(flows: FlowSeries, cap_policy: LogOddsCap | None = None) -> DerivedSeries:
    """Crossing totals, rescue probability, log crossings and log-odds per month."""
    cap_policy = cap_policy or LogOddsCap()
    if not len(flows):
        raise CrossLabError(f"{flows.route}: empty flow series")
    for rec in flows:
        if rec.n_cross == 0:
            raise ZeroCrossingMonth(f"{flows.route} {rec.month}: no crossings, rescue probability undefined")
    m = cap_policy.population(max(rec.n_cross for rec in flows))
    points = []
    for rec in flows:
        n = rec.n_cross
        points.append(DerivedPoint(
            month=rec.month,
            n_cross=n,
            n_cross_thousands=n / 1000.0,
            p_rescue=rec.n_rescued / n,
            log_n_cross=math.log(n / 1000.0),
            log_odds=math.log(n / (m - n)),
        ))
    return DerivedSeries(flows.route, m, tuple(points))


def _flow_quarters(flows: FlowSeries) -> dict[Quarter, list]:
    out: dict[Quarter, list] = {}
    for rec in flows:
        out.setdefault(rec.month.quarter, []).append(rec)
    return out


def interception_series(flows: FlowSeries, incidents: Iterable[IncidentRecord]) -> list[QuarterPoint]:
    """Quarterly interception probability for boats departing Libya.

    The Libya share of rescued persons comes from incidents with a known
    departure country and head count; incidents of unknown origin are left
    out of both numerator and denominator.
    """
    persons = defaultdict(lambda: [0, 0])  # quarter -> [libya, known]
    for inc in incidents:
        if inc.n_people is None or inc.departure_country is DepartureCountry.UNKNOWN:
            continue
        slot = persons[Quarter.of(inc.date)]
        slot[1] += inc.n_people
        if inc.departure_country is DepartureCountry.LIBYA:
            slot[0] += inc.n_people
    out = []
    for q, recs in sorted(_flow_quarters(flows).items()):
        libya, known = persons.get(q, (0, 0))
        if known == 0:
            raise EmptyQuarter(f"{q}: no incidents with known departure country and head count")
        share = libya / known
        n_rescue = sum(r.n_rescued for r in recs)
        n_int = sum(r.n_intercepted for r in recs)
        try:
            p = interception_probability(share, n_rescue, n_int)
        except ZeroDenominator:
            raise ZeroDenominator(f"{q}: no Libya-departure rescues or interceptions") from None
        out.append(QuarterPoint(q, share, n_int, n_rescue, p))
    return out


@dataclass(frozen=True)
class CoverageRow:
    quarter: Quarter
    incident_persons: int
    flow_arrivals: int
    ratio: float
    flagged: bool


def coverage_diagnostic(flows: FlowSeries, incidents: Iterable[IncidentRecord],
                        low: float = COVERAGE_LOW, high: float = COVERAGE_HIGH) -> list[CoverageRow]:
    """Persons on recorded incidents over flow arrivals, per quarter."""
    persons: dict[Quarter, int] = defaultdict(int)
    for inc in incidents:
        if inc.n_people is not None:
            persons[Quarter.of(inc.date)] += inc.n_people
    rows = []
    for q, recs in sorted(_flow_quarters(flows).items()):
        arrivals = sum(r.n_rescued for r in recs)
        if arrivals == 0:
            raise ZeroDenominator(f"{q}: no flow arrivals")
        ratio = persons[q] / arrivals
        rows.append(CoverageRow(q, persons[q], arrivals, ratio, not (low <= ratio <= high)))
    return rows


def route_share_by_nationality(
    arrival_table: Mapping[tuple[str, Route | str, Month], float] | Iterable[tuple[str, Route | str, Month, float]],
) -> dict[str, dict[Month, dict[Route, float] | None]]:
    """Share of each nationality's monthly arrivals taken by each route.

    Months with zero arrivals for a nationality map to ``None``.
    """
    items = arrival_table.items() if isinstance(arrival_table, Mapping) else (
        ((n, r, m), c) for n, r, m, c in arrival_table)
    totals: dict[str, dict[Month, dict[Route, float]]] = defaultdict(lambda: defaultdict(lambda: dict.fromkeys(Route, 0.0)))
    for (nat, route, month), count in items:
        if count < 0:
            raise CrossLabError(f"negative count for {nat} {route} {month}")
        route = route if isinstance(route, Route) else Route.parse(route)
        totals[nat][month][route] += count
    out: dict[str, dict[Month, dict[Route, float] | None]] = {}
    for nat in sorted(totals):
        out[nat] = {}
        for month in sorted(totals[nat]):
            counts = totals[nat][month]
            s = sum(counts.values())
            out[nat][month] = None if s == 0 else {r: c / s for r, c in counts.items()}
    return out


DERIVED_COLUMNS = ("month", "n_cross_thousands", "p_rescue", "log_n_cross", "log_odds")
QUARTER_COLUMNS = ("quarter", "share_libya", "p_interception")


def write_derived_csv(series: DerivedSeries, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DERIVED_COLUMNS)
        for p in series:
            w.writerow([str(p.month), repr(p.n_cross_thousands), repr(p.p_rescue),
                        repr(p.log_n_cross), repr(p.log_odds)])


def write_quarter_csv(table: Sequence[QuarterPoint], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(QUARTER_COLUMNS)
        for q in table:
            w.writerow([str(q.quarter), repr(q.share_libya_rescue), repr(q.p_interception)])


def read_quarter_csv(path: str | Path) -> list[QuarterPoint]:
    """Load a quarter table written by :func:`write_quarter_csv`.

    Only the share and probability survive the round trip; counts are zero.
    """
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [QuarterPoint(Quarter.parse(r["quarter"]), float(r["share_libya"]), 0, 0,
                         float(r["p_interception"])) for r in rows]
