"""Flow- and incident-level record ingestion.

Two delimited-text layouts are understood. Column names may differ from the
canonical ones below through a ``schema`` mapping of canonical name to the
header used in the file.

Flow file::

    route,month,n_rescued,n_intercepted,n_dead

Incident file::

    incident_id,date,departure_country,boat_type,n_people,n_dead,n_vessels,in_operational_area
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from crosslab.errors import (
    CrossLabError,
    DuplicateMonth,
    MissingColumn,
    NegativeCount,
    NonContiguousMonths,
    UnparseableDate,
)
from crosslab.periods import Month

logger = logging.getLogger(__name__)

FLOW_COLUMNS = ("route", "month", "n_rescued", "n_intercepted", "n_dead")
INCIDENT_COLUMNS = (
    "incident_id",
    "date",
    "departure_country",
    "boat_type",
    "n_people",
    "n_dead",
    "n_vessels",
    "in_operational_area",
)

#: first day of the choice-model sample; interception data starts in 2016
CHOICE_SAMPLE_START = dt.date(2016, 1, 1)


class Route(str, enum.Enum):
    CENTRAL = "Central"
    WESTERN = "Western"
    EASTERN = "Eastern"

    @classmethod
    def parse(cls, text: str) -> "Route":
        key = text.strip().lower()
        for r in cls:
            if r.value.lower() == key:
                return r
        raise CrossLabError(f"unknown route {text!r}")

    def __str__(self) -> str:
        return self.value


class DepartureCountry(str, enum.Enum):
    LIBYA = "Libya"
    TUNISIA = "Tunisia"
    OTHER = "Other"
    UNKNOWN = "Unknown"

    @classmethod
    def parse(cls, text: str | None) -> "DepartureCountry":
        key = (text or "").strip().lower()
        if key in ("", "unknown", "na", "n/a", "nan"):
            return cls.UNKNOWN
        if key == "libya":
            return cls.LIBYA
        if key == "tunisia":
            return cls.TUNISIA
        return cls.OTHER

    def __str__(self) -> str:
        return self.value


class BoatType(str, enum.Enum):
    RUBBER = "Rubber"
    WOODEN = "Wooden"
    OTHER = "Other"
    UNKNOWN = "Unknown"

    @classmethod
    def parse(cls, text: str | None) -> "BoatType":
        key = (text or "").strip().lower()
        if key in ("", "unknown", "na", "n/a", "nan"):
            return cls.UNKNOWN
        if key.startswith("rubber") or key.startswith("inflatable"):
            return cls.RUBBER
        if key.startswith("wood"):
            return cls.WOODEN
        return cls.OTHER

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class FlowRecord:
    route: Route
    month: Month
    n_rescued: int
    n_intercepted: int
    n_dead: int

    def __post_init__(self):
        for name in ("n_rescued", "n_intercepted", "n_dead"):
            if getattr(self, name) < 0:
                raise NegativeCount(str(self.month), name)

    @property
    def n_cross(self) -> int:
        return self.n_rescued + self.n_intercepted + self.n_dead


@dataclass(frozen=True)
class FlowSeries:
    """Contiguous monthly records for one route."""

    route: Route
    months: tuple[FlowRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "months", tuple(self.months))
        for rec in self.months:
            if rec.route != self.route:
                raise CrossLabError(f"record for {rec.route} in {self.route} series")
        for prev, cur in zip(self.months, self.months[1:]):
            if cur.month == prev.month:
                raise DuplicateMonth(f"{self.route}: duplicate month {cur.month}")
            if cur.month.index != prev.month.index + 1:
                raise NonContiguousMonths(self.route, prev.month.shift(1))

    def __len__(self) -> int:
        return len(self.months)

    def __iter__(self):
        return iter(self.months)

    @property
    def first(self) -> Month:
        return self.months[0].month

    @property
    def last(self) -> Month:
        return self.months[-1].month

    def window(self, start: Month | None = None, end: Month | None = None) -> "FlowSeries":
        """Sub-series with ``start <= month <= end``."""
        keep = [
            r for r in self.months
            if (start is None or r.month >= start) and (end is None or r.month <= end)
        ]
        return FlowSeries(self.route, tuple(keep))


@dataclass(frozen=True)
class IncidentRecord:
    incident_id: str
    date: dt.date
    departure_country: DepartureCountry = DepartureCountry.UNKNOWN
    boat_type: BoatType = BoatType.UNKNOWN
    n_people: int | None = None
    n_dead: int = 0
    n_vessels: int | None = None
    in_operational_area: bool | None = None

    def __post_init__(self):
        if self.n_dead < 0:
            raise NegativeCount(self.incident_id, "n_dead")
        if self.n_people is not None and self.n_people < 0:
            raise NegativeCount(self.incident_id, "n_people")
        if self.n_vessels is not None and self.n_vessels <= 0:
            raise CrossLabError(f"{self.incident_id}: n_vessels must be positive")
        if self.n_people is not None and self.n_dead > self.n_people:
            raise CrossLabError(f"{self.incident_id}: n_dead exceeds n_people")


@dataclass
class ParseReport:
    """Row accounting for an incident file: ``n_rows == n_records + n_dropped``."""

    n_rows: int = 0
    n_records: int = 0
    dropped: list[tuple[int, str]] = field(default_factory=list)
    duplicate_ids: list[str] = field(default_factory=list)

    @property
    def n_dropped(self) -> int:
        return len(self.dropped)


def _resolve_columns(header: Sequence[str], canonical: Sequence[str],
                     schema: Mapping[str, str] | None, optional: Iterable[str] = ()) -> dict[str, int]:
    schema = dict(schema or {})
    stripped = [h.strip() for h in header]
    pos = {}
    optional = set(optional)
    for name in canonical:
        col = schema.get(name, name)
        if col in stripped:
            pos[name] = stripped.index(col)
        elif name not in optional:
            raise MissingColumn(f"missing column {col!r} (for {name!r})")
    return pos


def _read_rows(path: str | Path, delimiter: str):
    path = Path(path)
    if not path.exists():
        raise CrossLabError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn(f"{path}: empty file, header row required") from None
        rows = [(reader.line_num, row) for row in reader if any(c.strip() for c in row)]
    return header, rows


def _count(text: str, line: int, column: str) -> int:
    try:
        value = int(text.strip())
    except ValueError:
        try:
            f = float(text.strip())
        except ValueError:
            raise CrossLabError(f"line {line}: {column!r} is not an integer: {text!r}") from None
        if not f.is_integer():
            raise CrossLabError(f"line {line}: {column!r} is not an integer: {text!r}") from None
        value = int(f)
    if value < 0:
        raise NegativeCount(line, column)
    return value


def ingest_flows(path: str | Path, schema: Mapping[str, str] | None = None,
                 delimiter: str = ",") -> dict[Route, FlowSeries]:
    """Read a monthly flow file into one validated FlowSeries per route.

    Raises MissingColumn, NegativeCount (naming the line), DuplicateMonth, or
    NonContiguousMonths (naming the first missing month).
    """
    header, rows = _read_rows(path, delimiter)
    pos = _resolve_columns(header, FLOW_COLUMNS, schema)
    by_route: dict[Route, dict[Month, FlowRecord]] = {}
    for line, row in rows:
        cell = lambda name: row[pos[name]] if pos[name] < len(row) else ""  # noqa: E731
        route = Route.parse(cell("route"))
        try:
            month = Month.parse(cell("month"))
        except ValueError as exc:
            raise CrossLabError(f"line {line}: {exc}") from None
        rec = FlowRecord(
            route,
            month,
            _count(cell("n_rescued"), line, "n_rescued"),
            _count(cell("n_intercepted"), line, "n_intercepted"),
            _count(cell("n_dead"), line, "n_dead"),
        )
        seen = by_route.setdefault(route, {})
        if month in seen:
            raise DuplicateMonth(f"line {line}: duplicate {route} month {month}")
        seen[month] = rec
    return {
        route: FlowSeries(route, tuple(recs[m] for m in sorted(recs)))
        for route, recs in sorted(by_route.items(), key=lambda kv: list(Route).index(kv[0]))
    }


def write_flows(series: Iterable[FlowSeries], path: str | Path, delimiter: str = ",") -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(FLOW_COLUMNS)
        for s in series:
            for r in s:
                w.writerow([r.route.value, str(r.month), r.n_rescued, r.n_intercepted, r.n_dead])


def _opt_int(text: str) -> int | None:
    text = text.strip()
    if not text:
        return None
    try:
        f = float(text)
    except ValueError:
        return None
    if not f.is_integer():
        return None
    return int(f)


def _opt_bool(text: str) -> bool | None:
    key = text.strip().lower()
    if key in ("true", "1", "yes", "y", "t"):
        return True
    if key in ("false", "0", "no", "n", "f"):
        return False
    return None


def ingest_incidents(path: str | Path, schema: Mapping[str, str] | None = None,
                     delimiter: str = ",",
                     window: tuple[dt.date | None, dt.date | None] | None = None,
                     ) -> tuple[list[IncidentRecord], ParseReport]:
    """Read an incident file.

    Returns ``(records, report)``. Rows with an unparseable date, an invalid
    required count, or a date outside ``window`` are dropped and listed in the
    report; optional fields that fail to parse are kept as ``None``.
    Duplicate incident ids are only warned about since one incident can span
    several boats.
    """
    header, rows = _read_rows(path, delimiter)
    pos = _resolve_columns(header, INCIDENT_COLUMNS, schema,
                           optional=("departure_country", "boat_type", "n_people", "n_dead",
                                     "n_vessels", "in_operational_area"))
    report = ParseReport(n_rows=len(rows))
    records: list[IncidentRecord] = []
    lo, hi = window if window is not None else (None, None)
    for line, row in rows:
        def cell(name: str) -> str:
            i = pos.get(name)
            return row[i] if i is not None and i < len(row) else ""

        try:
            try:
                date = dt.date.fromisoformat(cell("date").strip())
            except ValueError:
                raise UnparseableDate(f"unparseable date {cell('date')!r}") from None
            if (lo is not None and date < lo) or (hi is not None and date > hi):
                raise CrossLabError(f"date {date} outside study window")
            dead_text = cell("n_dead").strip()
            n_dead = _opt_int(dead_text) if dead_text else 0
            if n_dead is None:
                raise CrossLabError(f"n_dead is not an integer: {dead_text!r}")
            n_people = _opt_int(cell("n_people"))
            if n_people is not None and n_people < 0:
                n_people = None
            n_vessels = _opt_int(cell("n_vessels"))
            if n_vessels is not None and n_vessels <= 0:
                n_vessels = None
            rec = IncidentRecord(
                incident_id=cell("incident_id").strip(),
                date=date,
                departure_country=DepartureCountry.parse(cell("departure_country")),
                boat_type=BoatType.parse(cell("boat_type")),
                n_people=n_people,
                n_dead=n_dead,
                n_vessels=n_vessels,
                in_operational_area=_opt_bool(cell("in_operational_area")),
            )
        except CrossLabError as exc:
            report.dropped.append((line, str(exc)))
            continue
        records.append(rec)
    report.n_records = len(records)
    dupes = [k for k, n in Counter(r.incident_id for r in records).items() if n > 1 and k]
    if dupes:
        logger.warning("%d duplicate incident ids (kept as separate boats)", len(dupes))
    report.duplicate_ids = sorted(dupes)
    return records, report


def _fmt_opt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def write_incidents(records: Iterable[IncidentRecord], path: str | Path, delimiter: str = ",") -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(INCIDENT_COLUMNS)
        for r in records:
            w.writerow([
                r.incident_id, r.date.isoformat(), r.departure_country.value, r.boat_type.value,
                _fmt_opt(r.n_people), r.n_dead, _fmt_opt(r.n_vessels), _fmt_opt(r.in_operational_area),
            ])


def filter_choice_sample(records: Iterable[IncidentRecord],
                         window: tuple[dt.date | None, dt.date | None] = (CHOICE_SAMPLE_START, None),
                         origin: DepartureCountry | None = None,
                         ) -> list[IncidentRecord]:
    """Rubber-boat incidents inside ``window`` with known, positive head count and vessel count.

    ``origin`` optionally restricts to one departure country as well.
    """
    lo, hi = window
    return [
        r for r in records
        if (origin is None or r.departure_country is origin)
        and (lo is None or r.date >= lo)
        and (hi is None or r.date <= hi)
        and r.boat_type is BoatType.RUBBER
        and r.n_people is not None
        and r.n_people > 0
        and r.n_vessels is not None
    ]
