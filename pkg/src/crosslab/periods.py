"""Calendar month and quarter keys.

Months are (year, month) pairs rather than dates so that contiguity checks
are exact integer arithmetic.
"""

from __future__ import annotations

import datetime as _dt
import re
from typing import NamedTuple

_MONTH_RE = re.compile(r"^\s*(\d{4})-(\d{1,2})\s*$")
_QUARTER_RE = re.compile(r"^\s*(\d{4})\s*[Qq]([1-4])\s*$")


class Month(NamedTuple):
    year: int
    month: int

    @classmethod
    def parse(cls, text: str) -> "Month":
        m = _MONTH_RE.match(text)
        if m is None:
            raise ValueError(f"cannot parse month {text!r}, expected YYYY-MM")
        year, month = int(m.group(1)), int(m.group(2))
        if not 1 <= month <= 12:
            raise ValueError(f"month out of range in {text!r}")
        return cls(year, month)

    @classmethod
    def of(cls, date: _dt.date) -> "Month":
        return cls(date.year, date.month)

    @property
    def index(self) -> int:
        return self.year * 12 + self.month - 1

    @classmethod
    def from_index(cls, index: int) -> "Month":
        return cls(index // 12, index % 12 + 1)

    def shift(self, n: int) -> "Month":
        return Month.from_index(self.index + n)

    @property
    def quarter(self) -> "Quarter":
        return Quarter(self.year, (self.month - 1) // 3 + 1)

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


class Quarter(NamedTuple):
    year: int
    quarter: int

    @classmethod
    def parse(cls, text: str) -> "Quarter":
        m = _QUARTER_RE.match(text)
        if m is None:
            raise ValueError(f"cannot parse quarter {text!r}, expected YYYYQn")
        return cls(int(m.group(1)), int(m.group(2)))

    @classmethod
    def of(cls, date: _dt.date) -> "Quarter":
        return cls(date.year, (date.month - 1) // 3 + 1)

    @property
    def months(self) -> tuple[Month, Month, Month]:
        first = 3 * (self.quarter - 1) + 1
        return (Month(self.year, first), Month(self.year, first + 1), Month(self.year, first + 2))

    def __str__(self) -> str:
        return f"{self.year:04d}Q{self.quarter}"


def parse_month_range(text: str) -> tuple[Month, Month]:
    """Parse ``YYYY-MM:YYYY-MM`` (both ends inclusive)."""
    try:
        lo, hi = text.split(":")
    except ValueError:
        raise ValueError(f"expected START:END month range, got {text!r}") from None
    start, end = Month.parse(lo), Month.parse(hi)
    if end < start:
        raise ValueError(f"empty month range {text!r}")
    return start, end
