"""Exception hierarchy. Every error raised on bad input derives from CrossLabError."""

from __future__ import annotations


class CrossLabError(ValueError):
    """Base class; the CLI maps it to exit code 2."""


# dataset
class MissingColumn(CrossLabError):
    pass


class NonContiguousMonths(CrossLabError):
    def __init__(self, route, month):
        self.route = route
        self.month = month
        super().__init__(f"{route}: months not contiguous, first missing month is {month}")


class NegativeCount(CrossLabError):
    def __init__(self, row, column):
        self.row = row
        self.column = column
        super().__init__(f"row {row}: negative count in column {column!r}")


class DuplicateMonth(CrossLabError):
    pass


class UnparseableDate(CrossLabError):
    pass


# series
class ZeroCrossingMonth(CrossLabError):
    pass


class EmptyQuarter(CrossLabError):
    pass


class ZeroDenominator(CrossLabError):
    pass


# econometrics
class RankDeficient(CrossLabError):
    pass


class TooFewObservations(CrossLabError):
    pass


class SeriesTooShort(CrossLabError):
    pass


class DegenerateResiduals(CrossLabError):
    pass


class InsufficientOverlap(CrossLabError):
    pass


class WrongDepVariable(CrossLabError):
    pass


# choice
class Separation(CrossLabError):
    pass


class NotIdentified(CrossLabError):
    pass


class NoConvergence(CrossLabError):
    pass


class DegenerateWeights(CrossLabError):
    pass


class ZeroQuarterCount(CrossLabError):
    pass


class RescueProbabilityZero(CrossLabError):
    pass


# stats
class SampleTooSmall(CrossLabError):
    pass


class BothVariancesZero(CrossLabError):
    pass


class TooFewPoints(CrossLabError):
    pass


class WindowTooLarge(CrossLabError):
    pass


# synth
class UnstableSpec(CrossLabError):
    pass
