"""Exception hierarchy shared by every defix module."""

from __future__ import annotations


class DefixError(Exception):
    """Base class for all errors raised by defix."""


class ConfigError(DefixError, ValueError):
    pass


# --- ingestion ---------------------------------------------------------------


class IngestError(DefixError):
    """A problem with an input file. ``row`` is the 1-based data row (header excluded)."""

    def __init__(self, message: str, row: int | None = None, source: str | None = None):
        self.row = row
        self.source = source
        where = []
        if source:
            where.append(str(source))
        if row is not None:
            where.append(f"row {row}")
        prefix = f"{':'.join(where)}: " if where else ""
        super().__init__(prefix + message)


class MissingColumn(IngestError):
    pass


class SchemaMismatch(IngestError):
    pass


class DuplicateKey(IngestError):
    pass


class NegativeValue(IngestError):
    pass


class BadDate(IngestError):
    pass


class BadNumber(IngestError):
    pass


class InterestOutOfRange(IngestError):
    pass


# --- index construction ------------------------------------------------------


class IndexConstructionError(DefixError):
    pass


class InsufficientEligible(IndexConstructionError):
    def __init__(self, date, eligible: int):
        self.date = date
        self.eligible = eligible
        super().__init__(f"only {eligible} eligible symbols on {date}; at least 5 required")


class ZeroCapitalization(IndexConstructionError):
    pass


class MissingPrice(IndexConstructionError):
    def __init__(self, symbol: str, date):
        self.symbol = symbol
        self.date = date
        super().__init__(f"no price for {symbol} on {date}")


# --- statistics / estimation -------------------------------------------------


class EstimationError(DefixError):
    pass


class TooFewObservations(EstimationError):
    pass


class ZeroVariance(EstimationError):
    pass


class NonPositiveLevel(EstimationError):
    pass


class SeriesTooShort(EstimationError):
    pass


class RankDeficient(EstimationError):
    pass


class TooFewEntities(EstimationError):
    pass
