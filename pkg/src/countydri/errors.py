"""Exception hierarchy shared by every pipeline stage."""

from __future__ import annotations


class DriError(Exception):
    """Base class for all errors raised by countydri."""


class MissingColumn(DriError):
    def __init__(self, name: str):
        super().__init__(f"column {name!r} not found in table header")
        self.name = name


class ParseError(DriError):
    def __init__(self, line: int, column: str, raw: str, reason: str = ""):
        msg = f"line {line}, column {column!r}: cannot parse {raw!r}"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)
        self.line = line
        self.column = column
        self.raw = raw
        self.reason = reason


class DuplicateFips(DriError):
    def __init__(self, fips: str):
        super().__init__(f"FIPS {fips} appears more than once")
        self.fips = fips


class GeometryError(DriError):
    pass


class EmptyJoin(DriError):
    pass


class DegenerateDomain(DriError):
    pass


class InvalidK(DriError):
    pass


class LabelMismatch(DriError):
    pass


class InsufficientData(DriError):
    pass


class ConstantInput(DriError):
    pass


class ClassCountMismatch(DriError):
    pass


class SinkError(DriError):
    pass


class ConfigError(DriError):
    pass
