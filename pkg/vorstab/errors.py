"""Exception hierarchy shared by every vorstab module."""

from __future__ import annotations


class VorstabError(Exception):
    """Base class for all errors raised by vorstab."""


class GridError(VorstabError, ValueError):
    """Invalid grid parameters, field shapes or non-finite field values."""


class FieldFormatError(VorstabError, ValueError):
    """Malformed field CSV or header that does not match the expected grid."""


class ConfigError(VorstabError, ValueError):
    """Invalid configuration values or unreadable configuration files."""


class MembershipError(VorstabError, ValueError):
    """A field does not satisfy a membership precondition."""


class BesselError(VorstabError, ValueError):
    """Bessel helpers called outside their domain of use."""


class SolverError(VorstabError, RuntimeError):
    """Linear or eigen solve that failed or produced an unusable result."""


class AscentError(VorstabError, RuntimeError):
    """Energy ascent that lost monotonicity or left its rearrangement class."""


class SimulationError(VorstabError, RuntimeError):
    """Non-finite state detected while time stepping."""

    def __init__(self, message: str, t: float):
        super().__init__(message)
        self.t = t
