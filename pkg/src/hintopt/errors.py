"""Exception hierarchy shared across the package.

Every error raised by this package derives from :class:`HintOptError` so
callers can catch one base class at pipeline boundaries. The CLI maps
subfamilies onto exit codes (data errors vs. backend errors).
"""

from __future__ import annotations


class HintOptError(Exception):
    """Base class for all package errors."""


# ---------------------------------------------------------------- plan model


class MalformedPlanError(HintOptError):
    """A plan tree violates structural invariants (arity, aliases)."""


class UnknownOperatorError(HintOptError):
    """An operator name is outside the versioned normalization table."""


# ---------------------------------------------------------------- hint codec


class HintParseError(HintOptError):
    """Hint text violates the hint grammar.

    Carries the 1-based line and column of the offending token plus the
    grammar rule that failed, so callers can report actionable positions.
    """

    def __init__(self, message: str, *, line: int, col: int, rule: str = ""):
        self.line = line
        self.col = col
        self.rule = rule
        super().__init__(f"line {line}, col {col}: {message}")


class InconsistentHintsError(HintOptError):
    """Hints parse individually but contradict each other as a set."""


# ----------------------------------------------------------------- plan space


class CapExceededError(HintOptError):
    """Enumeration was requested beyond the configured table-count cap."""


# ------------------------------------------------------------------- catalog


class MissingTableError(HintOptError):
    """The query references a table absent from the catalog snapshot."""


class MissingScanNodeError(HintOptError):
    """The default plan has no scan node for a referenced alias."""


class SnapshotParseError(HintOptError):
    """A snapshot document is malformed or violates statistics invariants."""


class SqlParseError(HintOptError):
    """A query is outside the supported single-block SELECT shape."""


# ---------------------------------------------------------------- DBMS client


class PlannerError(HintOptError):
    """The planner rejected the request (bad knobs, unplannable query)."""


class FixtureMissError(HintOptError):
    """A fixture-mode request has no recorded entry. Never silently guessed."""


class ExecutionError(HintOptError):
    """Execution failed for a reason other than a timeout."""


# ------------------------------------------------------------------ backends


class GenerationBackendError(HintOptError):
    """The text-generation backend failed after the configured retries."""


# ------------------------------------------------------------- label harness


class AllCandidatesTimedOutError(HintOptError):
    """Every candidate hit its timeout; the query yields no usable label."""


# ------------------------------------------------------------ dataset builder


class InvalidExtensionError(HintOptError):
    """A proposed query extension failed schema validation."""


class NoFillValuesError(HintOptError):
    """A template's fill query produced no values; template is discarded."""


# ------------------------------------------------------------------- selector


class LengthMismatchError(HintOptError):
    """Paired outcome/label sequences differ in length."""


# --------------------------------------------------------------------- config


class ConfigError(HintOptError):
    """A run configuration file is missing required fields or malformed."""
