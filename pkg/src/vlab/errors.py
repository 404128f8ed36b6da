"""Exception hierarchy shared across the engine.

Every error carries a stable machine ``code`` (used by the HTTP service
and the CLI) next to the human message.
"""

from __future__ import annotations


class VlabError(Exception):
    """Base class for all engine errors."""

    code = "error"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


# --- kind registry ---------------------------------------------------------

class UnknownKindError(VlabError):
    code = "unknown_kind"


class CyclicInheritanceError(VlabError):
    code = "cyclic_inheritance"


class IllegalOverrideError(VlabError):
    """A child kind changed a feature's type, widened its range, or
    otherwise broke substitutability with its parent."""

    code = "illegal_override"


# --- content formats -------------------------------------------------------

class FormatSyntaxError(VlabError):
    """Input is not well-formed JSON. Carries the 1-based location."""

    code = "syntax_error"

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


class UnsupportedVersionError(VlabError):
    code = "unsupported_version"


class SchemaError(VlabError):
    """Structurally valid JSON violating the document schema."""

    code = "schema_error"

    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class ValidationError(VlabError):
    """Raised when an operation requires valid content and got violations."""

    code = "validation_error"

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"validation failed: {lines}")


# --- simulation engine -----------------------------------------------------

class UnknownEntityError(VlabError):
    code = "unknown_entity"


class VerbNotAffordedError(VlabError):
    code = "verb_not_afforded"


class MissingParamError(VlabError):
    code = "missing_param"


class InvalidParamError(VlabError):
    code = "invalid_param"


class UnknownZoneError(VlabError):
    code = "unknown_zone"


# --- sessions --------------------------------------------------------------

class UnknownProcedureError(VlabError):
    code = "unknown_procedure"


class ModeArgMismatchError(VlabError):
    code = "mode_arg_mismatch"


class WrongModeError(VlabError):
    code = "wrong_mode"


class SessionFinishedError(VlabError):
    code = "session_finished"


# --- assessment ------------------------------------------------------------

class InconsistentLogError(VlabError):
    code = "inconsistent_log"


# --- ml environment --------------------------------------------------------

class IndexOutOfRangeError(VlabError):
    code = "index_out_of_range"


class EpisodeDoneError(VlabError):
    code = "episode_done"
