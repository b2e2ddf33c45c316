"""Exception hierarchy.

The CLI maps these onto exit codes: parse errors -> 1, semantic errors -> 2,
data errors -> 3.
"""


class ResultDbError(Exception):
    """Base class for all errors raised by this package."""


class DataError(ResultDbError):
    """Malformed schema/CSV input or a violated catalog invariant."""


class ParseError(ResultDbError):
    """Lexical or syntactic error, carrying a 1-based source position."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        if line is not None:
            message = f"{message} (line {line}, column {col})"
        super().__init__(message)
        self.line = line
        self.col = col


class UnsupportedFeatureError(ParseError):
    """Recognized SQL that is outside the supported subset."""


class SemanticError(ResultDbError):
    """Query is well-formed but inconsistent with the catalog or contracts."""


class AnalysisError(SemanticError):
    """Name binding or type checking failed."""


class GraphError(SemanticError):
    """Join graph violates a structural requirement (e.g. disconnected)."""


class EngineError(SemanticError):
    """An execution-time contract was violated."""


class PostJoinError(SemanticError):
    """Subdatabase lacks an attribute required to reconstruct the join."""


class ScriptError(SemanticError):
    """Generated-SQL executor received a statement outside its dialect."""
