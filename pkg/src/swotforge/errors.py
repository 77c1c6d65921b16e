"""Exception hierarchy shared by every engine in the package."""

from __future__ import annotations


class SwotError(Exception):
    """Base class for all errors raised by swotforge."""


class ParseError(SwotError, ValueError):
    """Malformed input text. Carries a 1-based line and column when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(str(self))

    def __str__(self) -> str:
        if self.line is None:
            return self.message
        return f"line {self.line}, column {self.column}: {self.message}"


class GraphError(SwotError, ValueError):
    """A term or triple violating the RDF data-model constraints."""


class SenMLError(SwotError, ValueError):
    pass


class AnnotationError(SwotError, ValueError):
    pass


class RuleError(SwotError):
    """Raised while evaluating rules (e.g. a builtin fed a non-numeric term)."""


class RegistryError(SwotError):
    pass


class UnknownTemplate(RegistryError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class StageError(SwotError):
    """Wraps a failure inside one pipeline stage; ``str()`` leads with the stage tag."""

    def __init__(self, stage: str, cause: BaseException | str):
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage}: {cause}")
