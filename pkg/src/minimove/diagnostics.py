"""Source spans, diagnostics, and the error types shared across passes."""

from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass(frozen=True)
class Span:
    line: int = 0
    col: int = 0
    end_line: int = 0
    end_col: int = 0

    def __str__(self):
        return f"{self.line}:{self.col}"


@dataclass
class Diagnostic:
    severity: str  # "error" | "warning" | "note"
    code: str
    message: str
    span: Span = field(default_factory=Span)
    file: str = "<input>"

    def text(self) -> str:
        return f"{self.file}:{self.span.line}:{self.span.col}: {self.severity}[{self.code}]: {self.message}"

    def to_json(self) -> str:
        return json.dumps(
            {
                "severity": self.severity,
                "code": self.code,
                "span": {
                    "file": self.file,
                    "line": self.span.line,
                    "col": self.span.col,
                },
                "message": self.message,
            },
            sort_keys=True,
        )


class MiniMoveError(Exception):
    """Base for all user-facing errors carrying a span."""

    code = "error"

    def __init__(self, message: str, span: Span = Span()):
        super().__init__(message)
        self.message = message
        self.span = span

    def diagnostic(self, file: str = "<input>") -> Diagnostic:
        return Diagnostic("error", self.code, self.message, self.span, file)


class ParseError(MiniMoveError):
    code = "parse"

    def __init__(self, message: str, span: Span = Span(), expected: set[str] | None = None):
        if expected:
            message = f"{message}; expected one of: " + ", ".join(sorted(expected))
        super().__init__(message, span)
        self.expected = expected or set()


class NameError_(MiniMoveError):
    code = "name"


class TypeError_(MiniMoveError):
    code = "type"


class AbilityError(TypeError_):
    code = "ability"


class CaptureError(TypeError_):
    code = "capture"


class LabelCycleError(MiniMoveError):
    code = "label-cycle"


class WildcardModifiesError(MiniMoveError):
    code = "wildcard-modifies"


class UnboundedInstantiation(MiniMoveError):
    code = "unbounded-instantiation"


class InferUnsupported(MiniMoveError):
    code = "infer-unsupported"


class EncodeError(MiniMoveError):
    code = "encode"


class SolverSpawnError(Exception):
    pass


class SolverProtocolError(Exception):
    pass
