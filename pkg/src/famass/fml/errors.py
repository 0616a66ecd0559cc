from __future__ import annotations


class FmlError(Exception):
    """A located FML diagnostic.

    ``errors`` lists every diagnostic found in the document (in document
    order); the raised instance is the first of them.
    """

    code = "error"

    def __init__(self, message: str, line: int = 0, col: int = 0, symbol: str = ""):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col
        self.symbol = symbol
        self.errors: list[FmlError] = [self]

    def format(self, filename: str = "<model>") -> str:
        return f"{filename}:{self.line}:{self.col}: {self.code}: {self.message}"


class FmlSyntaxError(FmlError):
    code = "syntax"


class UnknownKeyword(FmlError):
    code = "unknown-keyword"


class DuplicateId(FmlError):
    code = "duplicate-id"


class DanglingReference(FmlError):
    code = "dangling-reference"
