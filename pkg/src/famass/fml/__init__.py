"""FAMASS Model Language: parsing, canonical serialization and resolution."""

from famass.fml.errors import (
    DanglingReference,
    DuplicateId,
    FmlError,
    FmlSyntaxError,
    UnknownKeyword,
)
from famass.fml.parser import parse_file, parse_fml
from famass.fml.resolve import resolve
from famass.fml.writer import serialize

__all__ = [
    "DanglingReference",
    "DuplicateId",
    "FmlError",
    "FmlSyntaxError",
    "UnknownKeyword",
    "parse_file",
    "parse_fml",
    "resolve",
    "serialize",
]
