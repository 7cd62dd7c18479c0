"""Offline figure generation from avgeuler CSV/JSONL artifacts."""

from .figures import (
    KINDS,
    FigureSpec,
    SchemaError,
    read_columns,
    read_jsonl,
    read_report_field,
    render,
)
from .cli import cli

__version__ = "1.0.0"

__all__ = [
    "KINDS", "FigureSpec", "SchemaError", "cli", "read_columns",
    "read_jsonl", "read_report_field", "render",
]
