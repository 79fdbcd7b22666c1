"""JSON output for fits and oracle reports."""

from .results import FitOutput, dumps, read_json, to_jsonable, write_json

__all__ = ["FitOutput", "dumps", "read_json", "to_jsonable", "write_json"]
