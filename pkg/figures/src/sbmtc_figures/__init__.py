"""Figure rendering for sbmtc experiment outputs (presentation only)."""

from .render import KINDS, SchemaError, render

__all__ = ["KINDS", "SchemaError", "render"]
