"""Shared error taxonomy.

Every failure surfaced by the engine carries a stable machine-readable code
(the ``E_*`` constants used throughout the API and CLI) next to the human
message. Module-specific subclasses exist so callers can catch one layer's
failures without string-matching codes.
"""

from __future__ import annotations

from typing import Any


class T2kuError(Exception):
    """Base error with a stable code and optional structured details."""

    def __init__(self, code: str, message: str, **details: Any):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message
        self.details = details

    def to_dict(self) -> dict:
        out = {"error": self.code, "message": self.message}
        if self.details:
            out["details"] = {k: v for k, v in self.details.items() if v is not None}
        return out


class T2MathError(T2kuError):
    """Proposition-document tokenizing/parsing failures."""


class FormulaError(T2kuError):
    """Clause-syntax and symbol-registry failures."""


class BridgeError(T2kuError):
    """Pattern-rule compilation, translation and validation failures."""


class KbError(T2kuError):
    """Knowledge-base store failures (namespace, pages, revisions)."""


class InferError(T2kuError):
    """Goal normalization failures."""


class YardError(T2kuError):
    """Task-brokering service failures."""
