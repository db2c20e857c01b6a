"""Shared error base class.

Every typed error in the package derives from :class:`ScenarioForgeError`
and carries a machine-readable ``code`` (used verbatim by the HTTP API and
the CLI's stderr lines) plus an optional ``detail`` payload.
"""

from __future__ import annotations

from typing import Any


class ScenarioForgeError(Exception):
    """Base class; ``code`` defaults to the concrete class name."""

    code: str = "Error"

    def __init__(self, message: str = "", **detail: Any):
        super().__init__(message or self.__class__.code)
        self.message = message or self.__class__.code
        self.detail = detail

    def __init_subclass__(cls, **kwargs: Any):
        super().__init_subclass__(**kwargs)
        cls.code = cls.__name__
