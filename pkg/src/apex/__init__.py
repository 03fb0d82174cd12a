"""Concolic event-sequence generation for miniature event-driven GUI apps."""

from __future__ import annotations

__version__ = "0.1.0"
