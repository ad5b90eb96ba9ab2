"""Subadditive growth processes on Cayley graphs of polynomial-growth groups.

Exact group arithmetic, word-metric balls, random environments (FPP variants
and the frog model), Monte Carlo estimators for the limiting norm, and
asymptotic-cone diagnostics for rescaled random balls.
"""
from __future__ import annotations

__version__ = "0.1.0"
