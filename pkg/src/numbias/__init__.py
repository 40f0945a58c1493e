"""Numerical-bias auditing for score-based LLM judges."""

__version__ = "0.1.0"
