"""Refine JUnit tests: purify multi-scenario tests, then ground LLM comments and names."""

__version__ = "0.1.0"
