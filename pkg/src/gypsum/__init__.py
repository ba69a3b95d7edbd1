"""Hybrid token/graph code summarization with a dual-copy decoder."""
__version__ = "0.1.0"
