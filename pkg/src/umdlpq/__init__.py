"""Numerical companions for UMD constants of iterated L_p(L_q) spaces."""

__version__ = "0.1.0"
