"""Benchmark problems: the two-constraint quadratic and the cascade-PID tuning task."""

from . import pid, quadratic

__all__ = ["pid", "quadratic"]
