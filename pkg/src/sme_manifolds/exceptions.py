"""
Exceptions Module
Error hierarchy shared by the simulation, analysis and reporting layers.
"""

from typing import Optional


class SmeManifoldsError(Exception):
    """Base class for errors raised by this package."""
    pass


class InvalidArgumentError(SmeManifoldsError, ValueError):
    """An argument is outside its allowed domain (dimension, efficiency, grid...)."""
    pass


class IntegrationFailure(SmeManifoldsError, RuntimeError):
    """A numerical integration step produced a non-finite or unusable state."""

    def __init__(self, message: str, step: Optional[int] = None,
                 time: Optional[float] = None, trajectory: Optional[int] = None):
        super().__init__(message)
        self.message = message
        self.step = step
        self.time = time
        self.trajectory = trajectory

    def __str__(self) -> str:
        context = []
        if self.trajectory is not None:
            context.append(f"trajectory={self.trajectory}")
        if self.step is not None:
            context.append(f"step={self.step}")
        if self.time is not None:
            context.append(f"t={self.time:.6g}")
        if context:
            return f"{self.message} ({', '.join(context)})"
        return self.message


class ResourceLimitError(SmeManifoldsError, RuntimeError):
    """A configured computational limit (e.g. bracket depth) was exceeded."""
    pass
