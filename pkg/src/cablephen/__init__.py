"""Simulated hybrid cable-robot plant imaging and non-destructive mass estimation."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("cablephen")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

from .errors import (CablephenError, ConfigError, DegenerateStatisticsError,  # noqa: E402
                     InsufficientPointsError, KinematicsError, ModelDomainError)

__all__ = ["__version__", "CablephenError", "ConfigError", "DegenerateStatisticsError",
           "InsufficientPointsError", "KinematicsError", "ModelDomainError"]
