"""SEIV epidemic process, Frechet bound dynamics and quarantine control."""

from ._seiv import *  # noqa: F401,F403
from ._seiv import __doc__  # noqa: F401

__version__ = "0.1.0"
