"""Python interface to the agcn C++ core.

Matrices cross the boundary as 2-D float64 numpy arrays (copied both ways).
"""

from ._agcn import *  # noqa: F401,F403
from ._agcn import __doc__  # noqa: F401

__version__ = "0.1.0"
