"""Softmax linear classifiers trained by iterating a linearized bound on the expected error."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401
