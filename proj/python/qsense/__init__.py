"""Ramsey-sensor sensitivities and shot simulation for intermittent stochastic signals.

Frequencies are angular (rad/s) throughout; multiply Hz by 2*pi.
"""

from ._qsense import *  # noqa: F401,F403
from ._qsense import __doc__  # noqa: F401
