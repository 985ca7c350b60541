"""skysentry: deterministic sky-surveillance simulation and evaluation.

A desk-scale perception-and-decision pipeline: synthetic sky scenarios are
rendered to frames, pushed through motion detection, tiled tiny-object
detection, Kalman tracking, Bayesian species fusion, and stereo ranging,
ending in turbine shutdown decisions - with metrics and figures for the
whole chain.
"""

__version__ = "0.1.0"

from .errors import SkySentryError

__all__ = ["SkySentryError", "__version__"]
