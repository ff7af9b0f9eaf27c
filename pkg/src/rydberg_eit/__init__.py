"""Few-photon propagation through a blockaded Rydberg-EIT medium.

Analytic output states of the single-photon filter and subtractor, their
spectra, a two-photon dissipative PDE solver and linear storage/retrieval.
"""

from .core import (DegenerateModeError, FrameError, Grid1D, Grid2D, MediumParams, ModeFunction,
                   NumericalError, ParameterError, cumulative, make_mode)
from .kernel import Kernel

__version__ = "0.1.0"

__all__ = [
    "DegenerateModeError", "FrameError", "Grid1D", "Grid2D", "Kernel", "MediumParams",
    "ModeFunction", "NumericalError", "ParameterError", "cumulative", "make_mode",
]
