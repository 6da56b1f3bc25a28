"""Monte-Carlo tree search with power-mean value backups."""

from .power_mean import PLUS_INFINITY, HoelderBounds, WeightedSample, concentration_bound, hoelder_bounds, power_mean

__version__ = "0.1.0"

__all__ = [
    "PLUS_INFINITY", "HoelderBounds", "WeightedSample", "concentration_bound", "hoelder_bounds", "power_mean",
]
