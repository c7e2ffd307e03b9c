"""Two-stage behavior prediction for highway vehicles.

A maneuver classifier (lane change left / lane following / lane change
right) feeds a set of Gaussian-mixture position regressors, either as
gating weights of a mixture of experts or folded into one integrated
mixture.  Training and evaluation run end-to-end on synthetically
generated trajectories.
"""

__version__ = "0.1.0"

from .core import (
    Dataset,
    FeatureDescriptor,
    ManeuverClass,
    Sample,
    Situation,
)

__all__ = [
    "Dataset",
    "FeatureDescriptor",
    "ManeuverClass",
    "Sample",
    "Situation",
    "__version__",
]
