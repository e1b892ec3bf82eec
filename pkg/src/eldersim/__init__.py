"""eldersim: a seedable smart-home binary-sensor data simulator.

The package generates multi-year labeled activity / sensor datasets for a
single elderly resident in a virtual studio apartment, including six
dementia-correlated behavioral anomalies driven by a latent cognitive-score
process, plus sequence-similarity metrics and tools to fit activity
parameters from real activity logs.
"""

from .core import (
    ActivityInstance,
    ActivityName,
    ActivitySequence,
    AnomalyLabel,
    GridLocation,
    SimTime,
    Tier,
    validate_sequence,
)

__version__ = "0.1.0"

__all__ = [
    "ActivityInstance",
    "ActivityName",
    "ActivitySequence",
    "AnomalyLabel",
    "GridLocation",
    "SimTime",
    "Tier",
    "validate_sequence",
    "__version__",
]
