"""Occlusion-aware multi-Bernoulli mixture tracking.

Submodules:

- ``rfs``: random finite set densities, PHD and reduced Palm densities
- ``occlusion``: camera projection, visibility ratio and PoD curve
- ``epd``: expected probability of detection and the PRO/ESO/constant strategies
- ``filter``: MBM predict/update with Murty K-best association
- ``metrics``: trajectory GOSPA with an occluded/visible split
- ``simio``: synthetic scenarios and MOTChallenge-style files
- ``cli``: the ``occtrack`` command
"""

from .epd import EpdConfig, EpdContext, PodAssignment, constant_pod, eso_pod, pro_pod
from .filter import FilterConfig, TrackerModels, run_tracker
from .metrics import TgospaParams, TgospaResult, TrajectorySet, tgospa
from .occlusion import CameraModel, OcclusionConfig, PodCurve, visibility_ratio
from .rfs import BernoulliComponent, MBHypothesis, MBMDensity, SpatialDensity

__version__ = "0.1.0"

__all__ = [
    "BernoulliComponent",
    "CameraModel",
    "EpdConfig",
    "EpdContext",
    "FilterConfig",
    "MBHypothesis",
    "MBMDensity",
    "OcclusionConfig",
    "PodAssignment",
    "PodCurve",
    "SpatialDensity",
    "TgospaParams",
    "TgospaResult",
    "TrackerModels",
    "TrajectorySet",
    "constant_pod",
    "eso_pod",
    "pro_pod",
    "run_tracker",
    "tgospa",
    "visibility_ratio",
]
