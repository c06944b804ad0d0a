"""Diffusion-channel toolkit for molecular communication.

Closed-form channel responses for absorbing spherical receivers near
reflecting surfaces, validated against a built-in Brownian-motion particle
simulator.
"""

__version__ = "0.1.0"

from .geometry import AbsorbingSphere, ImageSet, Plane, Rect, vec3  # noqa: F401
from .analytic import (  # noqa: F401
    DiffusionParams,
    HalfSpaceParams,
    SimoPairParams,
    SisoParams,
    TwoPlaneParams,
)
from .montecarlo import Environment, HitHistogram, SimConfig, simulate  # noqa: F401
from .experiments import TopologySpec, build_topology, paper_topology, run_experiment  # noqa: F401
