"""Numerical lab for Green functions and monotonicity formulas on warped products."""

__version__ = "0.1.0"

from .errors import GreenlabError
from .green import GreenProfile, assumption_constant, build_profile
from .manifold import ManifoldSpec, from_config, make_cone, make_euclidean, make_perturbed_cone, make_sublinear

__all__ = [
    "GreenlabError",
    "GreenProfile",
    "ManifoldSpec",
    "assumption_constant",
    "build_profile",
    "from_config",
    "make_cone",
    "make_euclidean",
    "make_perturbed_cone",
    "make_sublinear",
]
