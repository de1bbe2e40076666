"""Explicit distributed MPC toolkit.

Builds condensed parametric QPs from coupled LTI plants, enumerates their
piecewise-affine explicit solutions, detects facet adjacency between critical
regions, and drives five controller architectures (centralized, iterative
distributed with online or explicit local solves, and two iteration-free
variants with hyperplane- or facet-restricted region search) through a
closed-loop simulation and benchmark pipeline.
"""

from ._kernels import KERNEL_NAME

__version__ = "0.1.0"

__all__ = ["KERNEL_NAME", "__version__"]
