"""Simulation and verification toolkit for the contact process on random
hyperbolic graphs.

The model lives on the upper half-plane: vertices form a Poisson point process
with intensity (alpha/pi) e^{-alpha h} dx dh, two vertices are adjacent when
their horizontal distance is at most e^{(h+h')/2}, and the contact process
(recovery rate 1, infection rate lambda per edge) runs on top.  The package
provides the geometric primitives, samplers, graph builders, two exact contact
process engines, small-graph exact references, box tessellations, and the
desk-scale experiments that exercise them.
"""

from hypercp.errors import BudgetError, CapacityError

__all__ = ["BudgetError", "CapacityError", "__version__"]

__version__ = "0.1.0"
