"""Exact-arithmetic laboratory for dynamics on finite metric trees.

All geometry is done with `fractions.Fraction`; no floating point enters any
core computation.  Reported extrema, distances and measures are exact
rationals end to end.
"""

from dendro.metric_tree import Dendrite, PointRef, Subtree

__all__ = ["Dendrite", "PointRef", "Subtree"]
__version__ = "0.1.0"
