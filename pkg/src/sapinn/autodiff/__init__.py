"""Reverse-mode automatic differentiation.

Two tapes share one design (append-only node store, reverse sweep in
insertion order, optional recording of the sweep for higher derivatives):

* :mod:`.scalar` stores one float per node and backs the pointwise API
  (``DiffValue``, ``derivative``); its hot loops run in a compiled core.
* :mod:`.array` stores one numpy array per node, one row per point, and
  is what training uses.
"""

from .scalar import BACKEND, DiffValue, Gradients, Tape, cos, derivative, sin, tanh

__all__ = ["BACKEND", "DiffValue", "Gradients", "Tape", "cos", "derivative", "sin", "tanh"]
