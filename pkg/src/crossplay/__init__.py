"""Diverse cooperative agent populations via cross-play minimization.

Trains two-player cooperative policies so that each new population member
plays well with itself and poorly with its predecessors, using either live
rollouts or rollouts simulated by exact dynamics / a learned recurrent
world model.
"""

from .autodiff import Graph, Tensor

__version__ = "0.1.0"

__all__ = ["Graph", "Tensor", "__version__"]
