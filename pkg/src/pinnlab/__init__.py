"""Loss formulations, reference solvers and witness constructions for physics-informed networks."""

__version__ = "0.1.0"
