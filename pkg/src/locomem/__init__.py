"""Memory of motion for warm-starting a feasibility-prone DDP step solver."""

__version__ = "0.1.0"
