"""Hard Brownian rods in one dimension: simulators, closed forms and checks."""

__version__ = "0.1.0"
