"""Monte Carlo simulation of weak dispersive qubit measurement and its back-action."""

__version__ = "0.1.0"
