"""Estimands, power and simulation for A/B test metrics over time since exposure"""

__version__ = "1.0.0"
