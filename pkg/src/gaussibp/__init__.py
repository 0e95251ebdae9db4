"""Finite-dimensional Gaussian integration-by-parts calculus.

Derivative jets over a finite Gaussian space, the carre du champ and
Ornstein-Uhlenbeck duality, localized Malliavin weights, super-kernel
mollification, distance estimators with rate fitting, Euler-scheme and
quadratic-chaos experiments, and a reporting CLI.
"""

__version__ = "0.1.0"
