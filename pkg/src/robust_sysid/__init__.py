"""Robust identification of partially observed nonlinear systems under
adversarial disturbances: simulators, sum-of-norm estimators, and empirical
verification of the contraction-rate error bounds."""

__version__ = "0.1.0"
