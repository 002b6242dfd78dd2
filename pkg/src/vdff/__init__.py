"""Variational depth from focus: TV-regularized contrast maximization by linearized ADMM."""

__version__ = "0.1.0"
