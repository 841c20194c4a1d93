"""Stochastic-gradient variational inference with a trained quadratic
surrogate acting as a control variate for reparameterization gradients."""

__version__ = "0.1.0"
