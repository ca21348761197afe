"""Conditional quantum generative models for stochastic-process loading and Asian-option pricing."""

__version__ = "0.1.0"
