"""Differentiable forward-chaining planning and plan-based reward shaping."""

__version__ = "0.1.0"
