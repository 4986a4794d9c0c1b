"""Counterfactual explanations for binned scorecard models via mixed-integer programming."""

__version__ = "0.1.0"
