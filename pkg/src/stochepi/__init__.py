"""Multi-stage stochastic programming toolkit for epidemic treatment-capacity
planning: scenario trees over uncertain transmission rates, a compartmental
disease simulator, deterministic-equivalent MIP construction with equity
constraints, a built-in branch-and-bound solver with an external-solver
adapter, and value-of-stochastic-solution / equity / allocation analyses.
"""

__version__ = "0.1.0"
