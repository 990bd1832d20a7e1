"""
sBGP toolkit
Sub-asymptotic bivariate generalized Pareto modelling: simulation, closed-form
tail quantities, rank-based dependence estimators and a neural Bayes estimator.
"""

__version__ = "0.3.0"
