"""Sparsity-path analysis for Bayesian logistic regression.

A library and CLI for sweeping the scale of a generalized-t coefficient
prior across a geometric schedule with a sequential Monte Carlo sampler,
computing MAP estimates by EM, and summarizing the resulting family of
posteriors (MAP paths, absolute-median paths, concentrations, the posterior
over the prior scale, and scale-marginalized summaries).
"""

__version__ = "0.1.0"
