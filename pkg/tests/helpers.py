"""Shared independent oracles for the test-suite.

Everything here is deliberately brute force (dense grids, full Newton,
explicit sums) and stays independent of the library code paths it checks.
"""

import numpy as np
from scipy.special import expit

from spa.model import GtPrior, gt_log_density


def loglik_grid_1d(x, y, grid, chunk=20_000):
    """Logistic log-likelihood over a grid of scalar coefficients."""
    x = np.asarray(x, float).ravel()
    y = np.asarray(y, float)
    out = np.empty(grid.size)
    for start in range(0, grid.size, chunk):
        g = grid[start : start + chunk]
        eta = np.outer(x, g)
        out[start : start + chunk] = y @ eta - np.logaddexp(0.0, eta).sum(axis=0)
    return out


def newton_logistic_mle(X, y, max_iter=200, tol=1e-10):
    """Unpenalized MLE by full-Hessian Newton-Raphson."""
    X = np.asarray(X, float)
    y = np.asarray(y, float)
    beta = np.zeros(X.shape[1])
    for _ in range(max_iter):
        mu = expit(X @ beta)
        grad = X.T @ (y - mu)
        if np.max(np.abs(grad)) < tol:
            return beta
        H = X.T @ (X * (mu * (1.0 - mu))[:, None])
        beta = beta + np.linalg.solve(H, grad)
    raise RuntimeError("Newton oracle failed to converge")


def grid_argmax_objective_1d(x, y, w, lo=-5.0, hi=5.0, step=1e-4):
    """Brute-force maximizer of loglik(beta) - w |beta| for one coefficient."""
    grid = np.arange(lo, hi + step / 2, step)
    obj = loglik_grid_1d(x, y, grid) - w * np.abs(grid)
    return float(grid[int(np.argmax(obj))])


def grid_posterior_mode_1d(x, y, prior: GtPrior, lo=-5.0, hi=5.0, step=1e-4):
    """Brute-force mode of the unnormalized posterior for one coefficient."""
    grid = np.arange(lo, hi + step / 2, step)
    lp = loglik_grid_1d(x, y, grid) + gt_log_density(grid, prior)
    return float(grid[int(np.argmax(lp))])


class PosteriorGrid1d:
    """Dense quadrature view of a single-coefficient posterior.

    Provides normalized density, CDF, inverse CDF, quantiles, and the log
    normalizing constant (trapezoid rule on a uniform grid), for use as an
    oracle against sampler output.
    """

    def __init__(self, x, y, prior: GtPrior, lo=-8.0, hi=8.0, n=40_001):
        self.grid = np.linspace(lo, hi, n)
        self.log_unnorm = loglik_grid_1d(x, y, self.grid) + gt_log_density(self.grid, prior)
        shift = self.log_unnorm.max()
        dens = np.exp(self.log_unnorm - shift)
        h = self.grid[1] - self.grid[0]
        trap = np.full(n, h)
        trap[0] = trap[-1] = h / 2
        mass = float(trap @ dens)
        self.log_z = shift + np.log(mass)
        self.density = dens / mass
        cdf = np.concatenate([[0.0], np.cumsum((dens[1:] + dens[:-1]) * h / 2)]) / mass
        self.cdf_values = np.clip(cdf, 0.0, 1.0)
        self.cdf_values[-1] = 1.0

    def cdf(self, x):
        return np.interp(x, self.grid, self.cdf_values)

    def quantile(self, q):
        return float(np.interp(q, self.cdf_values, self.grid))

    def sample(self, n, rng):
        return np.interp(rng.random(n), self.cdf_values, self.grid)

    def mean(self):
        h = self.grid[1] - self.grid[0]
        return float(np.trapezoid(self.grid * self.density, dx=h))
