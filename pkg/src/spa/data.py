"""Synthetic genotype/phenotype generation and dataset persistence.

Genotypes are drawn as minor-allele counts in {0, 1, 2} with block
correlation: each block shares a latent Gaussian factor, and columns are
discretized at Hardy-Weinberg thresholds for a random allele frequency.
Columns are then standardized to mean zero and unit sample standard
deviation, phenotypes are Bernoulli draws through the logit link, and
datasets round-trip through a single CSV format with a ``y`` column
followed by one column per marker.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, ndtri


class DataError(ValueError):
    """Raised for malformed dataset files or invalid simulation specs."""


@dataclass
class Dataset:
    """Standardized n x p design matrix with a binary response.

    Every column of X must have mean 0 and sample standard deviation 1
    (within 1e-10) and y entries must be 0 or 1; violations raise DataError
    at construction.
    """

    X: np.ndarray
    y: np.ndarray
    names: list[str]

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.ndim != 2:
            raise DataError(f"X must be 2-d, got shape {self.X.shape}")
        n, p = self.X.shape
        if self.y.shape != (n,):
            raise DataError(f"y has shape {self.y.shape}, expected ({n},)")
        if len(self.names) != p:
            raise DataError(f"{len(self.names)} names for {p} columns")
        if not np.all((self.y == 0.0) | (self.y == 1.0)):
            raise DataError("response values must all be 0 or 1")
        means = self.X.mean(axis=0)
        sds = self.X.std(axis=0, ddof=1) if n > 1 else np.ones(p)
        bad = np.flatnonzero((np.abs(means) > 1e-10) | (np.abs(sds - 1.0) > 1e-10))
        if bad.size:
            raise DataError(
                f"column {self.names[bad[0]]} is not standardized "
                f"(mean {means[bad[0]]:.3e}, sd {sds[bad[0]]:.6f})"
            )

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass
class SimSpec:
    """Recipe for one simulated dataset.

    Nonzero coefficients are given either explicitly as ``nonzero``
    (1-based marker index, value) pairs, or drawn at ``nonzero_count``
    random loci as Normal(0, coef_sd) with ``coef_sd`` read as a variance
    when ``sd_is_variance`` is set.
    """

    n: int
    p: int
    block_size: int = 10
    within_block_corr: float = 0.0
    nonzero: list[tuple[int, float]] = field(default_factory=list)
    nonzero_count: int = 0
    coef_sd: float = 0.2
    sd_is_variance: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise DataError(f"need n >= 1 and p >= 1, got n={self.n}, p={self.p}")
        if self.block_size < 1:
            raise DataError(f"block_size must be >= 1, got {self.block_size}")
        if self.block_size > self.p:
            raise DataError(f"block_size {self.block_size} exceeds p={self.p}")
        if not 0.0 <= self.within_block_corr < 1.0:
            raise DataError(f"within-block correlation must lie in [0, 1), got {self.within_block_corr}")
        indices = [idx for idx, _ in self.nonzero]
        if len(set(indices)) != len(indices):
            raise DataError("nonzero indices must be unique")
        for idx in indices:
            if not 1 <= idx <= self.p:
                raise DataError(f"nonzero index {idx} outside [1, {self.p}]")
        if self.nonzero and self.nonzero_count:
            raise DataError("give either explicit nonzeros or a count, not both")


def default_names(p: int) -> list[str]:
    width = max(3, len(str(p)))
    return [f"snp_{j + 1:0{width}d}" for j in range(p)]


def simulate_genotypes(spec: SimSpec) -> np.ndarray:
    """Raw n x p minor-allele-count matrix, deterministic given the seed."""
    rng = np.random.default_rng([spec.seed, 0])
    n, p, rho = spec.n, spec.p, spec.within_block_corr
    freqs = rng.uniform(0.1, 0.5, size=p)
    n_blocks = -(-p // spec.block_size)
    factors = rng.standard_normal((n, n_blocks))
    noise = rng.standard_normal((n, p))
    block_of = np.arange(p) // spec.block_size
    z = math.sqrt(rho) * factors[:, block_of] + math.sqrt(1.0 - rho) * noise
    # Hardy-Weinberg genotype frequencies ((1-f)^2, 2f(1-f), f^2) as
    # thresholds on the latent Gaussian.
    p0 = (1.0 - freqs) ** 2
    t1 = ndtri(p0)
    t2 = ndtri(p0 + 2.0 * freqs * (1.0 - freqs))
    return (z > t1).astype(float) + (z > t2)


def standardize(raw: np.ndarray, names: list[str] | None = None) -> np.ndarray:
    """Center and scale each column to mean 0 and sample sd 1."""
    raw = np.asarray(raw, dtype=float)
    means = raw.mean(axis=0)
    sds = raw.std(axis=0, ddof=1)
    bad = np.flatnonzero(sds == 0.0)
    if bad.size:
        label = names[bad[0]] if names is not None else str(bad[0])
        raise DataError(f"column {label} is constant and cannot be standardized")
    return (raw - means) / sds


def true_beta(spec: SimSpec) -> np.ndarray:
    """Coefficient vector implied by the recipe, with random loci when asked."""
    beta = np.zeros(spec.p)
    if spec.nonzero:
        for idx, value in spec.nonzero:
            beta[idx - 1] = value
        return beta
    if spec.nonzero_count:
        rng = np.random.default_rng([spec.seed, 1])
        loci = rng.choice(spec.p, size=spec.nonzero_count, replace=False)
        scale = math.sqrt(spec.coef_sd) if spec.sd_is_variance else spec.coef_sd
        beta[loci] = rng.normal(0.0, scale, size=spec.nonzero_count)
    return beta


def simulate_phenotypes(X: np.ndarray, beta: np.ndarray, seed) -> np.ndarray:
    """Bernoulli draws with success probability expit(X @ beta)."""
    X = np.asarray(X, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (X.shape[1],):
        raise DataError(f"beta has shape {beta.shape}, expected ({X.shape[1]},)")
    rng = np.random.default_rng(seed)
    return (rng.random(X.shape[0]) < expit(X @ beta)).astype(float)


def simulate_dataset(spec: SimSpec) -> tuple[Dataset, np.ndarray]:
    """Full pipeline: genotypes, standardization, coefficients, phenotypes."""
    names = default_names(spec.p)
    X = standardize(simulate_genotypes(spec), names)
    beta = true_beta(spec)
    y = simulate_phenotypes(X, beta, [spec.seed, 2])
    return Dataset(X, y, names), beta


def correlation_matrix(X: np.ndarray) -> np.ndarray:
    """Sample Pearson correlation matrix of the columns of X."""
    X = np.asarray(X, dtype=float)
    return np.atleast_2d(np.corrcoef(X, rowvar=False))


def scenario_a(seed: int = 18) -> SimSpec:
    """Small reference design: 500 subjects, 50 markers, five signals."""
    return SimSpec(
        n=500,
        p=50,
        block_size=10,
        within_block_corr=0.45,
        nonzero=[(10, -0.2538), (14, 0.4578), (24, -0.1873), (31, -0.1498), (37, 0.0996)],
        seed=seed,
    )


def scenario_b(seed: int = 18) -> SimSpec:
    """Large reference design: 1859 subjects, 184 markers, five signals."""
    return SimSpec(
        n=1859,
        p=184,
        block_size=8,
        within_block_corr=0.6,
        nonzero=[(108, -0.2538), (22, 0.4578), (5, -0.1873), (117, -0.1498), (162, 0.0996)],
        seed=seed,
    )


def scenario_a_small(seed: int = 18) -> SimSpec:
    """Cut-down design for fast statistical checks: 200 x 10, two signals."""
    return SimSpec(
        n=200,
        p=10,
        block_size=5,
        within_block_corr=0.3,
        nonzero=[(3, 0.4578), (7, -0.2538)],
        seed=seed,
    )


def save_dataset(data: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y"] + list(data.names))
        for i in range(data.n):
            writer.writerow([f"{int(data.y[i])}"] + [f"{v:.17g}" for v in data.X[i]])


def load_dataset(path) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if not header or header[0] != "y":
            raise DataError(f"{path}: line 1: missing header row starting with 'y'")
        names = header[1:]
        if not names:
            raise DataError(f"{path}: line 1: no predictor columns")
        ys, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(names) + 1:
                raise DataError(
                    f"{path}: line {lineno}: expected {len(names) + 1} fields, got {len(row)}"
                )
            try:
                values = [float(v) for v in row]
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from None
            if values[0] not in (0.0, 1.0):
                raise DataError(f"{path}: line {lineno}: response must be 0 or 1, got {row[0]}")
            ys.append(values[0])
            rows.append(values[1:])
        if not rows:
            raise DataError(f"{path}: no data rows")
    return Dataset(np.array(rows), np.array(ys), names)
