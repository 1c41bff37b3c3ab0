"""Path statistics computed from sampler output.

Every statistic is a pure function of the per-step weighted particle sets:
absolute-median paths, credible bands, concentrations V(delta) (posterior
mass outside (-delta, delta)), the discrete posterior over the prior scale
from the accumulated evidence ratios, the scale-marginalized pooled
posterior, MAP paths re-solved by EM from particle seeds, and weighted
kernel density estimates.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .emmap import em_map
from .model import GtPrior, gt_log_density
from .smc import SmcOutput, make_design


class SnapshotError(ValueError):
    """A summary needed particle snapshots that the run did not retain."""


def _require_full_snapshots(output: SmcOutput):
    missing = [s.t for s in output.steps if s.particles is None]
    if missing:
        raise SnapshotError(
            f"steps {missing[:5]}{'...' if len(missing) > 5 else ''} have no particle "
            "snapshots; rerun without snapshot thinning"
        )


def weighted_quantile(values, weights, q: float) -> float:
    """Smallest value whose cumulative weight reaches q (no interpolation)."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {q}")
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    order = np.argsort(values, kind="stable")
    cum = np.cumsum(weights[order])
    idx = int(np.searchsorted(cum, q * cum[-1], side="left"))
    return float(values[order][min(idx, values.size - 1)])


def weighted_mean(values, weights) -> float:
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    return float(values @ weights / weights.sum())


def concentration(samples, weights, delta: float) -> float:
    """Weighted posterior mass outside the open interval (-delta, delta)."""
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    samples = np.asarray(samples, dtype=float)
    weights = np.asarray(weights, dtype=float)
    inside = float(weights[np.abs(samples) < delta].sum() / weights.sum())
    return 1.0 - inside


def quantile_path(output: SmcOutput, q: float) -> np.ndarray:
    """Per-step, per-coefficient weighted quantile over the snapshots."""
    _require_full_snapshots(output)
    T = len(output.steps)
    p = output.steps[0].particles.shape[1]
    out = np.empty((T, p))
    for k, rec in enumerate(output.steps):
        for j in range(p):
            out[k, j] = weighted_quantile(rec.particles[:, j], rec.weights, q)
    return out


def abs_median_path(output: SmcOutput) -> np.ndarray:
    """|weighted median| per step and coefficient."""
    return np.abs(quantile_path(output, 0.5))


def mean_path(output: SmcOutput) -> np.ndarray:
    _require_full_snapshots(output)
    return np.stack([rec.particles.T @ rec.weights for rec in output.steps])


def concentration_path(output: SmcOutput, delta: float) -> np.ndarray:
    _require_full_snapshots(output)
    T = len(output.steps)
    p = output.steps[0].particles.shape[1]
    out = np.empty((T, p))
    for k, rec in enumerate(output.steps):
        for j in range(p):
            out[k, j] = concentration(rec.particles[:, j], rec.weights, delta)
    return out


@dataclass
class CPosterior:
    """Discrete posterior over the scale grid {c_t = b_t / a}."""

    c: np.ndarray
    mass: np.ndarray

    @property
    def mode_index(self) -> int:
        return int(np.argmax(self.mass))

    @property
    def mode(self) -> float:
        return float(self.c[self.mode_index])


def c_posterior(output: SmcOutput) -> CPosterior:
    """Normalize the evidence ratios over the geometric scale grid.

    A uniform prior on log b gives every grid point equal prior mass, so the
    posterior mass at step t is proportional to the estimated Z_t / Z_1.
    """
    log_z = np.array([s.log_z_ratio_cum for s in output.steps])
    mass = np.exp(log_z - log_z.max())
    mass /= mass.sum()
    return CPosterior(output.c_values[: len(output.steps)], mass)


@dataclass
class PooledPosterior:
    """All particles from all steps, weighted by evidence and local weight."""

    samples: np.ndarray
    weights: np.ndarray


def pooled_posterior(output: SmcOutput) -> PooledPosterior:
    _require_full_snapshots(output)
    mass = c_posterior(output).mass
    samples = np.concatenate([s.particles for s in output.steps], axis=0)
    weights = np.concatenate(
        [m * s.weights for m, s in zip(mass, output.steps)]
    )
    return PooledPosterior(samples, weights / weights.sum())


@dataclass
class MapPath:
    """EM MAP estimates along the schedule with the seeding bookkeeping."""

    betas: np.ndarray
    log_posts: np.ndarray
    log_posts_particle_seed: np.ndarray
    log_posts_previous_seed: np.ndarray
    converged: np.ndarray


def _snapshot_logliks(output: SmcOutput, data) -> list[np.ndarray]:
    """Per-particle log-likelihoods, recomputed in blocks when not cached."""
    design = make_design(data, output.intercept)
    out = []
    for rec in output.steps:
        if rec.logliks is not None:
            out.append(rec.logliks)
            continue
        lls = np.empty(rec.particles.shape[0])
        for lo in range(0, rec.particles.shape[0], 1024):
            block = rec.particles[lo : lo + 1024]
            etas = block @ design.X.T
            lls[lo : lo + block.shape[0]] = (etas * design.y).sum(axis=1) - np.logaddexp(
                0.0, etas
            ).sum(axis=1)
        out.append(lls)
    return out


def map_path(output: SmcOutput, data, a: float | None = None, **em_kwargs) -> MapPath:
    """MAP estimate per step, seeded twice and keeping the better mode.

    At each step EM runs from the particle with highest posterior density
    and from the previous step's MAP; the candidate with the higher log
    posterior wins, with ties kept on the previous-MAP branch so paths stay
    continuous when the posterior cannot tell the two apart.
    """
    _require_full_snapshots(output)
    a = output.a if a is None else a
    logliks = _snapshot_logliks(output, data)
    mask = np.ones(output.steps[0].particles.shape[1], dtype=bool)
    if output.intercept:
        mask[0] = False
    betas, chosen_lp, lp1s, lp2s, conv = [], [], [], [], []
    prev = None
    for rec, lls in zip(output.steps, logliks):
        prior = GtPrior(a, rec.b / a)
        log_dens = lls + gt_log_density(rec.particles[:, mask], prior).sum(axis=1)
        seed = rec.particles[int(np.argmax(log_dens))]
        cand1 = em_map(data, prior, beta_init=seed, intercept=output.intercept, **em_kwargs)
        lp1 = cand1.trace[-1].log_post
        if prev is None:
            chosen, lp2 = cand1, -np.inf
            lp = lp1
        else:
            cand2 = em_map(data, prior, beta_init=prev, intercept=output.intercept, **em_kwargs)
            lp2 = cand2.trace[-1].log_post
            chosen = cand2 if lp2 >= lp1 else cand1
            lp = max(lp1, lp2)
        prev = chosen.beta
        betas.append(chosen.beta)
        chosen_lp.append(lp)
        lp1s.append(lp1)
        lp2s.append(lp2)
        conv.append(chosen.converged and chosen.inner_converged)
    return MapPath(
        np.stack(betas), np.array(chosen_lp), np.array(lp1s), np.array(lp2s), np.array(conv)
    )


def weighted_kde(samples, weights, grid) -> np.ndarray:
    """Gaussian kernel density on a grid with a weighted Silverman bandwidth.

    Bandwidth 1.06 * sigma_w * ESS^(-1/5) with the weighted standard
    deviation and effective sample size; if the weighted spread vanishes,
    falls back to four grid steps so a point mass still integrates to one.
    """
    samples = np.asarray(samples, dtype=float)
    weights = np.asarray(weights, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if np.unique(samples).size < 2:
        raise ValueError("need at least 2 distinct samples for a density estimate")
    w = weights / weights.sum()
    mu = samples @ w
    sigma = np.sqrt(((samples - mu) ** 2) @ w)
    n_eff = 1.0 / (w @ w)
    h = 1.06 * sigma * n_eff ** (-0.2)
    if not h > 0:
        h = 4.0 * (grid[-1] - grid[0]) / max(grid.size - 1, 1)
    dens = np.empty(grid.size)
    for lo in range(0, grid.size, 512):
        g = grid[lo : lo + 512, None]
        dens[lo : lo + g.size] = np.exp(-0.5 * ((g - samples[None, :]) / h) ** 2) @ w
    return dens / (h * np.sqrt(2.0 * np.pi))


@dataclass
class PooledSummary:
    """Per-coefficient summary with the scale integrated out."""

    names: list[str]
    map_estimate: np.ndarray
    median: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    conc: dict[float, np.ndarray]
    level: float


@dataclass
class SpaResult:
    """All path statistics for one run."""

    names: list[str]
    t: np.ndarray
    b: np.ndarray
    c: np.ndarray
    log_z: np.ndarray
    map_estimates: np.ndarray
    map_converged: np.ndarray
    abs_medians: np.ndarray
    band_lo: np.ndarray
    band_median: np.ndarray
    band_mean: np.ndarray
    band_hi: np.ndarray
    level: float
    concentrations: dict[float, np.ndarray]
    scale_posterior: CPosterior
    pooled: PooledSummary
    deltas: tuple[float, ...] = (0.05, 0.1)


def pooled_summary(
    output: SmcOutput,
    map_estimate: np.ndarray | None = None,
    deltas: tuple[float, ...] = (0.05, 0.1),
    level: float = 0.9,
) -> PooledSummary:
    pooled = pooled_posterior(output)
    p = pooled.samples.shape[1]
    tail = (1.0 - level) / 2.0
    med = np.array([weighted_quantile(pooled.samples[:, j], pooled.weights, 0.5) for j in range(p)])
    lo = np.array([weighted_quantile(pooled.samples[:, j], pooled.weights, tail) for j in range(p)])
    hi = np.array([weighted_quantile(pooled.samples[:, j], pooled.weights, 1.0 - tail) for j in range(p)])
    conc = {
        d: np.array([concentration(pooled.samples[:, j], pooled.weights, d) for j in range(p)])
        for d in deltas
    }
    if map_estimate is None:
        map_estimate = np.full(p, np.nan)
    return PooledSummary(list(output.names), map_estimate, med, lo, hi, conc, level)


def compute_spa(
    output: SmcOutput,
    data,
    deltas: tuple[float, ...] = (0.05, 0.1),
    level: float = 0.9,
    **em_kwargs,
) -> SpaResult:
    """Drive every path statistic for a finished run."""
    _require_full_snapshots(output)
    t = np.array([s.t for s in output.steps])
    b = np.array([s.b for s in output.steps])
    c = b / output.a
    log_z = np.array([s.log_z_ratio_cum for s in output.steps])
    maps = map_path(output, data, **em_kwargs)
    tail = (1.0 - level) / 2.0
    scale_post = c_posterior(output)
    pooled = pooled_summary(
        output, map_estimate=maps.betas[scale_post.mode_index], deltas=deltas, level=level
    )
    return SpaResult(
        names=list(output.names),
        t=t,
        b=b,
        c=c,
        log_z=log_z,
        map_estimates=maps.betas,
        map_converged=maps.converged,
        abs_medians=abs_median_path(output),
        band_lo=quantile_path(output, tail),
        band_median=quantile_path(output, 0.5),
        band_mean=mean_path(output),
        band_hi=quantile_path(output, 1.0 - tail),
        level=level,
        concentrations={d: concentration_path(output, d) for d in deltas},
        scale_posterior=scale_post,
        pooled=pooled,
        deltas=tuple(deltas),
    )


# ---------------------------------------------------------------------------
# CSV emission


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def _write_wide(path, result: SpaResult, matrix: np.ndarray, extra_cols=()):
    with open(path, "w") as fh:
        fh.write("t,b,c," + ",".join(list(extra_cols) + result.names) + "\n")
        for k in range(result.t.size):
            row = [str(result.t[k]), _fmt(result.b[k]), _fmt(result.c[k])]
            fh.write(",".join(row + [_fmt(v) for v in matrix[k]]) + "\n")


def write_spa_csvs(result: SpaResult, outdir) -> None:
    """Emit the summary files: MAP path, absolute medians, concentrations,
    scale posterior, pooled summary, per-coefficient bands, and a report."""
    os.makedirs(outdir, exist_ok=True)
    _write_wide(os.path.join(outdir, "map_path.csv"), result, result.map_estimates)
    _write_wide(os.path.join(outdir, "medians.csv"), result, result.abs_medians)
    with open(os.path.join(outdir, "concentration.csv"), "w") as fh:
        fh.write("t,b,c,delta," + ",".join(result.names) + "\n")
        for d in result.deltas:
            matrix = result.concentrations[d]
            for k in range(result.t.size):
                row = [str(result.t[k]), _fmt(result.b[k]), _fmt(result.c[k]), _fmt(d)]
                fh.write(",".join(row + [_fmt(v) for v in matrix[k]]) + "\n")
    with open(os.path.join(outdir, "c_posterior.csv"), "w") as fh:
        fh.write("t,c,mass\n")
        for k in range(result.t.size):
            fh.write(f"{result.t[k]},{_fmt(result.c[k])},{_fmt(result.scale_posterior.mass[k])}\n")
    with open(os.path.join(outdir, "pooled_summary.csv"), "w") as fh:
        conc_cols = [f"V_{d:g}" for d in result.deltas]
        fh.write("coefficient,map,median,lo90,hi90," + ",".join(conc_cols) + "\n")
        pooled = result.pooled
        for j, name in enumerate(result.names):
            cells = [
                name,
                _fmt(pooled.map_estimate[j]),
                _fmt(pooled.median[j]),
                _fmt(pooled.lo[j]),
                _fmt(pooled.hi[j]),
            ] + [_fmt(pooled.conc[d][j]) for d in result.deltas]
            fh.write(",".join(cells) + "\n")
    with open(os.path.join(outdir, "bands.csv"), "w") as fh:
        fh.write("t,b,c,coefficient,lo,median,mean,hi\n")
        for k in range(result.t.size):
            for j, name in enumerate(result.names):
                fh.write(
                    ",".join(
                        [
                            str(result.t[k]),
                            _fmt(result.b[k]),
                            _fmt(result.c[k]),
                            name,
                            _fmt(result.band_lo[k, j]),
                            _fmt(result.band_median[k, j]),
                            _fmt(result.band_mean[k, j]),
                            _fmt(result.band_hi[k, j]),
                        ]
                    )
                    + "\n"
                )
    write_report(result, os.path.join(outdir, "report.txt"))


def write_report(result: SpaResult, path) -> None:
    rank_delta = result.deltas[-1]
    conc = result.pooled.conc[rank_delta]
    order = np.argsort(-conc, kind="stable")
    sp = result.scale_posterior
    with open(path, "w") as fh:
        fh.write(f"scale posterior mode: c = {_fmt(sp.mode)} (t = {sp.mode_index + 1}, "
                 f"b = {_fmt(result.b[sp.mode_index])})\n")
        fh.write(f"coefficients ranked by pooled concentration V({rank_delta:g}):\n")
        fh.write("rank,coefficient,V,median,lo90,hi90\n")
        rank = 0
        for j in order:
            if result.names[j] == "intercept":
                continue
            rank += 1
            fh.write(
                f"{rank},{result.names[j]},{_fmt(conc[j])},{_fmt(result.pooled.median[j])},"
                f"{_fmt(result.pooled.lo[j])},{_fmt(result.pooled.hi[j])}\n"
            )
