"""Sequential Monte Carlo over a decreasing prior-scale schedule.

The target at step t is the posterior under prior scale c_t = b_t / a for a
geometric sequence b_t = b1 * rho^(t-1).  Each step reweights the previous
particle set by the prior ratio alone (the likelihood cancels in the
incremental weight because the backward kernel is the reversal of the move
kernel), accumulates the evidence ratio Z_t / Z_{t-1} from the weighted
mean of those increments, resamples systematically when the effective
sample size drops below a fraction of N, and then applies several cycles
of single-coordinate random-walk Metropolis moves that leave the current
target invariant.

Randomness is organized as counter-based Philox streams keyed by
(seed, stream tag, step, particle index), so particle moves can be run in
parallel over any partition of the particles with results independent of
the partitioning.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .model import GtPrior, gt_log_density, log_likelihood, log_likelihood_delta


class DegeneracyError(RuntimeError):
    """All particle weights collapsed to zero mass."""


_TAG_INIT = 0
_TAG_MOVE = 1
_TAG_RESAMPLE = 2


def _stream(seed: int, tag: int, t: int = 0, i: int = 0) -> np.random.Generator:
    # 4-bit tag, 24-bit step, 34-bit particle index packed into one key word.
    key = np.array([seed, (tag << 58) | (t << 34) | i], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class Schedule:
    """Geometric scale sequence b_t = b1 * rho^(t-1), t = 1..T."""

    b1: float
    rho: float
    T: int

    def __post_init__(self):
        if not self.b1 > 0:
            raise ValueError(f"b1 must be positive, got {self.b1}")
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (0, 1) for a decreasing schedule, got {self.rho}")
        if self.T < 1:
            raise ValueError(f"T must be >= 1, got {self.T}")

    @property
    def bs(self) -> np.ndarray:
        return self.b1 * self.rho ** np.arange(self.T)


def make_schedule(b1: float, rho: float, T: int) -> Schedule:
    return Schedule(b1, rho, T)


@dataclass
class SmcConfig:
    """Sampler tuning knobs.

    ``init_burn`` / ``init_thin`` control the Metropolis-within-Gibbs chain
    that seeds the particles, ``snapshot_thin`` keeps full particle sets only
    every k-th step (first and last always kept), and ``threads`` caps the
    workers moving particles in parallel.
    """

    N: int = 8192
    cycles: int = 5
    step_sd: float = 0.5
    ess_threshold_frac: float = 0.75
    seed: int = 0
    init_burn: int = 2000
    init_thin: int = 5
    snapshot_thin: int = 1
    threads: int = 1

    def __post_init__(self):
        if self.N < 2:
            raise ValueError(f"need at least 2 particles, got N={self.N}")
        if self.cycles < 1:
            raise ValueError(f"cycles must be >= 1, got {self.cycles}")
        if not self.step_sd > 0:
            raise ValueError(f"step_sd must be positive, got {self.step_sd}")
        if not 0.0 < self.ess_threshold_frac <= 1.0:
            raise ValueError(f"ESS threshold fraction must lie in (0, 1], got {self.ess_threshold_frac}")
        if self.seed < 0:
            raise ValueError(f"seed must be nonnegative, got {self.seed}")
        if self.init_burn < 0 or self.init_thin < 1 or self.snapshot_thin < 1 or self.threads < 1:
            raise ValueError("init_burn >= 0, init_thin >= 1, snapshot_thin >= 1, threads >= 1 required")


@dataclass
class _Design:
    """Design matrix actually fitted: the dataset, optionally with a leading
    unpenalized intercept column."""

    X: np.ndarray
    y: np.ndarray
    penalized: np.ndarray


def make_design(data, intercept: bool) -> _Design:
    if intercept:
        X = np.column_stack([np.ones(data.X.shape[0]), data.X])
        penalized = np.r_[False, np.ones(data.X.shape[1], dtype=bool)]
    else:
        X = data.X
        penalized = np.ones(data.X.shape[1], dtype=bool)
    return _Design(X, data.y, penalized)


class ParticleSystem:
    """N coefficient vectors with cached linear predictors and log-weights.

    ``log_weights`` are kept normalized (logsumexp zero); ``log_z_cum``
    accumulates log(Z_t / Z_1).
    """

    def __init__(self, betas, etas, logliks, log_weights, prior_a, t=1, log_z_cum=0.0, intercept=False):
        self.betas = np.asarray(betas, dtype=float)
        self.etas = np.asarray(etas, dtype=float)
        self.logliks = np.asarray(logliks, dtype=float)
        self.log_weights = np.asarray(log_weights, dtype=float)
        self.prior_a = float(prior_a)
        self.t = int(t)
        self.log_z_cum = float(log_z_cum)
        self.intercept = bool(intercept)

    @property
    def N(self) -> int:
        return self.betas.shape[0]

    @property
    def q(self) -> int:
        return self.betas.shape[1]

    @property
    def weights(self) -> np.ndarray:
        w = np.exp(self.log_weights - logsumexp(self.log_weights))
        return w / w.sum()

    def ess(self) -> float:
        return ess(self.weights)

    def validate(self, design: _Design, atol: float = 1e-10) -> None:
        w = self.weights
        if abs(w.sum() - 1.0) > 1e-12 or np.any(w < 0):
            raise AssertionError("weights are not a normalized distribution")
        gap = np.max(np.abs(self.etas - self.betas @ design.X.T))
        if gap > atol:
            raise AssertionError(f"cached linear predictors drifted by {gap:.3e}")
        recomputed = (self.etas * design.y).sum(axis=1) - np.logaddexp(0.0, self.etas).sum(axis=1)
        if np.max(np.abs(recomputed - self.logliks)) > atol:
            raise AssertionError("cached log-likelihoods drifted")


def ess(weights) -> float:
    """Effective sample size 1 / sum(W_i^2) of normalized weights."""
    w = np.asarray(weights, dtype=float)
    return float(1.0 / (w @ w))


def mwg_sweep(beta, cache, data, prior: GtPrior, step_sd: float, rng, penalized=None):
    """One cycle of single-coordinate random-walk Metropolis updates.

    Mutates ``beta`` in place, returns ``(beta, cache, accepted)``.  The
    proposal draws (one normal and one uniform per coordinate) are taken
    from ``rng`` in bulk at the start of the sweep.  Rejected proposals
    leave the coordinate and the cache bit-identical.
    """
    q = beta.size
    z = rng.standard_normal(q)
    u = rng.random(q)
    accepted = 0
    for j in range(q):
        new_bj = beta[j] + step_sd * z[j]
        ll_new, cache_new = log_likelihood_delta(cache, data, j, beta[j], new_bj)
        delta = ll_new - cache.loglik
        if penalized is None or penalized[j]:
            delta += float(gt_log_density(new_bj, prior) - gt_log_density(beta[j], prior))
        if delta >= 0.0 or np.log(u[j]) < delta:
            beta[j] = new_bj
            cache = cache_new
            accepted += 1
    return beta, cache, accepted


def _run_chain(design: _Design, prior: GtPrior, step_sd, rng, burn, n_keep, thin):
    """Metropolis-within-Gibbs chain from the origin; returns kept states."""
    beta = np.zeros(design.X.shape[1])
    _, cache = log_likelihood(design, beta)
    kept_betas = np.empty((n_keep, beta.size))
    kept_etas = np.empty((n_keep, design.X.shape[0]))
    kept_logliks = np.empty(n_keep)
    accepted = 0
    for sweep in range(burn):
        _, cache, acc = mwg_sweep(beta, cache, design, prior, step_sd, rng, design.penalized)
        accepted += acc
    for k in range(n_keep):
        for _ in range(thin):
            _, cache, acc = mwg_sweep(beta, cache, design, prior, step_sd, rng, design.penalized)
            accepted += acc
        kept_betas[k] = beta
        kept_etas[k] = cache.eta
        kept_logliks[k] = cache.loglik
    total = (burn + n_keep * thin) * beta.size
    return kept_betas, kept_etas, kept_logliks, accepted / max(total, 1)


def init_particles(data, prior_at_b1: GtPrior, config: SmcConfig, intercept: bool = False):
    """Seed the particle set from a long chain targeting the first posterior.

    Burns ``init_burn`` sweeps from the origin, then keeps every
    ``init_thin``-th state until N particles are collected.  All weights
    start equal at 1/N.  Returns ``(system, acceptance_rate)``.
    """
    design = make_design(data, intercept)
    rng = _stream(config.seed, _TAG_INIT)
    betas, etas, logliks, acceptance = _run_chain(
        design, prior_at_b1, config.step_sd, rng, config.init_burn, config.N, config.init_thin
    )
    system = ParticleSystem(
        betas,
        etas,
        logliks,
        np.full(config.N, -np.log(config.N)),
        prior_at_b1.a,
        t=1,
        intercept=intercept,
    )
    return system, acceptance


def reweight(system: ParticleSystem, prior_t: GtPrior, prior_prev: GtPrior):
    """Reweight toward the new scale; the likelihood cancels exactly.

    Returns ``(incremental log-weights, log of the Z_t/Z_{t-1} estimate)``
    and leaves ``system.log_weights`` renormalized.
    """
    if prior_t.a != prior_prev.a:
        raise ValueError("consecutive targets must share the degrees of freedom")
    pen = system.betas[:, _penalized_mask(system)]
    lw = np.sum(gt_log_density(pen, prior_t) - gt_log_density(pen, prior_prev), axis=1)
    unnorm = system.log_weights + lw
    log_z_inc = float(logsumexp(unnorm))
    if not np.isfinite(log_z_inc):
        raise DegeneracyError("all incremental weights vanished")
    system.log_weights = unnorm - log_z_inc
    return lw, log_z_inc


def _penalized_mask(system: ParticleSystem) -> np.ndarray:
    mask = np.ones(system.q, dtype=bool)
    if system.intercept:
        mask[0] = False
    return mask


def systematic_resample_indices(weights, u: float) -> np.ndarray:
    """Ancestor indices for one systematic draw u in [0, 1/N)."""
    w = np.asarray(weights, dtype=float)
    N = w.size
    cum = np.cumsum(w)
    cum /= cum[-1]
    cum[-1] = 1.0
    positions = u + np.arange(N) / N
    return np.searchsorted(cum, positions, side="right")


def systematic_resample(system: ParticleSystem, rng) -> np.ndarray:
    """Resample in place with a single uniform; weights reset to 1/N.

    Returns the selected ancestor indices.
    """
    u = rng.random() / system.N
    idx = systematic_resample_indices(system.weights, u)
    system.betas = system.betas[idx]
    system.etas = system.etas[idx]
    system.logliks = system.logliks[idx]
    system.log_weights = np.full(system.N, -np.log(system.N))
    return idx


def _move_block(betas, etas, logliks, design: _Design, prior: GtPrior, config: SmcConfig, t, i0):
    """Vectorized Metropolis-within-Gibbs cycles for a contiguous particle block.

    Per-particle draws come from streams keyed by the absolute particle
    index, in the same order ``mwg_sweep`` consumes them, so the result for
    each particle is independent of how the blocks are partitioned.
    """
    m, q = betas.shape
    cycles, sd = config.cycles, config.step_sd
    Z = np.empty((m, cycles, q))
    U = np.empty((m, cycles, q))
    for k in range(m):
        g = _stream(config.seed, _TAG_MOVE, t, i0 + k)
        for c in range(cycles):
            Z[k, c] = g.standard_normal(q)
            U[k, c] = g.random(q)
    X, y = design.X, design.y
    accepted = 0
    with np.errstate(divide="ignore"):
        for c in range(cycles):
            for j in range(q):
                new = betas[:, j] + sd * Z[:, c, j]
                # Apply the rounded difference (new - old), matching the
                # single-particle delta update bit for bit.
                etas_prop = etas + np.outer(new - betas[:, j], X[:, j])
                ll_prop = (etas_prop * y).sum(axis=1) - np.logaddexp(0.0, etas_prop).sum(axis=1)
                d = ll_prop - logliks
                if design.penalized[j]:
                    d = d + gt_log_density(new, prior) - gt_log_density(betas[:, j], prior)
                acc = (d >= 0.0) | (np.log(U[:, c, j]) < d)
                betas[acc, j] = new[acc]
                etas[acc] = etas_prop[acc]
                logliks[acc] = ll_prop[acc]
                accepted += int(acc.sum())
    return accepted


def _move_particles(system: ParticleSystem, design: _Design, prior: GtPrior, config: SmcConfig, t: int) -> float:
    """Apply the move cycles to every particle; returns the acceptance rate."""
    N = system.N
    if config.threads == 1:
        accepted = _move_block(system.betas, system.etas, system.logliks, design, prior, config, t, 0)
    else:
        bounds = np.linspace(0, N, config.threads + 1, dtype=int)
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            futures = [
                pool.submit(
                    _move_block,
                    system.betas[lo:hi],
                    system.etas[lo:hi],
                    system.logliks[lo:hi],
                    design,
                    prior,
                    config,
                    t,
                    int(lo),
                )
                for lo, hi in zip(bounds[:-1], bounds[1:])
                if hi > lo
            ]
            accepted = sum(f.result() for f in futures)
    return accepted / (N * config.cycles * system.q)


@dataclass
class StepRecord:
    """Per-step trace entry, with the particle snapshot when retained."""

    t: int
    b: float
    ess: float
    log_z_ratio_cum: float
    acceptance: float
    resampled: bool
    weights: np.ndarray | None = None
    particles: np.ndarray | None = None
    logliks: np.ndarray | None = None


@dataclass
class SmcOutput:
    """Everything a run produced: configuration echo and per-step records."""

    a: float
    schedule: Schedule
    config: SmcConfig
    intercept: bool
    names: list[str]
    steps: list[StepRecord]
    init_acceptance: float

    @property
    def c_values(self) -> np.ndarray:
        return self.schedule.bs / self.a

    def step(self, t: int) -> StepRecord:
        return self.steps[t - 1]


def smc_step(system: ParticleSystem, data, schedule: Schedule, t: int, config: SmcConfig) -> StepRecord:
    """Advance the system from step t-1 to step t (2 <= t <= T).

    Order: reweight to the new target, accumulate the evidence ratio,
    resample if the effective sample size fell below the threshold, then
    move every particle with invariant kernel cycles.
    """
    if not 2 <= t <= schedule.T:
        raise ValueError(f"step index {t} outside [2, {schedule.T}]")
    if system.t != t - 1:
        raise ValueError(f"system is at step {system.t}, cannot advance to {t}")
    a = system.prior_a
    bs = schedule.bs
    prior_prev = GtPrior(a, bs[t - 2] / a)
    prior_t = GtPrior(a, bs[t - 1] / a)
    design = make_design(data, system.intercept)
    try:
        _, log_z_inc = reweight(system, prior_t, prior_prev)
    except DegeneracyError as exc:
        raise DegeneracyError(f"step {t}: {exc}") from None
    system.log_z_cum += log_z_inc
    step_ess = system.ess()
    resampled = step_ess < config.ess_threshold_frac * system.N
    if resampled:
        systematic_resample(system, _stream(config.seed, _TAG_RESAMPLE, t))
    acceptance = _move_particles(system, design, prior_t, config, t)
    system.t = t
    return StepRecord(t, float(bs[t - 1]), step_ess, system.log_z_cum, acceptance, resampled)


def run_sampler(data, a: float, schedule: Schedule, config: SmcConfig, intercept: bool = False) -> SmcOutput:
    """Initialize at the most diffuse scale and sweep the whole schedule."""
    system, init_acc = init_particles(data, GtPrior(a, schedule.bs[0] / a), config, intercept)
    names = (["intercept"] if intercept else []) + list(data.names)

    def retained(t):
        return t == 1 or t == schedule.T or (t - 1) % config.snapshot_thin == 0

    def snapshot(record):
        if retained(record.t):
            record.weights = system.weights
            record.particles = system.betas.copy()
            record.logliks = system.logliks.copy()
        return record

    steps = [
        snapshot(
            StepRecord(1, float(schedule.bs[0]), float(config.N), 0.0, init_acc, False)
        )
    ]
    for t in range(2, schedule.T + 1):
        steps.append(snapshot(smc_step(system, data, schedule, t, config)))
    return SmcOutput(float(a), schedule, config, intercept, names, steps, init_acc)


@dataclass
class FixedBResult:
    samples: np.ndarray
    acceptance: float


def fixed_b_mcmc(
    data,
    prior: GtPrior,
    n_samples: int,
    burn: int = 2000,
    thin: int = 5,
    seed: int = 0,
    step_sd: float = 0.5,
    intercept: bool = False,
) -> FixedBResult:
    """Plain Metropolis-within-Gibbs at one fixed prior, for validation.

    Returns ``n_samples`` kept states (every ``thin``-th sweep after
    ``burn``) and the overall acceptance rate.
    """
    design = make_design(data, intercept)
    rng = _stream(seed, _TAG_INIT)
    betas, _, _, acceptance = _run_chain(design, prior, step_sd, rng, burn, n_samples, thin)
    return FixedBResult(betas, acceptance)


# ---------------------------------------------------------------------------
# Run directory persistence

TRACE_COLUMNS = ("t", "b", "ess", "log_z_ratio_cum", "acceptance_rate")


def write_kv(path, entries: dict) -> None:
    with open(path, "w") as fh:
        for key, value in entries.items():
            fh.write(f"{key} = {value}\n")


def read_kv(path) -> dict:
    entries = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            entries[key.strip()] = value.strip()
    return entries


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def manifest_entries(output: SmcOutput) -> dict:
    import numpy
    import spa

    cfg = output.config
    return {
        "a": _fmt(output.a),
        "b1": _fmt(output.schedule.b1),
        "rho": _fmt(output.schedule.rho),
        "T": output.schedule.T,
        "N": cfg.N,
        "cycles": cfg.cycles,
        "step_sd": _fmt(cfg.step_sd),
        "ess_frac": _fmt(cfg.ess_threshold_frac),
        "seed": cfg.seed,
        "init_burn": cfg.init_burn,
        "init_thin": cfg.init_thin,
        "snapshot_thin": cfg.snapshot_thin,
        "threads": cfg.threads,
        "intercept": str(output.intercept).lower(),
        "spa_version": spa.__version__,
        "numpy_version": numpy.__version__,
    }


def save_run(output: SmcOutput, outdir, extra: dict | None = None) -> None:
    os.makedirs(outdir, exist_ok=True)
    entries = manifest_entries(output)
    if extra:
        entries.update(extra)
    write_kv(os.path.join(outdir, "manifest.txt"), entries)
    with open(os.path.join(outdir, "trace.csv"), "w") as fh:
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for s in output.steps:
            fh.write(f"{s.t},{_fmt(s.b)},{_fmt(s.ess)},{_fmt(s.log_z_ratio_cum)},{_fmt(s.acceptance)}\n")
    for s in output.steps:
        if s.particles is None:
            continue
        with open(os.path.join(outdir, f"particles_t{s.t:04d}.csv"), "w") as fh:
            fh.write("particle_index,weight," + ",".join(output.names) + "\n")
            for i in range(s.particles.shape[0]):
                row = ",".join(_fmt(v) for v in s.particles[i])
                fh.write(f"{i},{_fmt(s.weights[i])},{row}\n")


def load_run(outdir) -> SmcOutput:
    manifest = read_kv(os.path.join(outdir, "manifest.txt"))
    config = SmcConfig(
        N=int(manifest["N"]),
        cycles=int(manifest["cycles"]),
        step_sd=float(manifest["step_sd"]),
        ess_threshold_frac=float(manifest["ess_frac"]),
        seed=int(manifest["seed"]),
        init_burn=int(manifest["init_burn"]),
        init_thin=int(manifest["init_thin"]),
        snapshot_thin=int(manifest["snapshot_thin"]),
        threads=int(manifest["threads"]),
    )
    schedule = Schedule(float(manifest["b1"]), float(manifest["rho"]), int(manifest["T"]))
    a = float(manifest["a"])
    intercept = manifest.get("intercept", "false") == "true"
    steps = []
    names: list[str] = []
    with open(os.path.join(outdir, "trace.csv")) as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != TRACE_COLUMNS:
            raise ValueError(f"{outdir}/trace.csv: unexpected columns {header}")
        for line in fh:
            t_s, b_s, ess_s, lz_s, acc_s = line.strip().split(",")
            t = int(t_s)
            e = float(ess_s)
            steps.append(
                StepRecord(t, float(b_s), e, float(lz_s), float(acc_s),
                           t > 1 and e < config.ess_threshold_frac * config.N)
            )
    for record in steps:
        path = os.path.join(outdir, f"particles_t{record.t:04d}.csv")
        if not os.path.exists(path):
            continue
        with open(path) as fh:
            names = fh.readline().strip().split(",")[2:]
            block = np.loadtxt(fh, delimiter=",", ndmin=2)
        record.weights = block[:, 1]
        record.particles = block[:, 2:]
    init_acc = steps[0].acceptance if steps else 0.0
    return SmcOutput(a, schedule, config, intercept, names, steps, init_acc)
