"""Command-line front end.

Five subcommands: ``simulate`` writes a synthetic dataset and its truth
table, ``run`` sweeps the SMC sampler over the scale schedule and persists
the run directory, ``summarize`` computes every path statistic into CSVs
plus a text report, ``mcmc-check`` validates a run against a fixed-scale
chain, and ``plot`` renders the summary CSVs as standalone SVG files.

Configuration is a flat key=value file mirroring the flags; flags override
file values, and a run's manifest is itself a valid config so
``run --from-manifest`` reproduces a run byte for byte.

Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .data import (
    DataError,
    SimSpec,
    load_dataset,
    save_dataset,
    scenario_a,
    scenario_a_small,
    scenario_b,
    simulate_dataset,
)
from .model import GtPrior, QuadratureError
from .smc import (
    DegeneracyError,
    SmcConfig,
    fixed_b_mcmc,
    load_run,
    make_schedule,
    read_kv,
    run_sampler,
    save_run,
)
from .summary import SnapshotError, compute_spa, weighted_kde, weighted_quantile, write_spa_csvs
from .svg import GRAY, PALETTE, SvgFigure

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

_SCENARIOS = {"a": scenario_a, "b": scenario_b, "a-small": scenario_a_small}


def _parse_bool(text: str) -> bool:
    lowered = str(text).strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


RUN_KEYS = {
    "data": str,
    "a": float,
    "b1": float,
    "rho": float,
    "T": int,
    "N": int,
    "cycles": int,
    "step_sd": float,
    "ess_frac": float,
    "seed": int,
    "init_burn": int,
    "init_thin": int,
    "snapshot_thin": int,
    "threads": int,
    "intercept": _parse_bool,
}

RUN_DEFAULTS = {
    "data": None,
    "a": 4.0,
    "b1": 2.0,
    "rho": 0.98,
    "T": 350,
    "N": 8192,
    "cycles": 5,
    "step_sd": 0.5,
    "ess_frac": 0.75,
    "seed": 0,
    "init_burn": 2000,
    "init_thin": 5,
    "snapshot_thin": 1,
    "threads": None,
    "intercept": False,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spa", description="Sparsity-path analysis for Bayesian logistic regression."
    )
    parser.add_argument("--version", action="version", version=f"spa {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="write a synthetic dataset and its truth table")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--scenario", choices=sorted(_SCENARIOS), help="reference design shortcut")
    sim.add_argument("--n", type=int, default=500)
    sim.add_argument("--p", type=int, default=50)
    sim.add_argument("--block-size", type=int, default=10)
    sim.add_argument("--rho", type=float, default=0.45, help="within-block latent correlation")
    sim.add_argument(
        "--nonzero",
        action="append",
        default=None,
        metavar="IDX=BETA",
        help="1-based marker index and coefficient; repeatable",
    )
    sim.add_argument("--nonzero-count", type=int, default=0, help="draw this many random signals")
    sim.add_argument("--coef-sd", type=float, default=0.2)
    sim.add_argument(
        "--sd-is-variance", action="store_true", help="read --coef-sd as a variance instead"
    )
    sim.add_argument("--seed", type=int, default=0)
    sim.set_defaults(func=cmd_simulate)

    run = sub.add_parser("run", help="run the SMC sampler over the scale schedule")
    run.add_argument("--out", required=True, help="run directory to create")
    run.add_argument("--config", help="key=value file with defaults for the flags below")
    run.add_argument("--from-manifest", help="reproduce a previous run's manifest")
    run.add_argument("--data", help="dataset CSV")
    run.add_argument("--a", type=float, help="prior degrees of freedom")
    run.add_argument("--b1", type=float, help="initial scale-schedule rate")
    run.add_argument("--rho", type=float, help="geometric schedule ratio")
    run.add_argument("--T", type=int, help="schedule length")
    run.add_argument("--N", type=int, help="particle count")
    run.add_argument("--cycles", type=int, help="move-kernel cycles per step")
    run.add_argument("--step-sd", type=float, dest="step_sd", help="random-walk proposal sd")
    run.add_argument("--ess-frac", type=float, dest="ess_frac", help="resampling ESS fraction")
    run.add_argument("--seed", type=int)
    run.add_argument("--init-burn", type=int, dest="init_burn")
    run.add_argument("--init-thin", type=int, dest="init_thin")
    run.add_argument("--snapshot-thin", type=int, dest="snapshot_thin")
    run.add_argument("--threads", type=int, help="worker cap (or SPA_THREADS)")
    run.add_argument(
        "--intercept",
        action="store_const",
        const=True,
        default=None,
        help="add an unpenalized intercept",
    )
    run.set_defaults(func=cmd_run)

    summ = sub.add_parser("summarize", help="compute path statistics from a run directory")
    summ.add_argument("--run", required=True, help="run directory")
    summ.add_argument("--out", help="summary directory (default <run>/summary)")
    summ.add_argument("--data", help="dataset CSV (default: path recorded in the manifest)")
    summ.add_argument(
        "--delta", type=float, action="append", default=None, help="concentration half-width; repeatable"
    )
    summ.add_argument("--level", type=float, default=0.9, help="credible-interval level")
    summ.set_defaults(func=cmd_summarize)

    chk = sub.add_parser("mcmc-check", help="fixed-scale chain check of a sampler run")
    chk.add_argument("--data", required=True)
    chk.add_argument("--a", type=float, default=4.0)
    chk.add_argument("--b", type=float, required=True, help="fixed rate; the prior scale is b/a")
    chk.add_argument("--iters", type=int, default=100_000, help="kept samples")
    chk.add_argument("--burn", type=int, default=2000)
    chk.add_argument("--thin", type=int, default=1)
    chk.add_argument("--step-sd", type=float, dest="step_sd", default=0.5)
    chk.add_argument("--seed", type=int, default=0)
    chk.add_argument("--out", required=True, help="output directory")
    chk.add_argument("--run", help="run directory to compare against (nearest-b snapshot)")
    chk.add_argument("--intercept", action="store_true")
    chk.set_defaults(func=cmd_mcmc_check)

    plot = sub.add_parser("plot", help="render summary CSVs as SVG")
    plot.add_argument("--summary", required=True, help="summary directory")
    plot.add_argument("--out", help="plot directory (default <summary>/plots)")
    plot.add_argument(
        "--kind",
        choices=["spa", "coefficients", "marginal", "density", "all"],
        default="all",
    )
    plot.add_argument(
        "--coef", action="append", default=None, help="coefficient name to plot; repeatable"
    )
    plot.add_argument("--truth", help="truth CSV from simulate, to color true signals")
    plot.add_argument("--run", help="run directory (needed for density plots)")
    plot.add_argument("--grid-points", type=int, dest="grid_points", default=301,
                      help="density-estimate grid size")
    plot.set_defaults(func=cmd_plot)
    return parser


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    try:
        if args.scenario:
            spec = _SCENARIOS[args.scenario](seed=args.seed)
        else:
            nonzero = []
            for item in args.nonzero or []:
                idx, _, value = item.partition("=")
                nonzero.append((int(idx), float(value)))
            spec = SimSpec(
                n=args.n,
                p=args.p,
                block_size=args.block_size,
                within_block_corr=args.rho,
                nonzero=nonzero,
                nonzero_count=args.nonzero_count,
                coef_sd=args.coef_sd,
                sd_is_variance=args.sd_is_variance,
                seed=args.seed,
            )
        data, beta = simulate_dataset(spec)
    except (DataError, ValueError) as exc:
        print(f"spa simulate: {exc}", file=sys.stderr)
        return EXIT_USAGE
    os.makedirs(args.out, exist_ok=True)
    save_dataset(data, os.path.join(args.out, "dataset.csv"))
    with open(os.path.join(args.out, "truth.csv"), "w") as fh:
        fh.write("index,beta\n")
        for j in np.flatnonzero(beta):
            fh.write(f"{j + 1},{beta[j]:.17g}\n")
    print(f"wrote {args.out}/dataset.csv: n={data.n} p={data.p} case fraction={data.y.mean():.4f}")
    print(f"wrote {args.out}/truth.csv: {np.count_nonzero(beta)} nonzero coefficients")
    return EXIT_OK


# ---------------------------------------------------------------------------
# run


def _resolve_run_settings(args) -> dict:
    settings = dict(RUN_DEFAULTS)
    for path_attr in ("config", "from_manifest"):
        path = getattr(args, path_attr)
        if path:
            for key, raw in read_kv(path).items():
                if key in RUN_KEYS:
                    settings[key] = RUN_KEYS[key](raw)
    for key in RUN_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    if settings["threads"] is None:
        settings["threads"] = int(os.environ.get("SPA_THREADS", "1"))
    if settings["intercept"] is None:
        settings["intercept"] = False
    if not settings["data"]:
        raise DataError("no dataset given: pass --data or a config/manifest with a data entry")
    return settings


def cmd_run(args) -> int:
    settings = _resolve_run_settings(args)
    data = load_dataset(settings["data"])
    schedule = make_schedule(settings["b1"], settings["rho"], settings["T"])
    config = SmcConfig(
        N=settings["N"],
        cycles=settings["cycles"],
        step_sd=settings["step_sd"],
        ess_threshold_frac=settings["ess_frac"],
        seed=settings["seed"],
        init_burn=settings["init_burn"],
        init_thin=settings["init_thin"],
        snapshot_thin=settings["snapshot_thin"],
        threads=settings["threads"],
    )
    output = run_sampler(data, settings["a"], schedule, config, intercept=settings["intercept"])
    save_run(output, args.out, extra={"data": settings["data"]})
    last = output.steps[-1]
    print(
        f"wrote {args.out}: T={schedule.T} steps, N={config.N} particles, "
        f"log Z_T/Z_1 = {last.log_z_ratio_cum:.4f}, final ESS = {last.ess:.1f}"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# summarize


def cmd_summarize(args) -> int:
    manifest = read_kv(os.path.join(args.run, "manifest.txt"))
    output = load_run(args.run)
    data_path = args.data or manifest.get("data")
    if not data_path:
        raise DataError("manifest records no dataset path; pass --data")
    data = load_dataset(data_path)
    deltas = tuple(args.delta) if args.delta else (0.05, 0.1)
    result = compute_spa(output, data, deltas=deltas, level=args.level)
    outdir = args.out or os.path.join(args.run, "summary")
    write_spa_csvs(result, outdir)
    sp = result.scale_posterior
    print(f"wrote {outdir}: scale posterior mode c = {sp.mode:.6g} (step {sp.mode_index + 1})")
    rank_delta = deltas[-1]
    conc = result.pooled.conc[rank_delta]
    order = [j for j in np.argsort(-conc) if result.names[j] != "intercept"]
    print(f"top coefficients by pooled V({rank_delta:g}):")
    for rank, j in enumerate(order[:5], start=1):
        print(f"  {rank}. {result.names[j]}  V={conc[j]:.3f}  median={result.pooled.median[j]:+.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# mcmc-check


def cmd_mcmc_check(args) -> int:
    data = load_dataset(args.data)
    prior = GtPrior(args.a, args.b / args.a)
    result = fixed_b_mcmc(
        data,
        prior,
        args.iters,
        burn=args.burn,
        thin=args.thin,
        seed=args.seed,
        step_sd=args.step_sd,
        intercept=args.intercept,
    )
    os.makedirs(args.out, exist_ok=True)
    names = (["intercept"] if args.intercept else []) + list(data.names)
    with open(os.path.join(args.out, "samples.csv"), "w") as fh:
        fh.write("sample_index," + ",".join(names) + "\n")
        for i in range(result.samples.shape[0]):
            fh.write(f"{i}," + ",".join(f"{v:.17g}" for v in result.samples[i]) + "\n")
    print(
        f"wrote {args.out}/samples.csv: {args.iters} kept samples at b={args.b:g} "
        f"(c={prior.c:g}), acceptance {result.acceptance:.3f}"
    )
    if not args.run:
        return EXIT_OK

    output = load_run(args.run)
    candidates = [s for s in output.steps if s.particles is not None]
    nearest = min(candidates, key=lambda s: abs(s.b - args.b))
    if nearest.particles.shape[1] != len(names):
        raise DataError(
            f"run has {nearest.particles.shape[1]} coordinates but the chain has "
            f"{len(names)}; match the --intercept setting of the run"
        )
    uniform = np.full(result.samples.shape[0], 1.0 / result.samples.shape[0])
    rows = []
    for j, name in enumerate(names):
        chain = {
            q: weighted_quantile(result.samples[:, j], uniform, q) for q in (0.05, 0.5, 0.95)
        }
        smc = {
            q: weighted_quantile(nearest.particles[:, j], nearest.weights, q)
            for q in (0.05, 0.5, 0.95)
        }
        rows.append((name, chain, smc))
    report_path = os.path.join(args.out, "comparison.csv")
    with open(report_path, "w") as fh:
        fh.write(
            "coefficient,chain_median,smc_median,median_diff,"
            "chain_lo,smc_lo,lo_diff,chain_hi,smc_hi,hi_diff\n"
        )
        for name, chain, smc in rows:
            fh.write(
                f"{name},{chain[0.5]:.6g},{smc[0.5]:.6g},{abs(chain[0.5] - smc[0.5]):.6g},"
                f"{chain[0.05]:.6g},{smc[0.05]:.6g},{abs(chain[0.05] - smc[0.05]):.6g},"
                f"{chain[0.95]:.6g},{smc[0.95]:.6g},{abs(chain[0.95] - smc[0.95]):.6g}\n"
            )
    worst_med = max(abs(c[0.5] - s[0.5]) for _, c, s in rows)
    worst_end = max(
        max(abs(c[0.05] - s[0.05]), abs(c[0.95] - s[0.95])) for _, c, s in rows
    )
    print(
        f"wrote {report_path}: compared against snapshot t={nearest.t} (b={nearest.b:.6g}); "
        f"worst median diff {worst_med:.4f}, worst interval-endpoint diff {worst_end:.4f}"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# plot


def _read_wide_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        body = np.loadtxt(fh, delimiter=",", ndmin=2)
    names = header[3:]
    return body[:, 0].astype(int), body[:, 1], body[:, 2], names, body[:, 3:]


def _read_concentration_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        body = np.loadtxt(fh, delimiter=",", ndmin=2)
    names = header[4:]
    by_delta = {}
    for delta in np.unique(body[:, 3]):
        rows = body[body[:, 3] == delta]
        by_delta[float(delta)] = (rows[:, 2], rows[:, 4:])
    return names, by_delta


def _read_c_posterior(path):
    with open(path) as fh:
        fh.readline()
        body = np.loadtxt(fh, delimiter=",", ndmin=2)
    return body[:, 1], body[:, 2]


def _read_pooled(path):
    names, table = [], []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            cells = line.strip().split(",")
            names.append(cells[0])
            table.append([float(v) for v in cells[1:]])
    return header[1:], names, np.array(table, dtype=float)


def _read_bands(path):
    per_coef: dict[str, list] = {}
    cs: dict[str, list] = {}
    with open(path) as fh:
        fh.readline()
        for line in fh:
            t, b, c, name, lo, med, mean, hi = line.strip().split(",")
            per_coef.setdefault(name, []).append((float(lo), float(med), float(mean), float(hi)))
            cs.setdefault(name, []).append(float(c))
    return {
        name: (np.array(cs[name]), np.array(vals, dtype=float))
        for name, vals in per_coef.items()
    }


def _truth_indices(path) -> set[int]:
    indices = set()
    with open(path) as fh:
        fh.readline()
        for line in fh:
            indices.add(int(line.split(",")[0]))
    return indices


def _coef_colors(names, highlight):
    colors = {}
    k = 0
    for name in names:
        if name in highlight:
            colors[name] = PALETTE[k % len(PALETTE)]
            k += 1
        else:
            colors[name] = GRAY
    return colors


def _ylim(*arrays, pad=0.05):
    lo = min(float(np.min(a)) for a in arrays)
    hi = max(float(np.max(a)) for a in arrays)
    if hi <= lo:
        lo, hi = lo - 1.0, hi + 1.0
    span = hi - lo
    return lo - pad * span, hi + pad * span


def plot_spa_panels(summary_dir, out_path, truth: set[int] | None = None):
    """Four panels against log c: MAP paths, absolute medians, the scale
    posterior with its mode marked, and concentrations."""
    t, b, c, names, maps = _read_wide_csv(os.path.join(summary_dir, "map_path.csv"))
    _, _, _, _, medians = _read_wide_csv(os.path.join(summary_dir, "medians.csv"))
    conc_names, conc = _read_concentration_csv(os.path.join(summary_dir, "concentration.csv"))
    c_grid, mass = _read_c_posterior(os.path.join(summary_dir, "c_posterior.csv"))
    logc = np.log(c)
    mode_logc = float(np.log(c_grid[int(np.argmax(mass))]))
    pooled_header, pooled_names, pooled = _read_pooled(os.path.join(summary_dir, "pooled_summary.csv"))

    if truth:
        highlight = {names[j - 1] for j in sorted(truth) if 1 <= j <= len(names)}
    else:
        v_col = len(pooled_header) - 1
        order = np.argsort(-pooled[:, v_col])
        highlight = {pooled_names[j] for j in order[:4]}
    colors = _coef_colors(names, highlight)

    fig = SvgFigure(1000, 820, title="sparsity path")
    xlim = (float(logc.min()), float(logc.max()))
    rects = [(70, 60, 380, 280), (570, 60, 380, 280), (70, 450, 380, 280), (570, 450, 380, 280)]

    panel = fig.panel(rects[0], xlim, _ylim(maps), title="MAP estimates", xlabel="log c", ylabel="coefficient")
    for j, name in enumerate(names):
        if colors[name] is GRAY:
            panel.polyline(logc, maps[:, j], color=GRAY, width=1.0)
    for j, name in enumerate(names):
        if colors[name] is not GRAY:
            panel.polyline(logc, maps[:, j], color=colors[name], width=1.6)
    panel.vline(mode_logc)

    panel = fig.panel(rects[1], xlim, _ylim(medians), title="absolute medians", xlabel="log c", ylabel="|median|")
    for j, name in enumerate(names):
        if colors[name] is GRAY:
            panel.polyline(logc, medians[:, j], color=GRAY, width=1.0)
    for j, name in enumerate(names):
        if colors[name] is not GRAY:
            panel.polyline(logc, medians[:, j], color=colors[name], width=1.6)
    panel.vline(mode_logc)

    panel = fig.panel(
        rects[2], xlim, _ylim(mass, np.zeros(1)), title="posterior over the scale", xlabel="log c", ylabel="mass"
    )
    panel.polyline(np.log(c_grid), mass, color="black", width=1.6)
    panel.vline(mode_logc)

    delta = max(conc.keys())
    c_conc, v = conc[delta]
    panel = fig.panel(
        rects[3], xlim, (-0.02, 1.02), title=f"concentration V({delta:g})", xlabel="log c", ylabel="V"
    )
    for j, name in enumerate(conc_names):
        if colors.get(name, GRAY) is GRAY:
            panel.polyline(np.log(c_conc), v[:, j], color=GRAY, width=1.0)
    for j, name in enumerate(conc_names):
        if colors.get(name, GRAY) is not GRAY:
            panel.polyline(np.log(c_conc), v[:, j], color=colors[name], width=1.6)
    panel.vline(mode_logc)

    fig.legend(455, 70, sorted((n, colors[n]) for n in highlight))
    fig.save(out_path)


def plot_coefficient_bands(summary_dir, outdir, coefs=None):
    """Per-coefficient band plot: credible interval, median, mean, and MAP."""
    bands = _read_bands(os.path.join(summary_dir, "bands.csv"))
    t, b, c, names, maps = _read_wide_csv(os.path.join(summary_dir, "map_path.csv"))
    c_grid, mass = _read_c_posterior(os.path.join(summary_dir, "c_posterior.csv"))
    mode_logc = float(np.log(c_grid[int(np.argmax(mass))]))
    pooled_header, pooled_names, pooled = _read_pooled(os.path.join(summary_dir, "pooled_summary.csv"))
    if not coefs:
        v_col = len(pooled_header) - 1
        order = np.argsort(-pooled[:, v_col])
        coefs = [pooled_names[j] for j in order[:4]]
    written = []
    for name in coefs:
        if name not in bands:
            raise DataError(f"coefficient {name!r} not present in bands.csv")
        cs, vals = bands[name]
        logc = np.log(cs)
        j = names.index(name)
        fig = SvgFigure(560, 440, title=name)
        panel = fig.panel(
            (70, 50, 430, 310),
            (float(logc.min()), float(logc.max())),
            _ylim(vals, maps[:, j]),
            xlabel="log c",
            ylabel="coefficient",
        )
        panel.polyline(logc, vals[:, 0], color="#2ca02c", width=1.2)
        panel.polyline(logc, vals[:, 3], color="#2ca02c", width=1.2)
        panel.polyline(logc, vals[:, 1], color="black", width=1.4)
        panel.polyline(logc, vals[:, 2], color="#1f77b4", width=1.2)
        panel.polyline(logc, maps[:, j], color="#d62728", width=1.4)
        panel.vline(mode_logc)
        fig.legend(
            380,
            70,
            [
                ("90% interval", "#2ca02c"),
                ("median", "black"),
                ("mean", "#1f77b4"),
                ("MAP", "#d62728"),
            ],
        )
        path = os.path.join(outdir, f"coefficient_{name}.svg")
        fig.save(path)
        written.append(path)
    return written


def plot_marginal(summary_dir, out_path):
    """Scale-marginalized summaries: intervals with median and MAP markers,
    and concentration bars for each delta."""
    header, names, table = _read_pooled(os.path.join(summary_dir, "pooled_summary.csv"))
    keep = [k for k, n in enumerate(names) if n != "intercept"]
    names = [names[k] for k in keep]
    table = table[keep]
    p = len(names)
    maps, med, lo, hi = table[:, 0], table[:, 1], table[:, 2], table[:, 3]
    v_cols = list(range(4, table.shape[1]))
    fig = SvgFigure(1000, 460, title="scale-marginalized posterior")
    xlim = (0.0, p + 1.0)
    panel = fig.panel(
        (70, 50, 400, 330),
        xlim,
        _ylim(lo, hi, maps[np.isfinite(maps)] if np.isfinite(maps).any() else lo),
        title="90% intervals, median, MAP",
        xlabel="coefficient index",
        ylabel="value",
    )
    for j in range(p):
        panel.vbar(j + 1.0, lo[j], hi[j], color="#2ca02c", width=1.6)
        panel.marker(j + 1.0, med[j], color="black", kind="circle", size=2.0)
        if np.isfinite(maps[j]):
            panel.marker(j + 1.0, maps[j], color="#d62728", kind="cross", size=3.0)
    panel = fig.panel(
        (570, 50, 400, 330),
        xlim,
        (0.0, 1.05),
        title="marginal concentration",
        xlabel="coefficient index",
        ylabel="V",
    )
    bar_colors = ["#d62728", "#1f77b4"]
    n_deltas = len(v_cols)
    for j in range(p):
        for k, col in enumerate(v_cols):
            offset = (k - (n_deltas - 1) / 2) * 0.25
            panel.vbar(j + 1.0 + offset, 0.0, table[j, col], color=bar_colors[k % 2], width=3.0)
    fig.legend(
        455, 70, [(header[col].replace("_", " = "), bar_colors[k % 2]) for k, col in enumerate(v_cols)]
    )
    fig.save(out_path)


def plot_densities(summary_dir, run_dir, outdir, coefs=None, grid_points=301):
    """Weighted density estimates of selected coefficients at a few scales."""
    output = load_run(run_dir)
    steps = [s for s in output.steps if s.particles is not None]
    pooled_header, pooled_names, pooled = _read_pooled(os.path.join(summary_dir, "pooled_summary.csv"))
    if not coefs:
        v_col = len(pooled_header) - 1
        order = np.argsort(-pooled[:, v_col])
        coefs = [pooled_names[j] for j in order[:4]]
    c_grid, mass = _read_c_posterior(os.path.join(summary_dir, "c_posterior.csv"))
    mode_c = float(c_grid[int(np.argmax(mass))])
    picks = sorted({0, len(steps) // 3, 2 * len(steps) // 3, len(steps) - 1})
    mode_step = int(np.argmin([abs(s.b / output.a - mode_c) for s in steps]))
    picks = sorted(set(picks) | {mode_step})
    written = []
    for name in coefs:
        if name not in output.names:
            raise DataError(f"coefficient {name!r} not present in the run")
        j = output.names.index(name)
        samples = [steps[k].particles[:, j] for k in picks]
        lo = min(s.min() for s in samples) - 0.3
        hi = max(s.max() for s in samples) + 0.3
        grid = np.linspace(lo, hi, grid_points)
        curves = [
            weighted_kde(steps[k].particles[:, j], steps[k].weights, grid) for k in picks
        ]
        fig = SvgFigure(560, 440, title=f"{name} posterior densities")
        panel = fig.panel(
            (70, 50, 430, 310),
            (lo, hi),
            _ylim(np.zeros(1), *curves),
            xlabel="coefficient",
            ylabel="density",
        )
        entries = []
        for idx, (k, dens) in enumerate(zip(picks, curves)):
            color = PALETTE[idx % len(PALETTE)]
            panel.polyline(grid, dens, color=color, width=1.4)
            entries.append((f"c = {steps[k].b / output.a:.4g}", color))
        fig.legend(380, 70, entries)
        path = os.path.join(outdir, f"density_{name}.svg")
        fig.save(path)
        written.append(path)
    return written


def cmd_plot(args) -> int:
    outdir = args.out or os.path.join(args.summary, "plots")
    os.makedirs(outdir, exist_ok=True)
    truth = _truth_indices(args.truth) if args.truth else None
    written = []
    if args.kind in ("spa", "all"):
        path = os.path.join(outdir, "spa.svg")
        plot_spa_panels(args.summary, path, truth)
        written.append(path)
    if args.kind in ("coefficients", "all"):
        written.extend(plot_coefficient_bands(args.summary, outdir, args.coef))
    if args.kind in ("marginal", "all"):
        path = os.path.join(outdir, "marginal.svg")
        plot_marginal(args.summary, path)
        written.append(path)
    if args.kind == "density" or (args.kind == "all" and args.run):
        if not args.run:
            raise DataError("density plots need --run to read the particle snapshots")
        written.extend(
            plot_densities(args.summary, args.run, outdir, args.coef, args.grid_points)
        )
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (DegeneracyError, QuadratureError, FloatingPointError) as exc:
        print(f"spa {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, SnapshotError, OSError) as exc:
        print(f"spa {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"spa {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
