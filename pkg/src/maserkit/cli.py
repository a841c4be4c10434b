"""Command-line front end.

Each subcommand reads one TOML scenario, runs a single analysis, and writes
plot-ready CSV tables (with JSON mirrors and rendered figures) into the
output directory.  Exit codes: 0 success, 2 configuration error, 3 numerical
failure, 4 I/O failure.
"""

import argparse
import json
import sys

import numpy as np

from . import config, fock, liouvillian, micromaser, report, statistics, trajectory
from .errors import (
    ConfigError,
    FixedPointError,
    ImpossibleOutcomeError,
    NormalizationUnderflowError,
    TruncationError,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

_NUMERICAL = (
    TruncationError,
    ImpossibleOutcomeError,
    NormalizationUnderflowError,
    FixedPointError,
    FloatingPointError,
)


def _time_grid(cfg):
    return np.linspace(0.0, cfg.t_max, cfg.n_points)


def _require_pair(cfg):
    """Two-branch kick for the detection-statistics commands."""
    if cfg.kick_type not in ("jc", "parity"):
        raise ConfigError(
            [f"kick.type = {cfg.kick_type!r} has no down/up branches; "
             "this command needs 'jc' or 'parity'"]
        )
    return cfg.build_kick()


def _net_kick_super(cfg):
    """Net kick superoperator K (kick map is 1 + K) for periodic kicking."""
    if cfg.kick_type == "none":
        raise ConfigError(["kick.type = 'none' but this command needs a kick"])
    built = cfg.build_kick()
    if isinstance(built, micromaser.KickPair):
        return built.net_effect()
    return built


def _ensemble_generator(cfg):
    kick = _require_pair(cfg)
    dim = cfg.fock_dim
    L0 = micromaser.scully_lamb(cfg.oscillator, kick, cfg.detection.rate, dim)
    return kick, L0


def cmd_spectrum(cfg, outdir, seed):
    rows = []
    for n in range(cfg.spectrum_n_max + 1):
        for k in range(-cfg.spectrum_k_max, cfg.spectrum_k_max + 1):
            lam = liouvillian.damping_eigenvalue(n, k, cfg.oscillator)
            rows.append((n, k, lam.real, lam.imag))
    meta = report.base_meta("spectrum", cfg, seed)
    paths = report.write_table(
        outdir, "spectrum",
        ("n", "k", "eigenvalue_re_per_A", "eigenvalue_im_per_A"),
        rows, meta, cfg.json_mirror,
    )
    fig = f"{outdir}/spectrum.png"
    report.save_line_figure(
        fig,
        [r[3] for r in rows],
        {"ladder": [r[2] for r in rows]},
        "Im lambda / A", "Re lambda / A", scatter=True,
    )
    return paths + [fig]


def cmd_steady(cfg, outdir, seed):
    dim = cfg.fock_dim
    L = liouvillian.liouvillian(cfg.oscillator, dim)
    rho0 = fock.thermal_state(cfg.steady_initial_nbar, dim)
    if cfg.steady_alpha != 0:
        d_op = fock.displacement(dim, cfg.steady_alpha)
        rho0 = d_op @ rho0 @ d_op.conj().T
    times = _time_grid(cfg)
    num_op = fock.number(dim)
    a_op = fock.annihilation(dim)
    rows = []
    number_curve = []
    for t, state in zip(times, fock.propagate_series(L, rho0, times)):
        n_t = np.trace(num_op @ state).real
        a_t = np.trace(a_op @ state)
        rows.append((t, n_t, a_t.real, a_t.imag))
        number_curve.append(n_t)
    meta = report.base_meta("steady", cfg, seed, nbar=cfg.oscillator.nbar)
    paths = report.write_table(
        outdir, "steady",
        ("time_At", "number_expectation", "a_re", "a_im"),
        rows, meta, cfg.json_mirror,
    )
    fig = f"{outdir}/steady.png"
    report.save_line_figure(
        fig, times,
        {"number": number_curve,
         "|a|": [abs(complex(r[2], r[3])) for r in rows]},
        "A t", "expectation",
    )
    return paths + [fig]


def cmd_correlations(cfg, outdir, seed):
    kick, L0 = _ensemble_generator(cfg)
    rho_ss = fock.steady_state(L0)
    times = _time_grid(cfg)
    curves = {
        pair: statistics.correlation(pair, L0, kick, rho_ss, times).values
        for pair in ("down-down", "down-up", "up-down", "up-up")
    }
    rows = list(zip(times, curves["down-down"], curves["down-up"],
                    curves["up-down"], curves["up-up"]))
    meta = report.base_meta("correlations", cfg, seed)
    paths = report.write_table(
        outdir, "correlations",
        ("time_At", "g_down_down", "g_down_up", "g_up_down", "g_up_up"),
        rows, meta, cfg.json_mirror,
    )
    fig = f"{outdir}/correlations.png"
    report.save_line_figure(fig, times, curves, "A t", "click correlation")
    return paths + [fig]


def cmd_waiting(cfg, outdir, seed):
    kick, L0 = _ensemble_generator(cfg)
    times = _time_grid(cfg)
    curve = statistics.waiting_time_density(
        L0, kick, cfg.detection, cfg.waiting_from, cfg.waiting_to, times
    )
    rows = list(zip(times, curve.values))
    meta = report.base_meta(
        "waiting", cfg, seed,
        from_branch=cfg.waiting_from, to_branch=cfg.waiting_to,
    )
    paths = report.write_table(
        outdir, "waiting", ("time_At", "density_per_A"), rows, meta,
        cfg.json_mirror,
    )
    fig = f"{outdir}/waiting.png"
    report.save_line_figure(
        fig, times, {f"{cfg.waiting_from} to {cfg.waiting_to}": curve.values},
        "A t", "waiting-time density / A",
    )
    return paths + [fig]


def cmd_counting(cfg, outdir, seed):
    kick, L0 = _ensemble_generator(cfg)
    dist = statistics.counting_distribution(
        L0, kick, cfg.detection, cfg.counting_t, cfg.counting_n_max
    )
    n_values = np.arange(dist.probs.size)
    rows = list(zip(n_values, dist.probs))
    meta = report.base_meta(
        "counting", cfg, seed,
        t_At=cfg.counting_t, truncation_mass=repr(float(dist.truncation_mass)),
    )
    paths = report.write_table(
        outdir, "counting", ("n", "probability"), rows, meta, cfg.json_mirror
    )
    fig = f"{outdir}/counting.png"
    report.save_stem_figure(fig, n_values, dist.probs, "detected clicks n",
                            "probability")
    return paths + [fig]


def cmd_fano(cfg, outdir, seed):
    kick, L0 = _ensemble_generator(cfg)
    times = _time_grid(cfg)[1:]  # Q is defined for t > 0 (Q -> 0 as t -> 0)
    curve = statistics.fano_mandel(L0, kick, cfg.detection, times)
    rows = list(zip(times, curve.values))
    meta = report.base_meta("fano", cfg, seed)
    paths = report.write_table(
        outdir, "fano", ("time_At", "fano_q"), rows, meta, cfg.json_mirror
    )
    fig = f"{outdir}/fano.png"
    report.save_line_figure(fig, times, {"Q": curve.values}, "A t",
                            "Fano-Mandel Q")
    return paths + [fig]


def cmd_kicked(cfg, outdir, seed):
    dim = cfg.fock_dim
    L = liouvillian.liouvillian(cfg.oscillator, dim)
    kick_super = _net_kick_super(cfg)
    rho0 = fock.thermal_state(cfg.steady_initial_nbar, dim)
    times, states = micromaser.periodic_kick_evolve(
        L, kick_super, cfg.kicked_period, rho0, cfg.kicked_periods,
        substeps=cfg.kicked_substeps,
    )
    num_op = fock.number(dim)
    numbers = [np.trace(num_op @ s).real for s in states]
    css = micromaser.cyclic_steady_state(L, kick_super, cfg.kicked_period)
    post = css + fock.unvec(kick_super @ fock.vec(css), dim)
    avg = micromaser.period_average(L, cfg.kicked_period, post)
    cycle_avg = np.trace(num_op @ avg).real
    rows = list(zip(times, numbers))
    meta = report.base_meta(
        "kicked", cfg, seed,
        period_At=cfg.kicked_period, cycle_averaged_number=repr(float(cycle_avg)),
    )
    paths = report.write_table(
        outdir, "kicked", ("time_At", "number_expectation"), rows, meta,
        cfg.json_mirror,
    )
    fig = f"{outdir}/kicked.png"
    report.save_line_figure(
        fig, times,
        {"number": numbers, "cycle average": np.full(len(times), cycle_avg)},
        "A t", "number expectation",
    )
    return paths + [fig]


def cmd_trajectory(cfg, outdir, seed):
    kick = _require_pair(cfg)
    result = trajectory.simulate(
        cfg.oscillator, kick, cfg.detection, list(cfg.observers),
        cfg.t_max, seed, samples=cfg.traj_samples,
    )
    meta = report.base_meta("trajectory", cfg, seed)
    click_rows = [
        (c.time, c.branch, int(c.detected)) for c in result.clicks
    ]
    paths = report.write_table(
        outdir, "trajectory_clicks", ("time_At", "branch", "detected"),
        click_rows, meta, cfg.json_mirror,
    )
    series_rows = []
    for name in sorted(result.series):
        ser = result.series[name]
        for i, t in enumerate(result.times):
            series_rows.append((t, name, ser.parity[i], ser.number[i]))
    paths += report.write_table(
        outdir, "trajectory_series",
        ("time_At", "observer", "parity_expectation", "number_expectation"),
        series_rows, meta, cfg.json_mirror,
    )
    fig_clicks = f"{outdir}/trajectory_clicks.png"
    report.save_click_figure(fig_clicks, result.clicks, cfg.t_max, "A t")
    fig_series = f"{outdir}/trajectory_series.png"
    report.save_line_figure(
        fig_series, result.times,
        {name: result.series[name].number for name in sorted(result.series)},
        "A t", "number expectation",
    )
    return paths + [fig_clicks, fig_series]


_COMMANDS = {
    "spectrum": cmd_spectrum,
    "steady": cmd_steady,
    "correlations": cmd_correlations,
    "waiting": cmd_waiting,
    "counting": cmd_counting,
    "fano": cmd_fano,
    "kicked": cmd_kicked,
    "trajectory": cmd_trajectory,
}


def _parser():
    parser = argparse.ArgumentParser(
        prog="maserkit",
        description="Damped-oscillator relaxation and micromaser detection "
                    "statistics from declarative scenario files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cmd = sub.add_parser(name, help=f"run the {name} analysis")
        cmd.add_argument("--config", required=True, help="TOML scenario file")
        cmd.add_argument("--out", default=".", help="output directory")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the scenario seed")
        cmd.add_argument("--threads", type=int, default=1,
                         help="accepted for interface stability; runs are "
                              "single-process (BLAS threading still applies)")
    return parser


def _fail(code, exc_type, messages):
    doc = {"error": {"exit_code": code, "type": exc_type, "messages": messages}}
    print(json.dumps(doc, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.threads is not None and args.threads < 1:
        return _fail(EXIT_CONFIG, "ConfigError", ["--threads must be >= 1"])
    try:
        cfg = config.load_scenario(args.config)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "ConfigError", exc.messages)
    except OSError as exc:
        return _fail(EXIT_IO, type(exc).__name__, [str(exc)])
    seed = cfg.seed if args.seed is None else args.seed
    if not 0 <= seed < 2**64:
        return _fail(EXIT_CONFIG, "ConfigError", ["--seed must be a u64"])
    try:
        paths = _COMMANDS[args.command](cfg, args.out, seed)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "ConfigError", exc.messages)
    except ValueError as exc:
        return _fail(EXIT_CONFIG, "ValueError", [str(exc)])
    except _NUMERICAL as exc:
        return _fail(EXIT_NUMERICAL, type(exc).__name__, [str(exc)])
    except OSError as exc:
        return _fail(EXIT_IO, type(exc).__name__, [str(exc)])
    for path in paths:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
