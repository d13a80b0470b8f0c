from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .analysis import (
    LimitPrediction,
    fh_hitting_stats,
    predict_limit,
    write_hitting_csv,
    write_summary_csv,
)
from .artifacts import ArtifactStore
from .bounding import (
    ConditionalLaw,
    Increment,
    TwoStateChain,
    estimate_threshold,
    hitting_time_table,
    simulate_bounding_chain,
    simulate_coupling,
    stationary_distribution,
    stationary_drift,
    transition_matrix,
    write_hitting_table_csv,
)
from .core import check_assumptions
from .errors import ConfigurationError, NumericalError, WangLandauError
from .experiment import OUTPUT_ENV, ExperimentConfig, derive_output_dir, load_experiment_config
from .lattice import (
    LatticePoint,
    RationalFrequencies,
    irreducibility_smoke_test,
    lattice_path,
    lattice_point_from_coordinates,
    zero_return_path,
)
from .plotting import plot_bin_visits, plot_frequencies, plot_sample_histogram, plot_z_trajectory
from .sampler import run_replicas
from .updates import UpdateRule

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_DOMAIN = 4

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="wang-landau",
        description="Wang-Landau experiments and numerical checks of its convergence machinery",
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="Log debug messages")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="Only log warnings and errors")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run the replicas of an experiment configuration")
    run.add_argument("--config", type=Path, required=True, help="JSON experiment configuration")
    run.add_argument("--seed", type=int, default=None, help="Override the master seed")
    run.add_argument("--replicas", type=int, default=None, help="Override the number of replicas")
    run.add_argument("--stride", type=int, default=None, help="Override the trace stride")
    run.add_argument(
        "--out",
        type=Path,
        default=None,
        help=f"Output directory (defaults to the config's output_dir, then ${OUTPUT_ENV}/<name>, then output/<name>)",
    )
    run.add_argument("--workers", type=int, default=None, help="Worker processes (defaults to the CPU count)")
    run.add_argument("--no-plots", action="store_true", help="Skip the SVG figures")

    limit = commands.add_parser("limit", help="Predicted long-run frequencies for two bins at fixed gamma")
    limit.add_argument("rule", help="Update rule: linear or logform")
    limit.add_argument("phi1", type=float, help="Desired frequency of bin 1")
    limit.add_argument("gamma", type=float, help="Fixed step size")

    diagnose = commands.add_parser("diagnose", help="Grid check of the boundedness assumptions for a configuration")
    diagnose.add_argument("--config", type=Path, required=True)
    diagnose.add_argument("--grid", type=int, default=201, help="Grid points over the support")

    theory = commands.add_parser("theory", help="Bounding chains, hitting times, coupling and lattice paths")
    theory_commands = theory.add_subparsers(dest="theory_command", required=True)

    hitting = theory_commands.add_parser("hitting", help="Expected hitting time: first-step analysis vs Monte Carlo")
    _add_chain_arguments(hitting)
    hitting.add_argument("--replicas", type=int, default=100_000)
    hitting.add_argument("--random", type=int, default=0, help="Add this many random parameter sets with negative drift")
    hitting.add_argument("--start", default="+a", help="State of the chain before the first counted step")
    hitting.add_argument("--seed", type=int, default=0)
    hitting.add_argument("--out", type=Path, default=None, help="Also write the table to this CSV file")

    lattice = theory_commands.add_parser("lattice", help="Zero-return counts and lattice paths for rational phi")
    lattice.add_argument("--phi", required=True, help="Comma-separated fractions, e.g. 3/4,1/4")
    lattice.add_argument("--from-counts", default=None, help="Counts defining the starting point, e.g. 1,0")
    lattice.add_argument("--to-counts", default=None, help="Counts defining the end point")
    lattice.add_argument("--to", default=None, help="Coordinates of the end point, e.g. 1/4,-1/4")

    coupling = theory_commands.add_parser("coupling", help="Simulate the coupled pair and check domination")
    coupling.add_argument("--steps", type=int, default=100_000)
    coupling.add_argument("--eps", type=float, default=0.3)
    coupling.add_argument("--eta", type=float, default=0.1)
    coupling.add_argument("--p-minus-after-plus", type=float, default=0.4)
    coupling.add_argument("--p-minus-after-minus", type=float, default=0.95)
    coupling.add_argument("--config", type=Path, default=None, help="Estimate the law from this two-bin experiment")
    coupling.add_argument("--z-grid", default="0,2,4,6,8,10,15,20", help="Z values searched with --config")
    coupling.add_argument("--samples", type=int, default=20_000)
    coupling.add_argument("--seed", type=int, default=0)

    irreducibility = theory_commands.add_parser("irreducibility", help="Realize visit-count patterns along short paths")
    irreducibility.add_argument("--config", type=Path, required=True)
    irreducibility.add_argument("--phi", default=None, help="Rational phi (defaults to the config's phi)")
    irreducibility.add_argument("--counts", action="append", default=None, help="Count vector, e.g. 2,1 (repeatable)")
    irreducibility.add_argument("--trials", type=int, default=10_000)
    irreducibility.add_argument("--gamma", type=float, default=0.1)
    irreducibility.add_argument("--seed", type=int, default=0)

    bounding = theory_commands.add_parser("bounding", help="Simulate the bounding chain against its stationary law")
    _add_chain_arguments(bounding)
    bounding.add_argument("--steps", type=int, default=1_000_000)
    bounding.add_argument("--start", default="+a")
    bounding.add_argument("--seed", type=int, default=0)

    return parser.parse_args(argv)


def _add_chain_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--eps", type=float, default=0.3, help="Probability of switching +a -> -b")
    parser.add_argument("--eta", type=float, default=0.1, help="Probability of switching -b -> +a")
    parser.add_argument("--a", type=float, default=1.0, help="Up step")
    parser.add_argument("--b", type=float, default=1.0, help="Down step")


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT)


def run_application(argv: Sequence[str] | None = None) -> int:
    args = parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    handlers = {
        "run": cmd_run,
        "limit": cmd_limit,
        "diagnose": cmd_diagnose,
        "theory": cmd_theory,
    }
    try:
        return handlers[args.command](args)
    except ConfigurationError as exc:
        logger.error("Invalid configuration: %s", exc)
        return EXIT_CONFIG
    except NumericalError as exc:
        logger.error("Numerical failure: %s", exc)
        return EXIT_NUMERIC
    except WangLandauError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_DOMAIN


# ----------------------------------------------------------------------
# run / limit / diagnose
# ----------------------------------------------------------------------
def cmd_run(args: argparse.Namespace) -> int:
    config = load_experiment_config(args.config).with_overrides(
        seed=args.seed,
        replicas=args.replicas,
        stride=args.stride,
    )
    store = ArtifactStore(derive_output_dir(config, args.config, args.out))
    record = store.begin_run(config.name, config.to_dict())
    with_fh = config.schedule.kind == "flat_histogram"
    trace_configs = [store.trace_config(k, config.stride, with_fh) for k in range(config.replicas)]
    written: list[Path] = [cfg.trace_path for cfg in trace_configs]
    written += [cfg.fh_log_path for cfg in trace_configs if cfg.fh_log_path is not None]

    logger.info("Running '%s': %d replica(s) of %d iterations", config.name, config.replicas, config.iterations)
    try:
        traces = run_replicas(config, trace_configs, workers=args.workers)
    except WangLandauError:
        store.finish_run(record, "failed", written)
        raise

    prediction = expected_limit(config)
    write_summary_csv(traces, store.summary_path, prediction)
    written.append(store.summary_path)
    print(f"Saved summary to {store.summary_path}")
    if with_fh:
        summary = fh_hitting_stats(traces)
        write_hitting_csv(summary, store.hitting_path)
        written.append(store.hitting_path)
        print(f"Saved FH waiting times to {store.hitting_path}")
        for row in summary.rows[:5]:
            logger.info("kappa=%d: mean wait %.1f over %d replicas", row.kappa, row.mean, row.replicas)
    if not args.no_plots:
        figures = {
            "frequencies": lambda path: plot_frequencies(traces, config.phi, path, title=config.name),
            "z_trajectory": lambda path: plot_z_trajectory(traces, path),
            "bin_visits": lambda path: plot_bin_visits(traces, config.phi, path),
            "sample_histogram": lambda path: plot_sample_histogram(traces, config.bin_edges, path),
        }
        for name, draw in figures.items():
            path = store.figure_path(name)
            draw(path)
            written.append(path)

    for k, trace in enumerate(traces):
        frequencies = " ".join(f"{value:.6f}" for value in trace.final_frequencies())
        print(f"replica {k}: frequencies {frequencies} kappa {trace.kappa}")
    if prediction is not None:
        print(f"predicted: {prediction.formatted()}")
    store.finish_run(record, "completed", written)
    return EXIT_OK


def expected_limit(config: ExperimentConfig) -> LimitPrediction | None:
    """Prediction printed next to the results when gamma stays fixed or the rule is Linear."""
    if len(config.phi) != 2:
        return None
    rule = UpdateRule.from_name(config.rule)
    schedule = config.schedule
    if rule is UpdateRule.LINEAR:
        return predict_limit(rule, config.phi, 1.0)
    if schedule.kind == "flat_histogram" and schedule.kappa_max == 0:
        return predict_limit(rule, config.phi, schedule.gamma0)
    return None


def cmd_limit(args: argparse.Namespace) -> int:
    phi1 = args.phi1
    if not 0.0 < phi1 < 1.0:
        raise ConfigurationError("phi1 must lie strictly between 0 and 1", field="phi1")
    prediction = predict_limit(UpdateRule.from_name(args.rule), (phi1, 1.0 - phi1), args.gamma)
    print(prediction.formatted())
    return EXIT_OK


def cmd_diagnose(args: argparse.Namespace) -> int:
    config = load_experiment_config(args.config)
    target = config.build_target()
    report = check_assumptions(target, config.build_proposal(target), grid_size=args.grid)
    print(f"target: {target.name} on [{target.support[0]:g}, {target.support[1]:g}] with {target.d} bins")
    print(f"min proposal log-density: {report.log_q_min:.6g}")
    print(f"log MH ratio range: [{report.log_m:.6g}, {report.log_M:.6g}]")
    masses = report.bin_masses / report.bin_masses.sum()
    print("bin masses: " + " ".join(f"{value:.6f}" for value in masses))
    print("status: " + ("ok" if report.passed else "; ".join(report.violations())))
    return EXIT_OK


# ----------------------------------------------------------------------
# theory
# ----------------------------------------------------------------------
def cmd_theory(args: argparse.Namespace) -> int:
    handlers = {
        "hitting": theory_hitting,
        "lattice": theory_lattice,
        "coupling": theory_coupling,
        "irreducibility": theory_irreducibility,
        "bounding": theory_bounding,
    }
    return handlers[args.theory_command](args)


def theory_hitting(args: argparse.Namespace) -> int:
    chains = [TwoStateChain(args.eps, args.eta, args.a, args.b)]
    chains += random_drift_chains(args.random, np.random.default_rng(args.seed))
    rows = hitting_time_table(chains, args.replicas, args.seed, start_state=args.start)
    print("epsilon,eta,a,b,analytic,mc_mean,mc_se")
    for row in rows:
        print(f"{row.epsilon:.6g},{row.eta:.6g},{row.a:.6g},{row.b:.6g},{row.analytic:.9g},{row.mc_mean:.9g},{row.mc_se:.3g}")
        if row.z_score > 3.0:
            logger.warning("Oracles disagree by %.1f standard errors for eps=%s eta=%s", row.z_score, row.epsilon, row.eta)
    if args.out is not None:
        write_hitting_table_csv(rows, args.out)
        print(f"Saved hitting-time table to {args.out}")
    return EXIT_OK


def random_drift_chains(count: int, rng: np.random.Generator) -> list[TwoStateChain]:
    """Random chains with integer steps in 1..3 and a * eta < b * eps."""
    chains: list[TwoStateChain] = []
    while len(chains) < count:
        epsilon, eta = rng.uniform(0.05, 0.5, size=2)
        a, b = (int(v) for v in rng.integers(1, 4, size=2))
        if a * eta < 0.8 * b * epsilon:
            chains.append(TwoStateChain(float(epsilon), float(eta), float(a), float(b)))
    return chains


def theory_lattice(args: argparse.Namespace) -> int:
    phi = RationalFrequencies.parse(args.phi)
    cycle = zero_return_path(phi)
    print(f"phi = ({phi})")
    print(f"b = {phi.denominator}")
    print(f"n = {_tuple_text(cycle.counts)}")
    print(f"S_n = {cycle.total}")
    if args.from_counts is None and args.to_counts is None and args.to is None:
        return EXIT_OK
    start = LatticePoint(_int_tuple(args.from_counts) if args.from_counts else (0,) * phi.d, phi)
    if args.to is not None:
        end = lattice_point_from_coordinates(phi, [part.strip() for part in args.to.split(",")])
    else:
        end = LatticePoint(_int_tuple(args.to_counts) if args.to_counts else (0,) * phi.d, phi)
    path = lattice_path(phi, start, end)
    print(f"from z = {_tuple_text(start.coordinates)}")
    print(f"to z = {_tuple_text(end.coordinates)}")
    print(f"k = {_tuple_text(path)}")
    return EXIT_OK


def theory_coupling(args: argparse.Namespace) -> int:
    if args.config is not None:
        config = load_experiment_config(args.config)
        target = config.build_target()
        grid = [float(value) for value in args.z_grid.split(",") if value.strip()]
        threshold = estimate_threshold(
            target, config.build_proposal(target), args.eps, args.eta, grid, args.samples, seed=args.seed
        )
        if threshold is None:
            print("no Z on the grid satisfies the bounds")
            return EXIT_DOMAIN
        print(f"estimated threshold Z = {threshold.z:g}")
        law = threshold.law
    else:
        law = ConditionalLaw(args.p_minus_after_plus, args.p_minus_after_minus)
    run = simulate_coupling(law, args.eps, args.eta, args.steps, seed=args.seed)
    chain = TwoStateChain(args.eps, args.eta)
    observed = run.transition_frequencies()
    expected = transition_matrix(chain)
    errors = run.transition_standard_errors(chain)
    print(f"law: P[-b|+a] = {law.p_minus_after_plus:.6f}, P[-b|-b] = {law.p_minus_after_minus:.6f}")
    print(f"p1 = {run.probabilities.p1:.6f}, p2 = {run.probabilities.p2:.6f}, p3 = {run.probabilities.p3:.6f}")
    print(f"domination violations: {run.violations}")
    print("from,to,observed,expected,se")
    for i, origin in enumerate(("+a", "-b")):
        for j, dest in enumerate(("+a", "-b")):
            print(f"{origin},{dest},{observed[i, j]:.6f},{expected[i, j]:.6f},{errors[i, j]:.6f}")
    return EXIT_OK


def theory_irreducibility(args: argparse.Namespace) -> int:
    config = load_experiment_config(args.config)
    target = config.build_target()
    phi = RationalFrequencies.parse(args.phi) if args.phi else RationalFrequencies(config.phi)
    vectors = [_int_tuple(text) for text in args.counts] if args.counts else None
    report = irreducibility_smoke_test(
        target,
        config.build_proposal(target),
        phi,
        trials=args.trials,
        seed=args.seed,
        count_vectors=vectors,
        gamma=args.gamma,
        x0=config.x0,
    )
    print(f"start bin: {report.start_bin}")
    print("counts,trials,realized,fraction")
    for pattern in report.patterns:
        counts = " ".join(str(n) for n in pattern.counts)
        print(f"{counts},{pattern.trials},{pattern.realized},{pattern.fraction:.6f}")
    return EXIT_OK


def theory_bounding(args: argparse.Namespace) -> int:
    chain = TwoStateChain(args.eps, args.eta, args.a, args.b)
    increments = simulate_bounding_chain(chain, args.start, args.steps, seed=args.seed)
    up_fraction = float(np.mean(increments > 0))
    stationary = stationary_distribution(chain)
    print("state,observed,stationary")
    print(f"+a,{up_fraction:.6f},{stationary[Increment.UP]:.6f}")
    print(f"-b,{1.0 - up_fraction:.6f},{stationary[Increment.DOWN]:.6f}")
    print(f"mean increment: {float(np.mean(increments)):.6f} (stationary drift {stationary_drift(chain):.6f})")
    return EXIT_OK


def _int_tuple(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigurationError(f"Cannot read counts from '{text}'", field="counts") from exc


def _tuple_text(values: Sequence[object]) -> str:
    return "(" + ",".join(str(value) for value in values) + ")"


def main() -> None:
    sys.exit(run_application())


if __name__ == "__main__":
    main()
