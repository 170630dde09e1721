import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import pandas as pd

from . import __version__
from .binning import bin_consecutive, sample_bins
from .errors import ConfigError, TagFormatError
from .estimator import EstimatorKind
from .g2_estimators import AGGREGATE_KINDS, census, census_to_frame, estimates_to_frame, g2_aggregate
from .logs import set_verbosity
from .manifest import RunManifest, write_csv
from .oracle import CountModel, CountModelKind, exact_expected_census, exact_expected_g2
from .pipelines import NS, PROTOCOLS, resolve_protocol
from .simulator import simulate
from .source_config import PS_PER_S, SourceConfig, pair_rate_for_count_rate
from .sweeps import TAU_SWEEP_KEY, SamplingScheme, cell_seed, sweep_bidirectional, sweep_power, sweep_tau
from .tag_io import read_record, write_record
from .timetag_model import CensusMode

logger = logging.getLogger(__name__)

# Exit codes of the command line
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_CONFIG = 3

OUTPUT_DIR_ENV = "SPDC_G2_OUTPUT_DIR"

MODES = {
    "unheralded": EstimatorKind.UNHERALDED_BINNED,
    "heralded": EstimatorKind.HERALDED_BINNED,
    "two-detector": EstimatorKind.TWO_DETECTOR,
    "three-detector": EstimatorKind.THREE_DETECTOR,
}

BINNED_MODES = ("unheralded", "heralded")

# CLI flag -> (SourceConfig field, scale to picoseconds or 1)
CONFIG_FLAGS = {
    "pair_rate": ("pair_rate", 1),
    "eta_a": ("eta_a", 1),
    "eta_b": ("eta_b", 1),
    "eta_c": ("eta_c", 1),
    "dead_time_ns": ("dead_time", NS),
    "dark_rate_a": ("dark_rate_a", 1),
    "dark_rate_b": ("dark_rate_b", 1),
    "dark_rate_c": ("dark_rate_c", 1),
    "jitter_ps": ("jitter_sigma", 1),
    "pair_delay_ps": ("pair_delay", 1),
    "duration_s": ("duration", PS_PER_S),
    "seed": ("seed", 1),
}


class UsageError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):
    """
    Parser that raises UsageError instead of exiting, so main() owns the exit code.
    """

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def ns_to_ps(value: float) -> int:
    return int(round(value * NS))


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, "."))


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:

    group = parser.add_argument_group("source configuration (defaults < --config file < flags)")
    group.add_argument("--config", type=Path, help="key=value configuration file")
    group.add_argument("--pair-rate", type=float, help="pairs per second")
    group.add_argument("--count-rate-mcps", type=float, help="target recorded A+B rate in Mcps (sets the pair rate)")
    group.add_argument("--eta-a", type=float)
    group.add_argument("--eta-b", type=float)
    group.add_argument("--eta-c", type=float)
    group.add_argument("--dead-time-ns", type=float)
    group.add_argument("--dark-rate-a", type=float, help="counts per second")
    group.add_argument("--dark-rate-b", type=float, help="counts per second")
    group.add_argument("--dark-rate-c", type=float, help="counts per second")
    group.add_argument("--jitter-ps", type=float, help="standard deviation of the timing jitter")
    group.add_argument("--pair-delay-ps", type=int)
    group.add_argument("--duration-s", type=float)


def resolve_config(args: argparse.Namespace) -> tuple[SourceConfig, set[str]]:
    """
    Applies the configuration precedence: built-in defaults, then --config, then flags.

    Returns:
        tuple: The configuration and the names of the fields set by the file or the flags.
    """

    changes = {}
    if args.config is not None:
        changes.update(SourceConfig.parse_text(Path(args.config).read_text(encoding="utf-8")))
        logger.info(f"Loaded source configuration from {args.config}")

    for flag, (name, scale) in CONFIG_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            changes[name] = value if scale == 1 else round(value * scale)

    config = SourceConfig().replace(**changes)

    if args.count_rate_mcps is not None:
        config = config.replace(pair_rate=pair_rate_for_count_rate(args.count_rate_mcps, config))
        changes["pair_rate"] = config.pair_rate

    return config, set(changes)


def _add_sampling_arguments(parser: argparse.ArgumentParser, samples: int) -> None:
    parser.add_argument("--samples", type=int, default=samples, help="bins per estimate")
    parser.add_argument("--scheme", choices=[s.value for s in SamplingScheme], default=SamplingScheme.SAMPLED.value)
    parser.add_argument("--seed", type=int, default=0, help="seed of the bin placement")


def build_parser() -> ArgumentParser:

    parser = ArgumentParser(prog="spdc-g2", description="Fixed-time-bin g2 estimators for heralded pair sources.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="log progress messages")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="log errors only")

    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    s = sub.add_parser("simulate", help="Simulate a tag record and write it with its manifest.")
    _add_config_arguments(s)
    s.add_argument("--seed", type=int)
    s.add_argument("-o", "--output", type=Path, help="tag file (.bg2t binary or .csv text)")
    s.add_argument("--outdir", type=Path, default=default_output_dir())

    a = sub.add_parser("analyze", help="Estimate g2 from a tag file.")
    a.add_argument("input", type=Path)
    a.add_argument("--mode", choices=list(MODES), default="unheralded")
    a.add_argument("--tau-ns", type=float, nargs="+", default=[30.0], help="bin widths")
    _add_sampling_arguments(a, samples=200)
    a.add_argument("--strict-herald", action="store_true", help="heralded bins contribute only with a herald detection")
    a.add_argument("--bidirectional", type=int, metavar="STEPS", help="grow windows both ways from fixed points")
    a.add_argument("--window-ps", type=int, default=1000, help="coincidence window of the full-record estimators")
    a.add_argument("--dump-bins", type=Path, help="also write the bins of the first width")
    a.add_argument("-o", "--output", type=Path)
    a.add_argument("--outdir", type=Path, default=default_output_dir())

    c = sub.add_parser("census", help="Count no-, single- and multi-photon bins.")
    c.add_argument("input", type=Path)
    c.add_argument("--tau-ns", type=float, nargs="+", default=[30.0])
    _add_sampling_arguments(c, samples=1000)
    c.add_argument("--census-mode", choices=[m.value for m in CensusMode], nargs="+", default=[m.value for m in CensusMode])
    c.add_argument("-o", "--output", type=Path)
    c.add_argument("--outdir", type=Path, default=default_output_dir())

    t = sub.add_parser("sweep-tau", help="Estimate g2 over a grid of bin widths.")
    t.add_argument("input", type=Path)
    t.add_argument("--mode", choices=BINNED_MODES, default="unheralded")
    t.add_argument("--tau-min-ns", type=float, default=30.0)
    t.add_argument("--tau-max-ns", type=float, default=300.0)
    t.add_argument("--tau-step-ns", type=float, default=30.0)
    _add_sampling_arguments(t, samples=200)
    t.add_argument("--strict-herald", action="store_true")
    t.add_argument("-o", "--output", type=Path)
    t.add_argument("--outdir", type=Path, default=default_output_dir())

    p = sub.add_parser("sweep-power", help="Minimum g2 versus rate over independent simulated records.")
    _add_config_arguments(p)
    rates = p.add_mutually_exclusive_group(required=True)
    rates.add_argument("--rates-mcps", type=float, nargs="+", help="recorded A+B rates")
    rates.add_argument("--pair-rates", type=float, nargs="+", help="pair rates per second")
    p.add_argument("--mode", choices=BINNED_MODES, default="unheralded")
    p.add_argument("--tau-ns", type=float, nargs="+", default=[30.0])
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--repeats", type=int, default=100)
    p.add_argument("--sweep-steps", type=int, default=1, help="widths tau, 2 tau, ... searched for the minimum")
    p.add_argument("--strict-herald", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1, help="worker processes (0 uses every core)")
    p.add_argument("-o", "--output", type=Path)
    p.add_argument("--outdir", type=Path, default=default_output_dir())

    o = sub.add_parser("oracle", help="Print exact expectations under a count model.")
    o.add_argument("--model", choices=[k.value for k in CountModelKind], default=CountModelKind.INDEPENDENT_POISSON.value)
    o.add_argument("--lambda-a", type=float, default=0.5)
    o.add_argument("--lambda-b", type=float, default=0.5)
    o.add_argument("--lambda-c", type=float, default=0.5)
    o.add_argument("--mu-pair", type=float, default=0.0)
    o.add_argument("--eta-a", type=float, default=0.5)
    o.add_argument("--eta-b", type=float, default=0.5)
    o.add_argument("--eta-c", type=float, default=1.0)
    o.add_argument("--cap", type=int, default=40, help="truncation cap of the summation")
    o.add_argument("--mode", choices=BINNED_MODES, nargs="+", default=list(BINNED_MODES))
    o.add_argument("--strict-herald", action="store_true")
    o.add_argument("--census", action="store_true", help="also print the expected census fractions")

    r = sub.add_parser("reproduce", help="Run a desk-scale characterization protocol.")
    r.add_argument("target", choices=[name for protocol in PROTOCOLS.values() for name in (protocol.name, protocol.alias)])
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--outdir", type=Path, default=default_output_dir())

    y = sub.add_parser("replay", help="Re-run the command stored in a manifest.")
    y.add_argument("manifest", type=Path)

    return parser


def _output_path(args: argparse.Namespace, default_name: str) -> Path:
    path = args.output if args.output is not None else args.outdir / default_name
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _workers(count: int) -> Optional[int]:
    return None if count == 0 else count


def _sampled_bins(record, tau: int, args: argparse.Namespace):
    # The same placement sweep_tau uses for its first width
    if args.scheme == SamplingScheme.SAMPLED.value:
        return sample_bins(record, tau, args.samples, cell_seed(args.seed, TAU_SWEEP_KEY, 0))
    return bin_consecutive(record, tau, args.samples)


def cmd_simulate(args: argparse.Namespace, argv: Sequence[str]) -> int:

    config, _ = resolve_config(args)
    output = _output_path(args, "tags.bg2t")

    record = simulate(config)
    write_record(record, output)

    manifest = RunManifest.for_run("simulate", argv, seed=config.seed, config=config, outputs=[output])
    manifest.write()

    logger.info(f"Wrote {len(record)} tags to {output}")
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace, argv: Sequence[str]) -> int:

    record = read_record(args.input)
    kind = MODES[args.mode]
    taus = [ns_to_ps(tau) for tau in args.tau_ns]

    parameters = {"mode": args.mode, "taus_ps": ",".join(map(str, taus))}

    if kind in AGGREGATE_KINDS:
        frame = pd.DataFrame([{"kind": kind.value, "window_ps": args.window_ps, "g2": g2_aggregate(record, kind, args.window_ps)}])
        parameters["window_ps"] = args.window_ps
    elif args.bidirectional is not None:
        table = sweep_bidirectional(record, taus[0], args.bidirectional, args.samples, kind, args.seed, args.strict_herald)
        frame = estimates_to_frame(table)
        parameters.update(n_steps=args.bidirectional, n_samples=args.samples, strict_herald=args.strict_herald)
    else:
        table = sweep_tau(record, taus, args.samples, kind, args.seed, args.scheme, args.strict_herald)
        frame = estimates_to_frame(table)
        parameters.update(n_samples=args.samples, scheme=args.scheme, strict_herald=args.strict_herald)

    output = _output_path(args, f"{args.input.stem}_g2.csv")
    outputs = [output] if args.dump_bins is None else [output, args.dump_bins]

    manifest = RunManifest.for_run("analyze", argv, args.seed, parameters, inputs=[args.input], outputs=outputs)

    write_csv(frame, output, manifest)
    if args.dump_bins is not None:
        write_csv(_sampled_bins(record, taus[0], args).to_frame(), args.dump_bins, manifest)
    manifest.write()

    return EXIT_OK


def cmd_census(args: argparse.Namespace, argv: Sequence[str]) -> int:

    record = read_record(args.input)
    taus = [ns_to_ps(tau) for tau in args.tau_ns]

    censuses = []
    for tau in taus:
        bins = _sampled_bins(record, tau, args)
        censuses += [census(bins, mode) for mode in args.census_mode]

    parameters = {"taus_ps": ",".join(map(str, taus)), "n_bins": args.samples, "scheme": args.scheme}
    output = _output_path(args, f"{args.input.stem}_census.csv")
    manifest = RunManifest.for_run("census", argv, args.seed, parameters, inputs=[args.input], outputs=[output])

    write_csv(census_to_frame(censuses), output, manifest)
    manifest.write()

    return EXIT_OK


def cmd_sweep_tau(args: argparse.Namespace, argv: Sequence[str]) -> int:

    if args.tau_step_ns <= 0 or args.tau_max_ns < args.tau_min_ns:
        raise ConfigError("The width grid needs a positive step and tau-max-ns >= tau-min-ns.")

    record = read_record(args.input)
    taus = list(range(ns_to_ps(args.tau_min_ns), ns_to_ps(args.tau_max_ns) + 1, ns_to_ps(args.tau_step_ns)))

    table = sweep_tau(record, taus, args.samples, MODES[args.mode], args.seed, args.scheme, args.strict_herald)

    parameters = {
        "mode": args.mode,
        "taus_ps": ",".join(map(str, taus)),
        "n_samples": args.samples,
        "scheme": args.scheme,
        "strict_herald": args.strict_herald,
    }
    output = _output_path(args, f"{args.input.stem}_sweep_tau.csv")
    manifest = RunManifest.for_run("sweep-tau", argv, args.seed, parameters, inputs=[args.input], outputs=[output])

    write_csv(estimates_to_frame(table), output, manifest)
    manifest.write()

    return EXIT_OK


def cmd_sweep_power(args: argparse.Namespace, argv: Sequence[str]) -> int:

    taus = [ns_to_ps(tau) for tau in args.tau_ns]
    base, explicit = resolve_config(args)

    # Records just long enough for comfortable random placement, unless a duration is given
    if "duration" not in explicit:
        base = base.replace(duration=4 * args.samples * max(taus) * args.sweep_steps)

    if args.rates_mcps is not None:
        configs = [base.replace(pair_rate=pair_rate_for_count_rate(mcps, base)) for mcps in args.rates_mcps]
    else:
        configs = [base.replace(pair_rate=rate) for rate in args.pair_rates]

    frame = sweep_power(
        configs,
        taus,
        args.samples,
        args.repeats,
        MODES[args.mode],
        seed=args.seed,
        sweep_steps=args.sweep_steps,
        strict_herald=args.strict_herald,
        max_workers=_workers(args.workers),
    )

    parameters = {
        "mode": args.mode,
        "pair_rates": ",".join(repr(config.pair_rate) for config in configs),
        "taus_ps": ",".join(map(str, taus)),
        "n_samples": args.samples,
        "n_repeats": args.repeats,
        "sweep_steps": args.sweep_steps,
        "strict_herald": args.strict_herald,
    }
    output = _output_path(args, "sweep_power.csv")
    manifest = RunManifest.for_run("sweep-power", argv, args.seed, parameters, config=base, outputs=[output])

    write_csv(frame, output, manifest)
    manifest.write()

    return EXIT_OK


def cmd_oracle(args: argparse.Namespace, argv: Sequence[str]) -> int:

    model = CountModel(
        kind=args.model,
        lambda_a=args.lambda_a,
        lambda_b=args.lambda_b,
        lambda_c=args.lambda_c,
        mu_pair=args.mu_pair,
        eta_a=args.eta_a,
        eta_b=args.eta_b,
        eta_c=args.eta_c,
        truncation_cap=args.cap,
    )

    for mode in args.mode:
        print(f"{MODES[mode].value}={exact_expected_g2(model, MODES[mode], args.strict_herald)!r}")

    if args.census:
        for census_mode in CensusMode:
            for name, probability in exact_expected_census(model, census_mode).items():
                print(f"census.{census_mode.value}.{name}={probability!r}")

    return EXIT_OK


def cmd_reproduce(args: argparse.Namespace, argv: Sequence[str]) -> int:

    protocol = resolve_protocol(args.target)
    logger.info(f"Running {protocol.name}: {protocol.description}")

    result = protocol.run(seed=args.seed, max_workers=_workers(args.workers))

    args.outdir.mkdir(parents=True, exist_ok=True)
    outputs = [args.outdir / name for name in result.frames]

    manifest = RunManifest.for_run(
        "reproduce",
        argv,
        args.seed,
        {"target": protocol.name, **result.parameters},
        config=result.config,
        outputs=outputs,
    )

    for path, frame in zip(outputs, result.frames.values()):
        write_csv(frame, path, manifest)
    manifest.write()

    return EXIT_OK


def cmd_replay(args: argparse.Namespace, argv: Sequence[str]) -> int:
    manifest = RunManifest.read(args.manifest)
    logger.info(f"Replaying '{manifest.subcommand}' from {args.manifest}")
    return main(list(manifest.argv))


COMMANDS = {
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "census": cmd_census,
    "sweep-tau": cmd_sweep_tau,
    "sweep-power": cmd_sweep_power,
    "oracle": cmd_oracle,
    "reproduce": cmd_reproduce,
    "replay": cmd_replay,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Runs the command line and returns the exit code.
    """

    argv = list(sys.argv[1:] if argv is None else argv)

    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        logger.error(str(e))
        return EXIT_USAGE
    except SystemExit as e:
        # --help and --version
        return EXIT_OK if e.code in (None, 0) else EXIT_USAGE

    if args.verbose:
        set_verbosity(logging.INFO)
    elif args.quiet:
        set_verbosity(logging.ERROR)

    try:
        return COMMANDS[args.command](args, argv)
    except (OSError, TagFormatError) as e:
        logger.error(f"I/O error: {e}")
        return EXIT_IO
    except ValueError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG
