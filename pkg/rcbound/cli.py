"""Command-line interface of rcbound.

Every subcommand validates its configuration, computes, and only then writes its tables (CSV on stdout or
`--output`, optionally HDF5 and a JSON sidecar of constants). Exit status is 0 on success, 1 on invalid input
or a failed computation, and 2 when `verify` finds a residual above the tolerance.
"""

import argparse
import logging
import math
import sys
from collections.abc import Callable, Sequence

import numpy as np
import pandas as pd

from rcbound import __version__
from rcbound.bounds import (
    BoundReport,
    below_critical_singular_bound,
    corollary_report,
    nonsingular_bound,
    singular_bound,
)
from rcbound.channel import Channel, InputDistribution, classify_channel_at_rate, classify_pair
from rcbound.concentration import exact_tail, scalar_tail_bound
from rcbound.config import RunConfig
from rcbound.domain import tablestorage as ts
from rcbound.ensemble import EnsembleMethod, EnsembleResult, ensemble_sweep, results_to_dataframe, slope_fit
from rcbound.errors import ConfigParseError, RcBoundError, UnknownSubcommandError
from rcbound.exponents import (
    OptimizerConfig,
    capacity,
    channel_critical_rate,
    channel_rates,
    critical_rate,
    er,
    esp,
    subdifferential_report,
)
from rcbound.tilted import verify_identities
from rcbound.utils.exporters import CsvOutputExporter, HDF5OutputExporter, JsonSidecarExporter, OutputExporterCollection
from rcbound.utils.parsing import parse_n_range, parse_rates
from rcbound.utils.parsing.law import parse_law

_log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VERIFICATION_FAILED = 2


class _ArgumentParser(argparse.ArgumentParser):
    """Reports usage errors as ConfigParseError instead of exiting."""

    def error(self, message: str):
        raise ConfigParseError(message)


def _common_options() -> argparse.ArgumentParser:
    parent = _ArgumentParser(add_help=False)
    parent.add_argument("--output", "-o", default=None, help="CSV path (default: stdout)")
    parent.add_argument("--hdf5", default=None, help="Also store the tables in this HDF5 file, keyed by subcommand")
    parent.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parent.add_argument("--log-file", default=None, help="Write the log to this file instead of stderr")
    parent.add_argument("--progress", action="store_true", help="Show progress bars on stderr")
    return parent


def _channel_options(q_default: str = "uniform") -> argparse.ArgumentParser:
    parent = _ArgumentParser(add_help=False)
    parent.add_argument("--channel", required=True, help="Preset (bsc:p, bec:e, identity:k, typewriter:k) or channel JSON file")
    parent.add_argument("--q", default=q_default, help='"uniform", "auto", "file" or a comma-separated vector')
    parent.add_argument("--bits", action="store_true", help="Rates are given in bits instead of nats")
    return parent


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = _ArgumentParser(prog="rcbound", description="Refined random-coding bounds for discrete memoryless channels.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    analyze = subparsers.add_parser(
        "analyze",
        parents=[common, _channel_options()],
        help="Capacity, critical rate, R_infinity estimate and singularity verdicts",
    )
    analyze.add_argument("--rates", default=None, help="Also classify the channel at these rates")

    exponents = subparsers.add_parser("exponents", parents=[common, _channel_options()], help="E_r, rho*_R and E_SP over a range of rates")
    exponents.add_argument("--rates", required=True, help="r, r1,r2,... or lo:hi:steps")

    verify = subparsers.add_parser("verify", parents=[common, _channel_options()], help="Residuals of the exponent identities")
    verify.add_argument("--rate", required=True)
    verify.add_argument("--tolerance", type=float, default=1e-8)

    bound = subparsers.add_parser("bound", parents=[common, _channel_options()], help="Pre-factor bounds over a range of blocklengths")
    bound.add_argument("--rate", required=True, help="r, r1,r2,... or lo:hi:steps")
    bound.add_argument("--n", required=True, help="lo:hi[:step]")
    bound.add_argument("--esseen-c", type=float, default=1.0)
    bound.add_argument("--berry-esseen-c", type=float, default=0.5)
    bound.add_argument("--eps", type=float, default=0.0)
    bound.add_argument("--maximal", action="store_true", help="Bound the maximal instead of the average error probability")
    bound.add_argument("--sidecar", default=None, help="JSON file receiving the constants of the bounds")

    concentration = subparsers.add_parser("concentration", parents=[common], help="Tilted Berry-Esseen tail bound against the exact tail")
    concentration.add_argument("--law", required=True, help='JSON file with "atoms", "probs" and optionally "p_neg_inf"')
    concentration.add_argument("--q", required=True, type=float, help="Threshold of the empirical mean")
    concentration.add_argument("--n", required=True, help="lo:hi[:step]")
    concentration.add_argument("--berry-esseen-c", type=float, default=0.5)
    concentration.add_argument("--sidecar", default=None, help="JSON file receiving the constants of the bound")

    ensemble = subparsers.add_parser("ensemble", parents=[common, _channel_options()], help="Ensemble-average error probability")
    ensemble.add_argument("--rate", required=True)
    ensemble.add_argument("--n", required=True, help="lo:hi[:step]")
    ensemble.add_argument("--method", default="exact", choices=[m.value for m in EnsembleMethod])
    ensemble.add_argument("--trials", type=int, default=10_000)
    ensemble.add_argument("--seed", type=int, default=0)

    regress = subparsers.add_parser("regress", parents=[common], help="Slope of log(P_e e^{N E}) against log N")
    regress.add_argument("input", help="CSV written by the ensemble subcommand")
    regress.add_argument("--exponent", required=True, type=float)
    return parser


def _configure_logging(level: str, log_file: str | None) -> None:
    handler_options = {"filename": log_file} if log_file else {"stream": sys.stderr}
    logging.basicConfig(
        level=getattr(logging, level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
        **handler_options,
    )


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    bits = getattr(args, "bits", False)
    rate_text = getattr(args, "rates", None) or getattr(args, "rate", None)
    options = {
        "rates": parse_rates(rate_text, bits) if rate_text else [],
        "n_range": parse_n_range(args.n) if getattr(args, "n", None) else [],
        "bits": bits,
        "output": args.output,
        "hdf5": args.hdf5,
        "sidecar": getattr(args, "sidecar", None),
        "progress": args.progress,
    }
    if args.command == "concentration":
        options.update(law_source=args.law, threshold=args.q, berry_esseen_c=args.berry_esseen_c)
    elif args.command == "regress":
        options.update(exponent=args.exponent)
    else:
        options.update(channel_source=args.channel, q_source=args.q)
    for name in ("tolerance", "esseen_c", "berry_esseen_c", "eps", "maximal", "trials", "seed", "method"):
        if hasattr(args, name):
            options[name] = getattr(args, name)
    return RunConfig(**options)


def _exporters(config: RunConfig) -> OutputExporterCollection:
    exporters = [CsvOutputExporter(config.output)]
    if config.hdf5:
        exporters.append(HDF5OutputExporter(config.hdf5))
    if config.sidecar:
        exporters.append(JsonSidecarExporter(config.sidecar))
    return OutputExporterCollection(*exporters)


def _optimizer_config(config: RunConfig) -> OptimizerConfig:
    return OptimizerConfig(cpu_count=config.cpu_count)


def _number(value: float) -> str:
    return f"{value:.17g}"


def run_analyze(config: RunConfig, exporters: OutputExporterCollection) -> int:
    channel, q = config.load()
    optimizer = _optimizer_config(config)
    uniform = InputDistribution.uniform(channel.num_inputs)
    rates = channel_rates(channel, uniform, optimizer)
    optimized = q if q is not None and config.q_source != "uniform" else rates.capacity_q

    rows = [
        ("capacity", _number(rates.capacity)),
        ("capacity_q", " ".join(_number(v) for v in rates.capacity_q.q)),
        ("r_cr_uniform", _number(rates.r_cr_q)),
        ("mutual_information_uniform", _number(rates.i_q_w)),
        ("r_infinity_estimate", _number(rates.r_infinity_estimate)),
        ("degenerate_uniform", str(rates.degenerate)),
    ]
    for label, distribution in (("uniform", uniform), ("optimized", optimized)):
        verdict = classify_pair(channel, distribution)
        rows.append((f"verdict_{label}", verdict.kind.value))
        rows.append((f"witness_{label}", "" if verdict.witness is None else " ".join(str(i) for i in verdict.witness)))
    if config.q_source not in ("uniform", "auto"):
        rows.append(("r_cr_optimized", _number(critical_rate(optimized, channel))))
    for rate in config.rates:
        _, maximizers = er(rate, channel, optimizer)
        verdict = classify_channel_at_rate(channel, rate, maximizers)
        rows.append((f"verdict_at_rate_{_number(rate)}", f"{verdict.kind.value} (relative to {len(maximizers)} maximizers)"))

    exporters.process("analyze", pd.DataFrame(rows, columns=[ts.QUANTITY, ts.VALUE]))
    return EXIT_OK


def run_exponents(config: RunConfig, exporters: OutputExporterCollection) -> int:
    channel, _ = config.load()
    optimizer = _optimizer_config(config)
    cap = capacity(channel)
    r_cr = channel_critical_rate(channel, optimizer)
    rows = []
    for rate in config.rates:
        if r_cr < rate < cap:
            report = subdifferential_report(rate, channel, optimizer)
            value, maximizers = report.e_r, [pair[0] for pair in report.maximizers]
            rho, rho_bar = report.rho_star_R, report.rho_bar_star_R
        else:
            value, maximizers = er(rate, channel, optimizer)
            rho, rho_bar = np.nan, None
        sphere = esp(rate, channel, optimizer)
        rows.append(
            {
                ts.RATE: rate,
                ts.E_R: value,
                ts.RHO_STAR_R: rho,
                ts.RHO_BAR_STAR_R: np.nan if rho_bar is None else rho_bar,
                ts.E_SP: math.inf if sphere.infinite else sphere.value,
                ts.SINGULAR_AT_RATE: classify_channel_at_rate(channel, rate, maximizers).is_singular,
            },
        )
    exporters.process("exponents", pd.DataFrame(rows))
    return EXIT_OK


def run_verify(config: RunConfig, exporters: OutputExporterCollection) -> int:
    channel, q = config.load()
    if q is None:
        msg = "verify needs an explicit input distribution."
        raise ConfigParseError(msg)
    if len(config.rates) != 1:
        msg = "verify checks a single rate."
        raise ConfigParseError(msg)
    report = verify_identities(channel, q, config.rates[0])
    exporters.process("verify", report.to_dataframe())
    if not report.passed(config.tolerance):
        _log.error(f"Largest identity residual {report.max_residual:.3g} exceeds {config.tolerance:.3g}.")
        return EXIT_VERIFICATION_FAILED
    return EXIT_OK


def bound_for(channel: Channel, q: InputDistribution | None, rate: float, config: RunConfig) -> BoundReport:
    """The bound that applies to (W, Q) at `rate`; with no Q, the bound built from the maximizers of E_r(R, .)."""
    optimizer = _optimizer_config(config)
    if q is None:
        if config.maximal:
            _log.warning("The bound over optimized inputs is for the average error probability only.")
        return corollary_report(channel, rate, config.eps, optimizer, esseen_c=config.esseen_c)
    if classify_pair(channel, q).is_singular:
        if rate <= critical_rate(q, channel):
            if config.maximal:
                _log.warning("Below the critical rate only the average-error bound is available.")
            return below_critical_singular_bound(channel, q, rate, optimizer)
        return singular_bound(channel, q, rate, maximal=config.maximal, berry_esseen_c=config.berry_esseen_c)
    return nonsingular_bound(
        channel,
        q,
        rate,
        esseen_c=config.esseen_c,
        maximal=config.maximal,
        berry_esseen_c=config.berry_esseen_c,
    )


def run_bound(config: RunConfig, exporters: OutputExporterCollection) -> int:
    config.require("rates", "n_range")
    channel, q = config.load()
    ns = np.asarray(config.n_range)
    reports = [bound_for(channel, q, rate, config) for rate in config.rates]
    for report in reports:
        if ns.min() < report.valid_from_n:
            _log.warning(f"At rate {report.rate} the {report.branch.value} bound is only certified from N={report.valid_from_n}.")
        for note in report.notes:
            _log.info(f"{report.branch.value} at rate {report.rate}: {note}")
        table = pd.DataFrame(
            {
                ts.RATE: report.rate,
                ts.N: ns,
                ts.BOUND: np.atleast_1d(report.evaluate(ns)),
                ts.EXPONENT: report.exponent,
                ts.PREFACTOR_POWER: report.prefactor_power,
            },
        )
        constants = dict(
            report.constants,
            exponent=report.exponent,
            prefactor_power=report.prefactor_power,
            first_term=report.first_term,
            second_term=report.second_term,
            valid_from_n=report.valid_from_n,
        )
        exporters.process("bound", table, constants, prefix=_number(report.rate) if len(reports) > 1 else None)
    return EXIT_OK


def run_concentration(config: RunConfig, exporters: OutputExporterCollection) -> int:
    config.require("law_source", "threshold", "n_range")
    with open(config.law_source, encoding="utf-8") as f:
        law = parse_law(f)
    tail = scalar_tail_bound(law, config.threshold, config.berry_esseen_c)
    ns = np.asarray(config.n_range)
    exact = np.array([exact_tail(law, int(n), config.threshold) for n in ns])
    bound = np.atleast_1d(tail.bound(ns))
    table = pd.DataFrame({ts.N: ns, ts.EXACT_TAIL: exact, ts.BOUND: bound, ts.RATIO: exact / bound})
    constants = {"eta": tail.eta, "rate": tail.rate, "m3": tail.m3, "var": tail.var, "constant": tail.constant}
    exporters.process("concentration", table, constants)
    return EXIT_OK


def run_ensemble(config: RunConfig, exporters: OutputExporterCollection) -> int:
    config.require("n_range")
    channel, q = config.load()
    if q is None:
        msg = "The ensemble oracle needs an explicit input distribution."
        raise ConfigParseError(msg)
    if len(config.rates) != 1:
        msg = "The ensemble oracle runs at a single rate."
        raise ConfigParseError(msg)
    results = ensemble_sweep(
        channel,
        q,
        config.n_range,
        config.rates[0],
        config.method,
        trials=config.trials,
        seed=config.seed,
        cpu_count=config.cpu_count,
        progress=config.progress,
    )
    exporters.process("ensemble", results_to_dataframe(results))
    return EXIT_OK


def read_ensemble_csv(path: str) -> list[EnsembleResult]:
    """Results from a table written by the ensemble subcommand."""
    try:
        table = pd.read_csv(path)
    except (OSError, pd.errors.ParserError) as e:
        msg = f"Cannot read ensemble results from {path}: {e}."
        raise ConfigParseError(msg) from e
    missing = {ts.N, ts.M, ts.P_E, ts.CI, ts.METHOD} - set(table.columns)
    if missing:
        msg = f"{path} lacks the columns {sorted(missing)}."
        raise ConfigParseError(msg)
    return [
        EnsembleResult(n=int(row[ts.N]), m=int(row[ts.M]), p_e_avg=float(row[ts.P_E]), method=EnsembleMethod(row[ts.METHOD]), ci_halfwidth=float(row[ts.CI]))
        for _, row in table.iterrows()
    ]


def run_regress(config: RunConfig, exporters: OutputExporterCollection, path: str) -> int:
    config.require("exponent")
    fit = slope_fit(read_ensemble_csv(path), config.exponent)
    table = pd.DataFrame({ts.SLOPE: [fit.slope], ts.STDERR: [fit.stderr], ts.INTERCEPT: [fit.intercept], ts.POINTS: [len(fit.points)]})
    exporters.process("regress", table)
    return EXIT_OK


_HANDLERS: dict[str, Callable[..., int]] = {
    "analyze": run_analyze,
    "exponents": run_exponents,
    "verify": run_verify,
    "bound": run_bound,
    "concentration": run_concentration,
    "ensemble": run_ensemble,
}
SUBCOMMANDS = (*_HANDLERS, "regress")


def run(argv: Sequence[str] | None = None) -> int:
    """Runs one subcommand and returns the exit status."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        if argv and not argv[0].startswith("-") and argv[0] not in SUBCOMMANDS:
            msg = f"Unknown subcommand {argv[0]!r}; use one of {', '.join(SUBCOMMANDS)}."
            raise UnknownSubcommandError(msg)
        args = build_parser().parse_args(argv)
        _configure_logging(args.log_level, args.log_file)
        config = _config_from_args(args)
        _log.info(f"Running {args.command} with {config}.")
        exporters = _exporters(config)
        with exporters:
            if args.command == "regress":
                return run_regress(config, exporters, args.input)
            return _HANDLERS[args.command](config, exporters)
    except RcBoundError as e:
        _log.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)  # noqa: T201
        return EXIT_ERROR
    except SystemExit as e:
        # --help and --version
        return e.code if isinstance(e.code, int) else EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
