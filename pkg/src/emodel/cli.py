"""Command-line interface.

Every subcommand is a thin adapter over one library operation: parse flags,
load inputs, call, serialize. Exit codes: 0 success, 1 usage or input error,
2 the analysis itself found violations. Identical arguments over identical
input files produce byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import sys

from .additivity import report_to_csv, report_to_json_dict, run_additivity_test, tolerance_sweep
from .conservation import check_conservation, strong_composability_check
from .core import (
    DataFormatError,
    ModelKind,
    PmcVector,
    load_compounds,
    load_model,
    load_runs,
    model_to_dict,
    save_model,
)
from .fitting import correlation_matrix, evaluate, fit, predict
from .partitioning import energy_loss, load_energy_function, partition
from .stats import sample_mean_ci

__all__ = ["main", "run_cli", "UsageError"]


class UsageError(Exception):
    """Bad invocation: unknown flag, missing argument, malformed flag value."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # argparse would exit(2); the exit-code contract reserves 2 for
        # analysis findings, so usage problems must surface as code 1.
        raise UsageError(f"{self.format_usage().rstrip()}\nerror: {message}")


def _split_names(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _parse_floats(text: str, flag: str) -> list[float]:
    try:
        values = [float(part) for part in _split_names(text)]
    except ValueError:
        raise UsageError(f"error: {flag} expects comma-separated numbers, got {text!r}") from None
    if not values:
        raise UsageError(f"error: {flag} is empty")
    return values


def _parse_counts(text: str) -> PmcVector:
    pairs = {}
    for part in _split_names(text):
        name, eq, value = part.partition("=")
        if not eq or not name:
            raise UsageError(
                f"error: --counts expects name=value pairs, got {part!r}"
            )
        try:
            pairs[name] = float(value)
        except ValueError:
            raise UsageError(f"error: --counts value for {name!r} is not numeric") from None
    if not pairs:
        raise UsageError("error: --counts is empty")
    return PmcVector.from_dict(pairs)


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_text(payload) -> str:
    return json.dumps(payload, indent=2) + "\n"


def _csv_row(values) -> str:
    cells = []
    for value in values:
        if value is None:
            cells.append("")
        elif isinstance(value, bool):
            cells.append("true" if value else "false")
        elif isinstance(value, float):
            cells.append(repr(value))
        else:
            cells.append(str(value))
    return ",".join(cells)


def _add_format(parser, default: str = "json") -> None:
    parser.add_argument(
        "--format", choices=("csv", "json"), default=default,
        help=f"report format (default: {default})",
    )


def _add_out(parser) -> None:
    parser.add_argument("--out", metavar="PATH", help="write the report to PATH instead of stdout")


def _cmd_additivity(args) -> int:
    dataset = load_runs(args.runs)
    compounds = load_compounds(args.compounds, dataset) if args.compounds else []
    report = run_additivity_test(
        dataset, compounds, args.tolerance, reproducibility_cov=args.cov
    )
    sweep = tolerance_sweep(report, _parse_floats(args.sweep, "--sweep")) if args.sweep else None

    if args.format == "csv":
        text = report_to_csv(report)
        if sweep is not None:
            lines = ["tolerance_pct,additive_count"]
            lines += [_csv_row(entry) for entry in sweep]
            text += "\n" + "\n".join(lines) + "\n"
    else:
        payload = report_to_json_dict(report)
        if sweep is not None:
            payload["sweep"] = [
                {"tolerance_pct": t, "additive_count": c} for t, c in sweep
            ]
        text = _json_text(payload)
    _emit(text, args.out)
    return 0


def _cmd_correlate(args) -> int:
    dataset = load_runs(args.runs)
    pmcs = _split_names(args.pmcs) if args.pmcs else None
    matrix = correlation_matrix(dataset, pmcs)
    text = matrix.to_csv() if args.format == "csv" else _json_text(matrix.to_json_dict())
    _emit(text, args.out)
    return 0


def _cmd_fit(args) -> int:
    dataset = load_runs(args.runs)
    pmcs = _split_names(args.pmcs) if args.pmcs else None
    model = fit(dataset, pmcs, ModelKind(args.kind))
    if args.out:
        save_model(model, args.out)
    else:
        sys.stdout.write(_json_text(model_to_dict(model)))
    return 0


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    if args.counts:
        value = predict(model, _parse_counts(args.counts))
        if args.format == "csv":
            text = "prediction_j\n" + _csv_row([value]) + "\n"
        else:
            text = _json_text({"prediction_j": value})
        _emit(text, args.out)
        return 0

    dataset = load_runs(args.runs)
    rows = [
        (run.app_id, run.run_id, run.config.cores, run.config.problem_size,
         predict(model, run.pmc))
        for run in dataset.runs
    ]
    if args.format == "csv":
        lines = ["app_id,run_id,cores,problem_size,prediction_j"]
        lines += [_csv_row(row) for row in rows]
        text = "\n".join(lines) + "\n"
    else:
        text = _json_text(
            {
                "predictions": [
                    {
                        "app_id": app_id,
                        "run_id": run_id,
                        "cores": cores,
                        "problem_size": problem_size,
                        "prediction_j": value,
                    }
                    for app_id, run_id, cores, problem_size, value in rows
                ]
            }
        )
    _emit(text, args.out)
    return 0


def _cmd_evaluate(args) -> int:
    model = load_model(args.model)
    dataset = load_runs(args.runs)
    if args.compounds:
        compounds = load_compounds(args.compounds, dataset)
        cases = [(c.pmc, c.dynamic_energy_j) for c in compounds]
    else:
        cases = [(r.pmc, r.dynamic_energy_j) for r in dataset.runs]
    summary = evaluate(model, cases)
    if args.format == "csv":
        text = (
            "min_pct,avg_pct,max_pct,n_cases\n"
            + _csv_row([summary.min_pct, summary.avg_pct, summary.max_pct, summary.n_cases])
            + "\n"
        )
    else:
        text = _json_text(summary.to_json_dict())
    _emit(text, args.out)
    return 0


def _cmd_conserve(args) -> int:
    model = load_model(args.model)
    report = check_conservation(model)
    code = 0 if report.clean else 2

    if args.composability_trials:
        if args.format == "csv":
            raise UsageError("error: --composability-trials reports are JSON only")
        composability = strong_composability_check(
            model, args.composability_trials, args.seed, delta=args.delta
        )
        payload = report.to_json_dict()
        payload["composability"] = composability.to_json_dict()
        if not composability.passed:
            code = 2
        _emit(_json_text(payload), args.out)
        return code

    if args.format == "csv":
        lines = ["kind,pmc_name,value,predicted_j"]
        for violation in report.violations:
            lines.append(
                _csv_row(
                    [violation.kind.value, violation.pmc_name, violation.value,
                     violation.predicted_j]
                )
            )
        text = "\n".join(lines) + "\n"
    else:
        text = _json_text(report.to_json_dict())
    _emit(text, args.out)
    return code


def _cmd_partition(args) -> int:
    func1 = load_energy_function(args.func1, granularity=args.granularity)
    func2 = load_energy_function(args.func2, granularity=args.granularity)
    result = partition(func1, func2, args.n, interpolate=args.interpolate)
    if args.format == "json":
        text = _json_text(result.to_json_dict())
    else:
        text = (
            "m,k,e1_j,e2_j,total_j\n"
            + _csv_row([result.m, result.k, result.e1_j, result.e2_j, result.total_j])
            + "\n"
        )
    _emit(text, args.out)
    return 0


def _cmd_loss(args) -> int:
    value = energy_loss(args.alt, args.ref)
    if args.format == "csv":
        text = "loss_pct\n" + _csv_row([value]) + "\n"
    else:
        text = _json_text({"loss_pct": value})
    _emit(text, args.out)
    return 0


def _cmd_stats(args) -> int:
    if args.values:
        samples = _parse_floats(args.values, "--values")
    else:
        with open(args.values_file, encoding="utf-8") as fh:
            text = fh.read()
        samples = _parse_floats(",".join(text.split()), "--values-file")
    estimate = sample_mean_ci(samples, confidence=args.confidence, precision=args.precision)
    payload = {
        "mean": estimate.mean,
        "half_width": estimate.half_width,
        "n": estimate.n,
        "converged": estimate.converged,
        "relative_undefined": estimate.relative_undefined,
    }
    if args.format == "csv":
        text = (
            "mean,half_width,n,converged,relative_undefined\n"
            + _csv_row(list(payload.values()))
            + "\n"
        )
    else:
        text = _json_text(payload)
    _emit(text, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="emodel",
        description="PMC additivity testing, linear energy models, and "
        "energy-aware two-processor partitioning.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = sub.add_parser("additivity", help="run the two-stage PMC additivity test")
    p.add_argument("--runs", required=True, help="base-application runs CSV")
    p.add_argument("--compounds", help="compound-application runs CSV")
    p.add_argument("--tolerance", type=float, default=5.0,
                   help="additivity tolerance in percent (default: 5.0)")
    p.add_argument("--cov", type=float, default=0.025,
                   help="stage-1 reproducibility bound on the coefficient of "
                   "variation (default: 0.025)")
    p.add_argument("--sweep", metavar="T1,T2,...",
                   help="also count additive PMCs at these ascending tolerances")
    _add_format(p)
    _add_out(p)
    p.set_defaults(handler=_cmd_additivity)

    p = sub.add_parser("correlate", help="correlate PMCs with dynamic energy")
    p.add_argument("--runs", required=True)
    p.add_argument("--pmcs", metavar="NAME,NAME,...", help="subset of PMCs (default: all)")
    _add_format(p)
    _add_out(p)
    p.set_defaults(handler=_cmd_correlate)

    p = sub.add_parser("fit", help="fit a linear dynamic-energy model")
    p.add_argument("--runs", required=True)
    p.add_argument("--kind", required=True, choices=[k.value for k in ModelKind])
    p.add_argument("--pmcs", metavar="NAME,NAME,...", help="subset of PMCs (default: all)")
    p.add_argument("--out", metavar="PATH", help="write the model file here instead of stdout")
    p.set_defaults(handler=_cmd_fit)

    p = sub.add_parser("predict", help="predict dynamic energy from PMC counts")
    p.add_argument("--model", required=True, help="model file")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--counts", metavar="NAME=V,NAME=V,...",
                        help="one inline PMC vector")
    source.add_argument("--runs", help="predict every row of a runs CSV")
    _add_format(p)
    _add_out(p)
    p.set_defaults(handler=_cmd_predict)

    p = sub.add_parser("evaluate", help="prediction-error summary on measured data")
    p.add_argument("--model", required=True)
    p.add_argument("--runs", required=True,
                   help="runs CSV; the evaluation cases unless --compounds is given")
    p.add_argument("--compounds", help="evaluate on these compounds instead of the runs")
    _add_format(p)
    _add_out(p)
    p.set_defaults(handler=_cmd_evaluate)

    p = sub.add_parser("conserve", help="energy-conservation checks on a model")
    p.add_argument("--model", required=True)
    p.add_argument("--composability-trials", type=int, metavar="N",
                   help="also run the randomized composability check with N trials")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    p.add_argument("--delta", type=float, default=1.0,
                   help="offset for the shifted-sum operator (default: 1.0)")
    _add_format(p)
    _add_out(p)
    p.set_defaults(handler=_cmd_conserve)

    p = sub.add_parser("partition", help="minimum-energy two-processor split")
    p.add_argument("--func1", required=True, help="energy-function CSV for processor one")
    p.add_argument("--func2", required=True, help="energy-function CSV for processor two")
    p.add_argument("--n", type=int, required=True, help="total rows to split")
    p.add_argument("--granularity", type=int,
                   help="grid granularity (default: inferred from the files)")
    p.add_argument("--interpolate", action="store_true",
                   help="fill missing grid samples by linear interpolation along x")
    _add_format(p, default="csv")
    _add_out(p)
    p.set_defaults(handler=_cmd_partition)

    p = sub.add_parser("loss", help="signed percentage energy change vs a reference")
    p.add_argument("--alt", type=float, required=True, help="alternative energy in joules")
    p.add_argument("--ref", type=float, required=True, help="reference energy in joules")
    _add_format(p)
    _add_out(p)
    p.set_defaults(handler=_cmd_loss)

    p = sub.add_parser("stats", help="confidence-interval sample mean")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--values", metavar="V,V,...", help="inline samples")
    source.add_argument("--values-file", metavar="PATH", help="whitespace-separated samples")
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--precision", type=float, default=0.025)
    _add_format(p)
    _add_out(p)
    p.set_defaults(handler=_cmd_stats)

    return parser


def run_cli(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except KeyError as exc:
        message = exc.args[0] if exc.args else exc
        print(f"emodel: error: {message}", file=sys.stderr)
        return 1
    except (DataFormatError, OSError, ValueError, RuntimeError) as exc:
        print(f"emodel: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
