"""Command-line front-end: ``p2pbw {generate,estimate,analyze,queue}``.

Every command accepts ``--config <file.json>`` and ``--seed``; flags override
values from the config file.  Outputs are written atomically and embed the
resolved configuration.  Exit codes: 0 success, 1 usage/config error,
2 data error, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as _dt
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import SCHEMA_VERSION, ModelConfig, build_config, load_config_file
from .estimation import (
    ar1_oracle,
    estimate_all,
    estimate_paper_literal,
    gamma_from_decay,
    paper_literal_gamma_root,
    paper_literal_sigma,
)
from .exceptions import ConfigError, FitFailed, InvalidArgument, P2PBandwidthError, UnstableQueue
from .io import read_series_csv, read_trace_csv, write_columns_csv, write_json, write_trace_csv
from .ou import Grid, Trace, ou_stationary_moments
from .queueing import norros_theta, queue_params_from_spec, simulate_queue, tail_report
from .statistics import (
    fit_acv_model,
    hurst_from_indices,
    lrd_diagnostic,
    paper_moment_formulas,
    sample_autocovariance,
    sample_moments,
)
from .synthesis import synthesize_aggregate, synthesize_multiservice, synthesize_with_factors
from .traffic import TrafficIndices, power_law_moments

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _timestamp():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _envelope(command, config):
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": dataclasses.asdict(config),
        "library_version": __version__,
        "generated_at": _timestamp(),
    }


def _sibling(output: Path, suffix: str) -> Path:
    return output.with_name(output.stem + suffix)


# -- generate ------------------------------------------------------------------


def run_generate(config) -> dict:
    output = Path(config.output)
    files = []
    if config.mode == "individual":
        spec = config.individual_spec()
        sample = synthesize_with_factors(spec, config.seed)
        files.append(write_trace_csv(output, sample.bandwidth))
        if config.write_factors:
            files.append(write_trace_csv(_sibling(output, ".ou.csv"), sample.ou_path))
            files.append(write_trace_csv(_sibling(output, ".traffic.csv"),
                                         Trace(spec.grid.dt, sample.traffic)))
    elif config.mode == "aggregate":
        spec = config.aggregate_spec()
        total, parts = synthesize_aggregate(spec, config.seed, n_jobs=config.jobs, return_components=True)
        files.append(write_trace_csv(output, total))
        if config.write_components:
            for i, part in enumerate(parts):
                files.append(write_trace_csv(_sibling(output, f"_component{i}{output.suffix}"), part))
    else:
        spec = config.multiservice_spec()
        for name, trace in synthesize_multiservice(spec, config.seed, n_jobs=config.jobs).items():
            files.append(write_trace_csv(_sibling(output, f"_{name}{output.suffix}"), trace))
    meta = _envelope("generate", config)
    meta["seed"] = config.seed
    meta["files"] = [str(f) for f in files]
    write_json(_sibling(output, ".meta.json"), meta)
    return meta


# -- estimate ------------------------------------------------------------------


def _relative(a, b):
    if a is None or b is None or not (math.isfinite(a) and math.isfinite(b)) or b == 0:
        return None
    return (a - b) / abs(b)


def run_estimate(config) -> tuple[dict, int]:
    trace = read_trace_csv(config.trace, config.dt) if config.trace else None
    samples = read_series_csv(config.traffic)[1] if config.traffic else None
    combined = estimate_all(trace, samples, config.cutoff)
    report = _envelope("estimate", config)
    report["errors"] = combined.diagnostics.get("errors", {})
    exit_code = EXIT_OK
    if trace is None or "gamma,sigma" in report["errors"]:
        report["ou"] = None
        report["ou_absent"] = True
    else:
        exact = combined
        literal = estimate_paper_literal(trace)
        oracle = ar1_oracle(trace)
        at_exact = {"roots": [], "gamma_from_roots": [], "sigma_at_exact_decay": None}
        if exact.sigma_hat > 0:
            roots = paper_literal_gamma_root(trace, exact.sigma_hat)
            at_exact["roots"] = roots
            at_exact["gamma_from_roots"] = [gamma_from_decay(r, trace.dt) for r in roots]
        decay = exact.diagnostics.get("decay")
        if decay is not None and 0 < decay < 1:
            at_exact["sigma_at_exact_decay"] = paper_literal_sigma(trace, decay)

        def _summary(r):
            d = r.as_dict()
            d.pop("n_hat"), d.pop("n_se")
            d["diagnostics"] = {k: v for k, v in d["diagnostics"].items() if k != "errors"}
            return d

        report["ou"] = {
            "exact_mle": _summary(exact),
            "paper_literal": _summary(literal),
            "ar1_oracle": _summary(oracle),
            "paper_literal_at_exact_mle": at_exact,
            "deviations": {
                "paper_literal_vs_exact_mle": {
                    "gamma": _relative(literal.gamma_hat, exact.gamma_hat),
                    "sigma": _relative(literal.sigma_hat, exact.sigma_hat),
                },
                "ar1_oracle_vs_exact_mle": {
                    "gamma": _relative(oracle.gamma_hat, exact.gamma_hat),
                    "sigma": _relative(oracle.sigma_hat, exact.sigma_hat),
                },
            },
            "dt": trace.dt,
            "length": len(trace),
        }
        if not exact.converged:
            exit_code = EXIT_NUMERIC
    if combined.n_hat is not None:
        report["n"] = {"n_hat": combined.n_hat, "n_se": combined.n_se, "count": int(samples.size),
                       "cutoff": config.cutoff}
    else:
        report["n"] = None
    write_json(config.output, report)
    return report, exit_code


# -- analyze ---------------------------------------------------------------------


def _model_moments(model: ModelConfig, dt: float):
    spec = model.to_spec(Grid(dt, 1))
    mean_b, var_b = power_law_moments(spec.traffic)
    mean_s, var_s = ou_stationary_moments(spec.ou)
    mean, variance = paper_moment_formulas(spec, (mean_b, var_b), (mean_s, var_s))
    return spec, {
        "inputs": {"E_B": mean_b, "Var_B": var_b, "E_S": mean_s, "Var_S": var_s,
                   "gamma": spec.ou.gamma, "sigma": spec.ou.sigma, "kprime": spec.kprime},
        "mean": mean,
        "variance": variance,
        "notes": [] if math.isfinite(variance) else ["Var(B) is infinite for n <= 3"],
    }


def run_analyze(config) -> tuple[dict, int]:
    output = Path(config.output)
    report = _envelope("analyze", config)
    warnings = []
    exit_code = EXIT_OK
    if config.input_kind == "acv":
        lags, acv = read_series_csv(config.input, header=("lag", "value"))
        if not np.array_equal(lags, np.arange(lags.size)):
            raise InvalidArgument(f"{config.input}: lag column must be 0, 1, 2, ...")
        dt = config.dt or 1.0
        report["sample_moments"] = None
    else:
        trace = read_trace_csv(config.input, config.dt)
        dt = trace.dt
        max_lag = config.max_lag
        if max_lag is None:
            max_lag = max(0, min(200, -(-len(trace) // 4) - 1))
        if max_lag >= len(trace) / 4:
            raise InvalidArgument(f"max_lag={max_lag} needs a trace longer than {4 * max_lag} samples "
                                  f"(got {len(trace)})")
        moments = sample_moments(trace, n_boot=config.n_boot, seed=config.seed or 0)
        report["sample_moments"] = moments.as_dict()
        if moments.variance == 0:
            warnings.append("degenerate statistics: the trace is constant (zero variance)")
        acv = sample_autocovariance(trace, max_lag)
    report["max_lag"] = acv.size - 1

    if config.model is not None:
        spec, paper = _model_moments(config.model, dt)
        report["paper_moments"] = paper
    else:
        report["paper_moments"] = None

    fitted = np.full(acv.size, np.nan)
    try:
        fit = fit_acv_model(acv, dt)
        report["acv_fit"] = fit.as_dict()
        fitted[1:] = fit.predict(dt * np.arange(1, acv.size))
    except FitFailed as exc:
        report["acv_fit"] = dict(exc.best.as_dict(), error=str(exc)) if exc.best else {"error": str(exc)}
        exit_code = EXIT_NUMERIC
    except InvalidArgument as exc:
        report["acv_fit"] = {"error": str(exc)}

    lags = np.arange(acv.size)
    write_columns_csv(_sibling(output, ".acv.csv"), ("lag", "acv", "fitted"), (lags, acv, fitted))
    if acv.size >= 32:
        diag = lrd_diagnostic(acv)
        report["lrd"] = {
            "verdict": diag.lrd,
            "diverges": diag.diverges,
            "unreliable": diag.unreliable,
            "decay_exponent": diag.exponent,
            "hurst_from_decay": diag.hurst,
            "note": "regression on |acv| over the upper half of lags" if diag.unreliable else None,
        }
        write_columns_csv(_sibling(output, ".partial_sums.csv"), ("lag", "partial_sum"),
                          (np.arange(1, acv.size), diag.partial_sums))
        line = diag.exponent * diag.log_lags + diag.intercept
        write_columns_csv(_sibling(output, ".loglog.csv"), ("log_lag", "log_abs_acv", "fitted"),
                          (diag.log_lags, diag.log_abs_acv, line))
    else:
        report["lrd"] = None
        warnings.append("LRD diagnostic needs at least 32 lags")
    report["hurst"] = report["acv_fit"].get("hurst") if report["acv_fit"] else None
    report["warnings"] = warnings
    write_json(output, report)
    return report, exit_code


# -- queue -----------------------------------------------------------------------


def _queue_hurst(config):
    if config.hurst is not None:
        return float(config.hurst)
    if config.model is not None:
        return hurst_from_indices(TrafficIndices(config.model.n, config.model.n), config.model.epsilon)
    raise ConfigError("queue needs 'hurst' or a 'model' to derive it from")


def run_queue(config) -> dict:
    output = Path(config.output)
    if config.input is not None:
        arrivals = read_trace_csv(config.input)
    else:
        block = dict(config.generate)
        block.setdefault("seed", config.seed)
        gen = build_config("generate", block)
        if gen.mode == "individual":
            arrivals = synthesize_with_factors(gen.individual_spec(), gen.seed).bandwidth
        elif gen.mode == "aggregate":
            arrivals = synthesize_aggregate(gen.aggregate_spec(), gen.seed)
        else:
            raise ConfigError("queue input generation supports individual or aggregate mode only")
    hurst = _queue_hurst(config)
    mean_rate = float(arrivals.values.mean()) / arrivals.dt
    if config.utilization is not None:
        if config.utilization >= 1:
            raise UnstableQueue(f"utilization {config.utilization} >= 1: the queue is unstable")
        service_rate = mean_rate / config.utilization
        if service_rate <= 0:
            raise InvalidArgument("arrivals are all zero; cannot derive a service rate from utilization")
    else:
        service_rate = float(config.service_rate)

    params = None
    if config.download_rate is not None or config.upload_rate is not None:
        if config.download_rate is None or config.upload_rate is None:
            raise ConfigError("the closed-form tail needs both download_rate and upload_rate")
        if config.model is None:
            raise ConfigError("the closed-form tail needs a 'model' for gamma, sigma and K'")
        spec = config.model.to_spec(Grid(arrivals.dt, 1))
        var_b = config.var_b if config.var_b is not None else power_law_moments(spec.traffic)[1]
        var_s = config.var_s if config.var_s is not None else ou_stationary_moments(spec.ou)[1]
        if not math.isfinite(var_b):
            raise ConfigError("Var(B) is infinite for n <= 3; supply var_b for the closed-form tail")
        params = queue_params_from_spec(spec, (config.download_rate, config.upload_rate), (var_b, var_s))
        params = dataclasses.replace(params, hurst=hurst)

    occupancy = simulate_queue(arrivals, service_rate)
    report = tail_report(occupancy, hurst, params, config.thresholds, burn_in=config.burn_in)
    payload = _envelope("queue", config)
    payload.update(report.as_dict())
    payload["service_rate"] = service_rate
    payload["mean_arrival_rate"] = mean_rate
    payload["utilization"] = mean_rate / service_rate
    payload["queue_params"] = (
        {"m": params.m, "hurst": params.hurst, "a": params.a, "theta": norros_theta(params)} if params else None
    )
    payload["occupancy_mean"] = float(occupancy.values.mean())
    x_pow = report.thresholds ** (2.0 - 2.0 * hurst)
    p_model = report.model_probabilities if report.model_probabilities is not None else [None] * len(x_pow)
    write_columns_csv(_sibling(output, ".tail.csv"), ("x", "p_hat", "p_model", "x_pow"),
                      (report.thresholds, report.probabilities, np.array(p_model, dtype=object), x_pow))
    write_json(output, payload)
    return payload


# -- argument parsing --------------------------------------------------------------


def _add_common(p, default=argparse.SUPPRESS):
    # Accepted both before and after the subcommand; SUPPRESS keeps a
    # subcommand-level default from hiding the global value.
    p.add_argument("--config", default=default, help="JSON config file; flags override its values")
    p.add_argument("--seed", type=int, default=default, help="random seed")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="p2pbw", description="P2P bandwidth synthesis, analysis and estimation")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _add_common(parser, default=None)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="synthesize bandwidth traces")
    _add_common(g)
    g.add_argument("--mode", choices=["individual", "aggregate", "multiservice"])
    g.add_argument("--output", "-o")
    g.add_argument("--dt", type=float, dest="grid.dt")
    g.add_argument("--count", type=int, dest="grid.count")
    for name in ("a", "n", "gamma", "sigma", "s0", "kprime", "epsilon"):
        g.add_argument(f"--{name}", type=float, dest=f"model.{name}")
    g.add_argument("--burn-in", type=int, dest="model.burn_in", help="leading steps to discard")
    g.add_argument("--components", type=int, help="number of identical aggregate components")
    g.add_argument("--write-components", action="store_const", const=True)
    g.add_argument("--write-factors", action="store_const", const=True,
                   help="also write the OU path and traffic samples (individual mode)")
    g.add_argument("--jobs", type=int)

    e = sub.add_parser("estimate", help="estimate gamma, sigma and n")
    _add_common(e)
    e.add_argument("--trace", help="OU-attributed trace CSV (time,value)")
    e.add_argument("--traffic", help="traffic samples CSV (time,value)")
    e.add_argument("--cutoff", type=float, help="traffic cutoff a")
    e.add_argument("--dt", type=float)
    e.add_argument("--output", "-o")

    a = sub.add_parser("analyze", help="moments, autocovariance fit and LRD diagnostic")
    _add_common(a)
    a.add_argument("input", nargs="?")
    a.add_argument("--input-kind", choices=["trace", "acv"])
    a.add_argument("--max-lag", type=int)
    a.add_argument("--dt", type=float)
    a.add_argument("--n-boot", type=int)
    a.add_argument("--output", "-o")

    q = sub.add_parser("queue", help="simulate a queue and compare its tail shape")
    _add_common(q)
    q.add_argument("input", nargs="?")
    q.add_argument("--service-rate", type=float)
    q.add_argument("--utilization", type=float)
    q.add_argument("--hurst", type=float)
    q.add_argument("--download-rate", type=float)
    q.add_argument("--upload-rate", type=float)
    q.add_argument("--var-b", type=float)
    q.add_argument("--var-s", type=float)
    q.add_argument("--burn-in", type=float)
    q.add_argument("--output", "-o")
    return parser


def _resolve(args) -> object:
    data = load_config_file(args.config, args.command) if args.config else {}
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        if "." in key:
            block, name = key.split(".", 1)
            nested = dict(data.get(block) or {})
            nested[name] = value
            data[block] = nested
        else:
            data[key] = value
    return build_config(args.command, data)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _resolve(args)
        if args.command == "generate":
            run_generate(config)
            code = EXIT_OK
        elif args.command == "estimate":
            _, code = run_estimate(config)
        elif args.command == "analyze":
            _, code = run_analyze(config)
        else:
            run_queue(config)
            code = EXIT_OK
    except P2PBandwidthError as exc:
        print(f"p2pbw {args.command}: error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"p2pbw {args.command}: error [OSError]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
