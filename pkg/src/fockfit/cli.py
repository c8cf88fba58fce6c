"""Command-line front end.

Subcommands: probs, simulate, estimate, ci, fidelity, study.  Files are
versioned JSON (counts, estimates, study configs) and CSV (study reports);
every command that draws random numbers takes --seed/--stream and is
bit-reproducible.  Exit codes: 0 success, 1 usage or validation error,
2 convergence failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from . import bootstrap as bt
from . import estimation as est
from . import studies
from .model import QuadratureVariances, SqueezedThermalState, fidelity, fock_distribution, to_variances
from .sampling import SeedSpec, sample_histogram

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NONCONVERGED = 2
EXIT_IO = 3

FORMAT_VERSION = 1


class _CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    """argparse parser whose usage errors exit with code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise _CliError(EXIT_USAGE, message)


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    try:
        with open(tmp, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise _CliError(EXIT_IO, f"cannot write {path}: {exc}") from exc


def _read_json(path: str) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise _CliError(EXIT_IO, f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise _CliError(EXIT_USAGE, f"{path}: malformed JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise _CliError(EXIT_USAGE, f"{path}: expected a JSON object")
    return doc


def _state_from_flags(args) -> QuadratureVariances:
    has_rn = args.r is not None or args.nbar is not None
    has_v = args.vq is not None or args.vp is not None
    if has_rn == has_v:
        raise _CliError(EXIT_USAGE, "give exactly one of --r/--nbar or --vq/--vp")
    try:
        if has_rn:
            if args.r is None or args.nbar is None:
                raise _CliError(EXIT_USAGE, "--r and --nbar must be given together")
            return to_variances(SqueezedThermalState(args.r, args.nbar))
        if args.vq is None or args.vp is None:
            raise _CliError(EXIT_USAGE, "--vq and --vp must be given together")
        return QuadratureVariances(args.vq, args.vp)
    except ValueError as exc:
        raise _CliError(EXIT_USAGE, str(exc)) from exc


def _parse_state_string(text: str, flag: str) -> QuadratureVariances:
    pairs = {}
    for chunk in text.split(","):
        key, sep, value = chunk.partition("=")
        if not sep:
            raise _CliError(EXIT_USAGE, f"{flag}: expected key=value pairs, got {chunk!r}")
        try:
            pairs[key.strip()] = float(value)
        except ValueError as exc:
            raise _CliError(EXIT_USAGE, f"{flag}: bad number in {chunk!r}") from exc
    try:
        if set(pairs) == {"r", "nbar"}:
            return to_variances(SqueezedThermalState(pairs["r"], pairs["nbar"]))
        if set(pairs) == {"vq", "vp"}:
            return QuadratureVariances(pairs["vq"], pairs["vp"])
    except ValueError as exc:
        raise _CliError(EXIT_USAGE, f"{flag}: {exc}") from exc
    raise _CliError(EXIT_USAGE, f"{flag}: expected r=..,nbar=.. or vq=..,vp=..")


def _counts_to_histogram(doc: dict, path: str) -> est.FockHistogram:
    for key in ("format_version", "n_max", "counts", "overflow", "total"):
        if key not in doc:
            raise _CliError(EXIT_USAGE, f"{path}: missing field '{key}'")
    if doc["format_version"] != FORMAT_VERSION:
        raise _CliError(EXIT_USAGE, f"{path}: unsupported format_version")
    counts = doc["counts"]
    if (
        not isinstance(counts, list)
        or not all(isinstance(k, int) for k in counts)
        or not isinstance(doc["overflow"], int)
        or not isinstance(doc["total"], int)
    ):
        raise _CliError(EXIT_USAGE, f"{path}: counts, overflow and total must be integers")
    if doc["n_max"] != len(counts) - 1:
        raise _CliError(EXIT_USAGE, f"{path}: n_max does not match counts length")
    try:
        return est.FockHistogram(tuple(counts), doc["overflow"], doc["total"])
    except ValueError as exc:
        raise _CliError(EXIT_USAGE, f"{path}: {exc}") from exc


def _write_counts(path: str, h: est.FockHistogram) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "n_max": h.n_max,
        "counts": list(h.counts),
        "overflow": h.overflow_count,
        "total": h.total,
    }
    _atomic_write(path, json.dumps(doc) + "\n")


def _expected_counts(probs: list[float], shots: int) -> list[int]:
    """Largest-remainder apportionment of shots across bins."""
    scaled = [p * shots for p in probs]
    base = [math.floor(x) for x in scaled]
    leftover = shots - sum(base)
    order = sorted(range(len(probs)), key=lambda i: (base[i] - scaled[i], i))
    for i in order[:leftover]:
        base[i] += 1
    return base


def _estimate_doc(res: est.FitResult, scheme: str, prior: est.PriorShape,
                  intervals: list | None = None) -> dict:
    doc = {
        "format_version": FORMAT_VERSION,
        "vq": res.variances.vq,
        "vp": res.variances.vp,
        "r": res.state.r,
        "nbar": res.state.nbar,
        "objective": res.objective,
        "converged": res.converged,
        "weight_scheme": scheme,
        "prior": {"nu": prior.nu, "eta": prior.eta},
    }
    if intervals is not None:
        doc["intervals"] = [
            {
                "parameter": ci.parameter,
                "method": ci.method,
                "level": ci.level,
                "lower": ci.lower,
                "upper": ci.upper,
            }
            for ci in intervals
        ]
    return doc


def cmd_probs(args) -> int:
    v = _state_from_flags(args)
    dist = fock_distribution(v, args.nmax)
    print("n,probability")
    for n, p in enumerate(dist.probs):
        print(f"{n},{p!r}")
    print(f"overflow,{dist.overflow!r}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    v = _state_from_flags(args)
    dist = fock_distribution(v, args.nmax)
    if args.exact:
        counts = _expected_counts(list(dist.probs) + [dist.overflow], args.shots)
        h = est.FockHistogram(tuple(counts[:-1]), counts[-1], args.shots)
    else:
        h = sample_histogram(dist, args.shots, SeedSpec(args.seed, args.stream))
    _write_counts(args.out, h)
    return EXIT_OK


def _fit_from_args(args, h: est.FockHistogram):
    scheme = args.weights
    if scheme is None:
        scheme = "uniform" if getattr(args, "from_exact", False) else "posterior"
    prior = est.PriorShape(args.nu, args.eta)
    try:
        weights = studies.weights_for(h, scheme, prior)
    except ValueError as exc:
        raise _CliError(EXIT_USAGE, str(exc)) from exc
    return est.fit(h, weights), scheme, prior


def cmd_estimate(args) -> int:
    h = _counts_to_histogram(_read_json(args.counts), args.counts)
    res, scheme, prior = _fit_from_args(args, h)
    _atomic_write(args.out, json.dumps(_estimate_doc(res, scheme, prior)) + "\n")
    if not res.converged and not args.allow_nonconverged:
        print("fit did not converge", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_ci(args) -> int:
    h = _counts_to_histogram(_read_json(args.counts), args.counts)
    res, scheme, prior = _fit_from_args(args, h)
    if not res.converged:
        print("fit did not converge; no intervals computed", file=sys.stderr)
        return EXIT_NONCONVERGED
    try:
        reps = bt.parametric_bootstrap(
            res, h.total, args.replicates, prior,
            SeedSpec(args.seed, args.stream), h.n_max,
        )
    except bt.BootstrapError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_NONCONVERGED
    points = {
        "vq": res.variances.vq, "vp": res.variances.vp,
        "r": res.state.r, "nbar": res.state.nbar,
    }
    intervals = []
    for parameter in bt.PARAMETERS:
        values = reps.sorted_values(parameter)
        if args.method == "percentile":
            intervals.append(bt.percentile_interval(values, args.alpha, parameter))
        else:
            intervals.append(bt.bc_interval(values, points[parameter], args.alpha, parameter))
    _atomic_write(args.out, json.dumps(_estimate_doc(res, scheme, prior, intervals)) + "\n")
    return EXIT_OK


def cmd_fidelity(args) -> int:
    a = _parse_state_string(args.state1, "--state1")
    b = _parse_state_string(args.state2, "--state2")
    print(f"{fidelity(a, b):.12g}")
    return EXIT_OK


def cmd_study(args) -> int:
    doc = _read_json(args.config)
    try:
        kind, cfg = studies.parse_config(doc)
        report = studies.run_study(kind, cfg)
    except studies.ConfigError as exc:
        raise _CliError(EXIT_USAGE, str(exc)) from exc
    except bt.BootstrapError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_NONCONVERGED
    json_out = args.json_out or os.path.splitext(args.out)[0] + ".json"
    try:
        report.write_csv(args.out)
        report.write_json(json_out)
    except OSError as exc:
        raise _CliError(EXIT_IO, f"cannot write report: {exc}") from exc
    return EXIT_OK


def _add_state_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--r", type=float, help="squeezing parameter (with --nbar)")
    p.add_argument("--nbar", type=float, help="mean thermal occupation (with --r)")
    p.add_argument("--vq", type=float, help="q-quadrature variance (with --vp)")
    p.add_argument("--vp", type=float, help="p-quadrature variance (with --vq)")


def _add_weight_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--weights", choices=studies.WEIGHT_SCHEMES, default=None,
                   help="weighting scheme (default: posterior)")
    p.add_argument("--nu", type=float, default=1.0, help="Beta prior shape nu")
    p.add_argument("--eta", type=float, default=1.0, help="Beta prior shape eta")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fockfit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("probs", help="print the model Fock distribution as CSV")
    _add_state_flags(p)
    p.add_argument("--nmax", type=int, default=20)
    p.set_defaults(handler=cmd_probs)

    p = sub.add_parser("simulate", help="sample a count histogram and write a counts file")
    _add_state_flags(p)
    p.add_argument("--shots", type=int, required=True)
    p.add_argument("--nmax", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--exact", action="store_true",
                   help="write expected counts (largest-remainder rounding) instead of sampling")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("estimate", help="fit a counts file and write an estimate file")
    p.add_argument("--counts", required=True)
    _add_weight_flags(p)
    p.add_argument("--from-exact", dest="from_exact", action="store_true",
                   help="counts hold exact expected values; default to uniform weights")
    p.add_argument("--allow-nonconverged", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_estimate)

    p = sub.add_parser("ci", help="fit plus parametric-bootstrap confidence intervals")
    p.add_argument("--counts", required=True)
    _add_weight_flags(p)
    p.add_argument("--replicates", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--method", choices=bt.METHODS, default="bc")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_ci)

    p = sub.add_parser("fidelity", help="fidelity between two states")
    p.add_argument("--state1", required=True, help="r=..,nbar=.. or vq=..,vp=..")
    p.add_argument("--state2", required=True, help="r=..,nbar=.. or vq=..,vp=..")
    p.set_defaults(handler=cmd_fidelity)

    p = sub.add_parser("study", help="run a study config and write CSV/JSON reports")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="CSV report path")
    p.add_argument("--json-out", default=None,
                   help="JSON report path (default: CSV path with .json)")
    p.set_defaults(handler=cmd_study)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args)
    except _CliError as exc:
        print(f"fockfit: {exc}", file=sys.stderr)
        return exc.code
    except ValueError as exc:
        print(f"fockfit: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
