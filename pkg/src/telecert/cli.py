"""Command-line front end.

Exit codes: 0 success (``certify``: certified), 1 error, 2 usage error or
(``chsh``) a violation with failing checks, 3 inconclusive, 4 assumption
violated.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import BRANCHES, verify_all
from .certify import (
    SWEEP_HEADER,
    ChshSettings,
    Verdict,
    average_fidelity,
    certify,
    chsh,
    exact_checks,
    optimize_settings,
    simulate_certification_table,
    table_checks,
    table_fidelity,
    wz_sweep,
)
from .geometry import sample_uniform_sphere
from .montecarlo import resolve_seed
from .protocols import INV_SQRT3, CapabilityError, Protocol, parse_protocol
from .stats import (
    AXIS_SETTINGS,
    ActiveCompensationError,
    ExperimentTable,
    MissingSettingError,
    check_alice_marginal,
    check_no_signaling,
    export_csv,
    ingest_csv,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_SUSPICIOUS = 2
EXIT_INCONCLUSIVE = 3
EXIT_VIOLATED = 4

VERDICT_EXIT = {
    Verdict.QUANTUM_CERTIFIED: EXIT_OK,
    Verdict.INCONCLUSIVE: EXIT_INCONCLUSIVE,
    Verdict.ASSUMPTION_VIOLATED: EXIT_VIOLATED,
}


class CliError(Exception):
    pass


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


# output -----------------------------------------------------------------------


def _flatten(prefix: str, value, rows: list) -> None:
    if isinstance(value, dict):
        for k in sorted(value):
            _flatten(f"{prefix}.{k}" if prefix else str(k), value[k], rows)
    elif isinstance(value, list) and value and isinstance(value[0], dict):
        for i, v in enumerate(value):
            _flatten(f"{prefix}.{i}", v, rows)
    else:
        rows.append((prefix, json.dumps(value) if isinstance(value, list) else value))


def _render(doc, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    rows: list = []
    _flatten("", doc, rows)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("key", "value"))
    writer.writerows(rows)
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _provenance(args, protocol: Protocol | None, seed: int | None, n: int | None) -> dict:
    doc = {
        "tool_version": __version__,
        "protocol": protocol.identifier if protocol is not None else None,
        "parameters": dict(protocol.parameters) if protocol is not None else {},
        "input": args.input,
        "seed": seed,
        "samples": n,
    }
    if not args.no_timestamp:
        doc["timestamp"] = datetime.now(timezone.utc).isoformat()
    return doc


# shared plumbing ----------------------------------------------------------------


def _source(args) -> tuple[Protocol | None, ExperimentTable | None]:
    if args.protocol and args.input:
        raise CliError("give either --protocol or --input, not both")
    if args.input:
        return None, ingest_csv(args.input)
    if not args.protocol:
        raise CliError("one of --protocol or --input is required")
    protocol = parse_protocol(args.protocol)
    if getattr(args, "mode", None) == "exact" and not protocol.supports_exact:
        raise CliError(f"protocol {protocol.identifier!r} has no exact mode; use --mode monte-carlo")
    return protocol, None


def _settings(args, protocol: Protocol | None) -> ChshSettings:
    choice = args.settings or "canonical"
    if choice == "canonical":
        return ChshSettings.canonical()
    if choice == "optimized":
        if protocol is None or not protocol.supports_exact:
            raise CliError("--settings optimized needs a protocol with exact statistics")
        return optimize_settings(protocol, "grid+refine")
    path = Path(choice)
    if not path.exists():
        raise CliError(f"--settings must be 'canonical', 'optimized' or a JSON file, got {choice!r}")
    return ChshSettings.from_dict(json.loads(path.read_text(encoding="utf-8")))


# subcommands ----------------------------------------------------------------------


def cmd_chsh(args) -> int:
    protocol, table = _source(args)
    settings = _settings(args, protocol)
    seed = resolve_seed(args.seed)
    checks = {}
    if protocol is not None and protocol.supports_exact and args.mode != "monte-carlo":
        result = chsh(protocol, settings)
        marginal, linearity = exact_checks(protocol, settings, np.random.default_rng(seed))
        checks = {"marginal": marginal, "linearity": linearity}
        n = None
    else:
        n = args.samples or 100_000
        if table is None:
            table = simulate_certification_table(protocol, settings, n, np.random.default_rng(seed))
        result = chsh(table, settings)
        checks["marginal"] = check_alice_marginal(table)
        checks["no_signaling"] = check_no_signaling(table)
        try:
            checks["linearity"] = table_checks(table, settings)[1]
        except MissingSettingError:
            pass
    doc = {
        "chsh": result.to_dict(),
        "magnitude": result.magnitude,
        "checks": {k: v.to_dict() for k, v in checks.items()},
        "provenance": _provenance(args, protocol, seed, n),
    }
    _emit(_render(doc, args.format), args.out)
    if result.violates() and not all(c.passed for c in checks.values()):
        return EXIT_SUSPICIOUS
    return EXIT_OK


def cmd_fidelity(args) -> int:
    protocol, table = _source(args)
    seed = resolve_seed(args.seed)
    if table is not None:
        est = table_fidelity(table)
        if est is None:
            raise CliError("no input in the table has spanning Bob settings")
    else:
        mode = {"exact": "exact-map", "monte-carlo": "monte-carlo", None: None}[args.mode]
        est = average_fidelity(protocol, args.samples, seed, mode=mode)
    doc = {"fidelity": est.to_dict(), "provenance": _provenance(args, protocol, seed, est.sample_count)}
    _emit(_render(doc, args.format), args.out)
    return EXIT_OK


def cmd_certify(args) -> int:
    protocol, table = _source(args)
    settings = _settings(args, protocol)
    seed = resolve_seed(args.seed)
    if protocol is not None and args.mode == "monte-carlo" and protocol.supports_exact:
        # certify simulated runs rather than the exact statistics
        table = simulate_certification_table(protocol, settings, args.samples or 100_000, np.random.default_rng(seed))
        report = certify(table, settings, rng=seed)
    else:
        report = certify(protocol if protocol is not None else table, settings, args.samples, seed)
    doc = report.to_dict(timestamp=False)
    doc["provenance"] = _provenance(args, protocol, seed, args.samples)
    _emit(_render(doc, args.format), args.out)
    return VERDICT_EXIT[report.verdict]


def cmd_verify_analytics(args) -> int:
    seed = 0 if args.seed is None else args.seed
    targets = verify_all(tol=args.tol, n_samples=args.samples or 1_000_000, seed=seed, gisin_branch=args.gisin_branch)
    doc = {
        "targets": [t.to_dict() for t in targets],
        "passed": all(t.passed for t in targets),
        "provenance": _provenance(args, None, seed, args.samples or 1_000_000),
    }
    _emit(_render(doc, args.format), args.out)
    for t in targets:
        status = "ok  " if t.passed else "FAIL"
        print(f"{status} {t.name}: {t.value:.10g} (expected {t.expected:.10g} +- {t.tolerance:.3g})", file=sys.stderr)
    return EXIT_OK if doc["passed"] else EXIT_ERROR


def cmd_sweep(args) -> int:
    if args.param != "wz":
        raise CliError(f"unknown sweep parameter {args.param!r}")
    lo, hi = args.start, args.stop
    for v in (lo, hi):
        if not INV_SQRT3 < v <= 1.0:
            raise CliError(f"W_z must lie in (1/sqrt(3), 1], got {v}")
    values = np.linspace(lo, hi, args.steps)
    seed = resolve_seed(args.seed) if args.samples else None
    rows = wz_sweep(values, args.samples, seed)
    if args.format == "json":
        doc = {
            "rows": [dict(zip(SWEEP_HEADER, r.as_tuple())) for r in rows],
            "provenance": _provenance(args, None, seed, args.samples),
        }
        _emit(_render(doc, "json"), args.out)
        return EXIT_OK
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    for r in rows:
        writer.writerow([repr(float(x)) for x in r.as_tuple()])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.input:
        raise CliError("simulate takes --protocol, not --input")
    protocol, _ = _source(args)
    settings = _settings(args, protocol)
    seed = resolve_seed(args.seed)
    rng = np.random.default_rng(seed)
    runs = args.samples or 10_000
    table = simulate_certification_table(protocol, settings, runs, rng)
    if args.fidelity_inputs:
        inputs = sample_uniform_sphere(rng, args.fidelity_inputs)
        pairs = [(a, b) for a in inputs for b in AXIS_SETTINGS]
        table = ExperimentTable.concat([table, ExperimentTable.simulate(protocol, pairs, runs, rng)])
    if args.out is None or args.out == "-":
        raise CliError("simulate needs --out PATH for the CSV table")
    export_csv(table, args.out)
    print(f"wrote {len(table)} runs to {args.out} (seed {seed})", file=sys.stderr)
    return EXIT_OK


# parser ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, samples_help: str) -> None:
    p.add_argument("--protocol", help="protocol identifier, e.g. ideal:lambda=0.8, gisin, pcrit:wz=0.7071")
    p.add_argument("--input", help="experiment table CSV (ax,ay,az,bx,by,bz,c0,c1,beta)")
    p.add_argument("--settings", help="'canonical' (default), 'optimized' or a JSON file with a0, a1, b0, b1")
    p.add_argument("-n", "--samples", type=_positive_int, help=samples_help)
    p.add_argument("--seed", type=_seed, help="master seed (64-bit unsigned); random if omitted")
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--no-timestamp", action="store_true", help="omit timestamps so reports are byte-reproducible")
    p.add_argument("--mode", choices=("exact", "monte-carlo"), help="exact statistics or simulated runs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="telecert", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("chsh", help="CHSH value of a protocol or table")
    _common(p, "runs per setting pair when simulating")
    p.set_defaults(func=cmd_chsh)

    p = sub.add_parser("fidelity", help="average post-processing fidelity")
    _common(p, "Monte Carlo samples (exact-map quadrature when omitted)")
    p.set_defaults(func=cmd_fidelity)

    p = sub.add_parser("certify", help="full certification report; exit code is the verdict")
    _common(p, "runs per setting pair / fidelity samples")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("verify-analytics", help="check analytic targets against quadrature and Monte Carlo")
    _common(p, "Monte Carlo samples for the cross-checks (default 1e6)")
    p.add_argument("--tol", type=float, default=1e-8, help="quadrature tolerance")
    p.add_argument("--gisin-branch", choices=BRANCHES, default="continuous", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify_analytics)

    p = sub.add_parser("sweep", help="W_z sweep of the capped protocol (CSV)")
    _common(p, "Monte Carlo samples per point (exact-map when omitted)")
    p.add_argument("--param", default="wz", choices=("wz",))
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--steps", type=_positive_int, required=True, help="number of points, endpoints included")
    p.set_defaults(func=cmd_sweep, format="csv")

    p = sub.add_parser("simulate", help="write a simulated experiment table as CSV")
    _common(p, "runs per setting pair (default 1e4)")
    p.add_argument("--fidelity-inputs", type=int, default=16, help="random Alice inputs measured at the six axis settings")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ActiveCompensationError, CapabilityError, ValueError, LookupError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
