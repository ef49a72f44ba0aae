"""Command-line interface: ``censim fit | simulate | km``.

Exit codes: 0 on success, 2 on bad input (unreadable file, malformed row,
invalid flag), 3 when estimation fails.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .errors import CensimError
from .estimate import FitConfig, fit
from .simulate import SimulationConfig, calibrate_censoring, run_monte_carlo
from .survival import CensoredSample, StepCdf, km_fit

EXIT_OK, EXIT_INPUT, EXIT_FIT = 0, 2, 3


class DatasetError(ValueError):
    def __init__(self, msg, line=None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


def read_dataset(path) -> CensoredSample:
    """Parse a ``t,delta,x1,...,xd`` CSV file."""
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError("empty file", 1) from None
        d = len(header) - 2
        expected = ["t", "delta"] + [f"x{j}" for j in range(1, d + 1)]
        if d < 0 or header != expected:
            raise DatasetError(f"header must be t,delta,x1,...,xd; got {','.join(header)}", 1)
        t, delta, x = [], [], []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DatasetError(f"expected {len(header)} fields, got {len(row)}", line)
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise DatasetError("non-numeric field", line) from None
            if not math.isfinite(vals[0]):
                raise DatasetError("t must be finite", line)
            if vals[1] not in (0.0, 1.0):
                raise DatasetError(f"delta must be 0 or 1, got {row[1].strip()}", line)
            if not all(math.isfinite(v) for v in vals[2:]):
                raise DatasetError("covariates must be finite", line)
            t.append(vals[0])
            delta.append(vals[1] == 1.0)
            x.append(vals[2:])
    if not t:
        raise DatasetError("no observations")
    return CensoredSample(np.array(t), np.array(delta, dtype=bool), np.array(x).reshape(len(t), d))


def write_dataset(sample: CensoredSample, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "delta"] + [f"x{j}" for j in range(1, sample.d + 1)])
        for i in range(sample.n):
            w.writerow([repr(float(sample.t[i])), int(sample.delta[i])]
                       + [repr(float(v)) for v in sample.x[i]])


def read_step_csv(text: str) -> StepCdf:
    """Inverse of the ``km`` command output."""
    rows = list(csv.reader(text.splitlines()))
    if not rows or [c.strip() for c in rows[0]] != ["time", "cdf"]:
        raise DatasetError("header must be time,cdf", 1)
    data = [(float(a), float(b)) for a, b in rows[1:] if a.strip()]
    return StepCdf([a for a, _ in data], [b for _, b in data])


def _fmt_table_fit(res) -> str:
    lines = [f"method            {res.method}",
             f"observations      {res.n_obs}",
             f"censoring         {res.censoring_fraction:.4f}",
             f"trimmed           {res.trimmed_fraction:.4f}",
             f"converged         {res.converged}",
             "",
             f"{'coef':<8}{'estimate':>20}{'std.err':>20}"]
    se = res.se
    for j, v in enumerate(res.theta_hat.theta):
        s = "(fixed)" if j == 0 else ("nan" if se is None else f"{se[j - 1]:.10g}")
        lines.append(f"theta{j:<3}{v:>20.10g}{s:>20}")
    return "\n".join(lines)


def cmd_fit(args) -> int:
    try:
        sample = read_dataset(args.input)
    except DatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    config = FitConfig(bandwidth_const=args.bandwidth_const, trim_frac=args.trim_frac,
                       seed=args.seed)
    try:
        res = fit(sample, args.method, config)
    except (CensimError, ValueError) as exc:
        print(f"error: fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT
    if args.output == "json":
        print(json.dumps(res.to_dict(), indent=2))
    else:
        print(_fmt_table_fit(res))
    return EXIT_OK


def _n_list(text: str) -> list[int]:
    try:
        ns = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid sample size list {text!r}") from None
    if not ns or min(ns) < 20:
        raise argparse.ArgumentTypeError("sample sizes must be at least 20")
    return ns


def _methods(text: str) -> tuple:
    ms = tuple(m.strip().upper() for m in text.split(",") if m.strip())
    if not ms or any(m not in ("WLS", "SD") for m in ms):
        raise argparse.ArgumentTypeError("methods must be a subset of wls,sd")
    return ms


def format_report_table(reports) -> str:
    """Methods by sample size, one column per report."""
    first = reports[0].config
    law = "U[0, lam]" if first.config_id == 1 else "Exp(rate lam)"
    head = (f"Config {first.config_id}  C ~ {law}  lam={first.censoring_param:.6g}  "
            f"reps={first.replications}  seed={first.seed}")
    cols = [f"n={r.config.n}" for r in reports]
    width = 14
    out = [head, f"{'':<12}" + "".join(f"{c:>{width}}" for c in cols)]
    for m in first.methods:
        out.append(f"{'MSE ' + m:<12}" + "".join(f"{r[m].mse:>{width}.4e}" for r in reports))
        out.append(f"{'  s.e.':<12}" + "".join(f"{r[m].mse_se:>{width}.4e}" for r in reports))
        out.append(f"{'  median':<12}" + "".join(f"{r[m].median_error:>{width}.4e}" for r in reports))
        out.append(f"{'  failures':<12}" + "".join(f"{r[m].failures:>{width}d}" for r in reports))
    out.append(f"{'censored':<12}"
               + "".join(f"{r.summaries[0].mean_censoring:>{width}.4f}" for r in reports))
    out.append(f"{'trimmed':<12}"
               + "".join(f"{r.summaries[0].mean_trimmed:>{width}.4f}" for r in reports))
    return "\n".join(out)


def cmd_simulate(args) -> int:
    if args.cens_param is not None:
        lam = args.cens_param
    else:
        try:
            lam = calibrate_censoring(args.config, args.cens_target, seed=args.seed)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
    try:
        configs = [SimulationConfig(args.config, lam, n=n, replications=args.reps,
                                    seed=args.seed, methods=args.methods,
                                    bandwidth_const=args.bandwidth_const,
                                    trim_frac=args.trim_frac)
                   for n in args.n]
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    reports = [run_monte_carlo(c, workers=args.workers) for c in configs]
    if args.output == "json":
        print(json.dumps([r.to_dict() for r in reports], indent=2))
    else:
        print(format_report_table(reports))
    return EXIT_OK


def cmd_km(args) -> int:
    try:
        sample = read_dataset(args.input)
    except DatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    curve = km_fit(sample, args.target)
    if curve.jump_times.size == 0:
        kind = "uncensored" if args.target == "event" else "censored"
        print(f"warning: no {kind} observations; empty jump list", file=sys.stderr)
    print("time,cdf")
    for t, f in zip(curve.jump_times, curve.cum_mass):
        print(f"{float(t)!r},{float(f)!r}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="censim", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="estimate the index direction from a CSV file")
    f.add_argument("--input", required=True)
    f.add_argument("--method", type=str.lower, choices=["wls", "sd"], default="wls")
    f.add_argument("--bandwidth-const", type=float, default=1.0)
    f.add_argument("--trim-frac", type=float, default=0.1)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--output", choices=["json", "table"], default="json")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", help="Monte Carlo MSE study")
    s.add_argument("--config", type=int, choices=[1, 2, 3], required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--cens-param", type=float)
    g.add_argument("--cens-target", type=float)
    s.add_argument("--n", type=_n_list, default=[100])
    s.add_argument("--reps", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--methods", type=_methods, default=("WLS", "SD"))
    s.add_argument("--bandwidth-const", type=float, default=1.0)
    s.add_argument("--trim-frac", type=float, default=0.1)
    s.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: $CENSIM_THREADS or 1)")
    s.add_argument("--output", choices=["json", "table"], default="table")
    s.set_defaults(func=cmd_simulate)

    k = sub.add_parser("km", help="product-limit curve as CSV")
    k.add_argument("--input", required=True)
    k.add_argument("--target", choices=["event", "censoring"], default="event")
    k.add_argument("--output", choices=["csv"], default="csv")
    k.set_defaults(func=cmd_km)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
