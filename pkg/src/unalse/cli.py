"""Command-line entry point: ``unalse {simulate,estimate,evaluate,summary}``.

Exit codes: 0 success, 2 usage error, 3 unreadable input, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .errors import BundleError, NoAdmissibleSolutionError, NumericError, ParseError
from .io import (
    is_truth_dir,
    read_estimate,
    read_panel,
    read_truth,
    replication_dirs,
    write_estimate,
    write_truth,
)
from .metrics import evaluate
from .pipeline import EstimateOptions, estimate_panel
from .selection import ThresholdConfig
from .simulate import preset, simulate

log = logging.getLogger("unalse")

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_NUMERIC = 0, 2, 3, 4


class _Failure(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("true", "1", "yes"):
        return True
    if v in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {s!r}")


def _bandwidth(s: str):
    if s == "auto":
        return None
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bandwidth must be 'auto' or an integer, got {s!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("bandwidth must be positive")
    return v


def _setting(s: str):
    return s if s == "desk" else int(s)


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get("UNALSE_THREADS", "1")))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="unalse", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="draw replications of a named design")
    sim.add_argument("--scenario", choices=["A", "B", "C"], default="A")
    sim.add_argument("--setting", type=_setting, default="desk", help="1..5 or 'desk'")
    sim.add_argument("--reps", type=int, default=1)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--p", type=int)
    sim.add_argument("--T", type=int)
    sim.add_argument("--threads", type=int, default=_default_threads())
    sim.add_argument("--out", required=True)

    est = sub.add_parser("estimate", help="estimate spectra from a CSV panel or simulated bundles")
    est.add_argument("--input", required=True, help="CSV file, truth bundle, or directory of rep_* bundles")
    est.add_argument("--out", required=True)
    est.add_argument("--delimiter", default=",")
    est.add_argument("--header", action="store_true")
    est.add_argument("--transpose", action="store_true", help="input rows are time points")
    est.add_argument("--kernel", choices=["bartlett", "parzen"], default="bartlett")
    est.add_argument("--bandwidth", type=_bandwidth, default=None, help="'auto' (floor(sqrt(T))) or an integer")
    est.add_argument("--grid", type=int, help="frequency grid h*pi/GRID")
    est.add_argument("--grid-max", type=int, help="largest h on the grid")
    est.add_argument("--demean", type=_bool, default=True)
    est.add_argument("--psi", type=float)
    est.add_argument("--rho", type=float)
    est.add_argument("--auto-select", action="store_true")
    est.add_argument("--r-thr", type=int, default=1)
    est.add_argument("--s-thr", type=float, default=1.0)
    est.add_argument("--n-thr", type=int, default=8)
    est.add_argument("--max-outer", type=int, default=10)
    est.add_argument("--varsigma", type=float, default=0.01)
    est.add_argument("--max-iterations", type=int, default=500)
    est.add_argument("--threads", type=int, default=_default_threads())
    est.add_argument("--seed", type=int)
    est.add_argument("--with-inverse", action="store_true")
    est.add_argument("--strict", action="store_true", help="fail with exit code 4 on non-convergence")

    ev = sub.add_parser("evaluate", help="compare estimate bundles with truth bundles")
    ev.add_argument("--estimates", required=True)
    ev.add_argument("--truth", required=True)
    ev.add_argument("--report", required=True, help="JSON report path")
    ev.add_argument("--csv-dir", help="also write one CSV per metric here")

    sm = sub.add_parser("summary", help="per-frequency CSV of headline quantities of an estimate")
    sm.add_argument("--estimates", required=True)
    sm.add_argument("--out", required=True)
    return ap


def _rep_name(b: int) -> str:
    return f"rep_{b:03d}"


def _simulate_one(args):
    cfg, out = args
    write_truth(simulate(cfg), out)
    return out


def cmd_simulate(args) -> int:
    if args.reps < 1 or args.threads < 1:
        raise _Failure(EXIT_USAGE, "--reps and --threads must be positive")
    overrides = {k: getattr(args, k) for k in ("p", "T") if getattr(args, k) is not None}
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(args.seed).spawn(args.reps)]
    try:
        configs = [preset(args.scenario, args.setting, seed=s, **overrides) for s in seeds]
    except ValueError as exc:
        raise _Failure(EXIT_USAGE, str(exc)) from None
    root = Path(args.out)
    jobs = [(c, root / _rep_name(b)) for b, c in enumerate(configs)]
    if args.threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(args.threads, len(jobs))) as ex:
            list(ex.map(_simulate_one, jobs))
    else:
        for j in jobs:
            _simulate_one(j)
    log.info("wrote %d replication(s) to %s", len(jobs), root)
    return EXIT_OK


def _estimate_options(args, frequencies=None) -> EstimateOptions:
    if (args.psi is None) != (args.rho is None):
        raise _Failure(EXIT_USAGE, "--psi and --rho must be given together")
    if args.psi is not None and args.auto_select:
        raise _Failure(EXIT_USAGE, "--psi/--rho cannot be combined with --auto-select")
    if args.threads < 1:
        raise _Failure(EXIT_USAGE, "--threads must be positive")
    try:
        return EstimateOptions(
            kernel=args.kernel,
            bandwidth=args.bandwidth,
            demean=args.demean,
            grid=args.grid,
            grid_max=args.grid_max,
            frequencies=frequencies,
            psi=args.psi,
            rho=args.rho,
            auto_select=args.auto_select,
            thresholds=ThresholdConfig(args.r_thr, args.s_thr, args.n_thr, args.max_outer),
            varsigma=args.varsigma,
            max_iterations=args.max_iterations,
            with_inverse=args.with_inverse,
            workers=args.threads,
            seed=args.seed,
        )
    except ValueError as exc:
        raise _Failure(EXIT_USAGE, str(exc)) from None


def _run_estimate(panel, out, args, frequencies=None):
    opts = _estimate_options(args, frequencies)
    try:
        bundle = estimate_panel(panel, options=opts)
    except NoAdmissibleSolutionError as exc:
        raise _Failure(EXIT_NUMERIC, str(exc)) from None
    except ValueError as exc:
        raise _Failure(EXIT_USAGE, str(exc)) from None
    bad = [r["h"] for r in bundle.manifest["per_frequency"] if not r["converged"]]
    if bad:
        msg = f"solver did not converge at h={bad}"
        if args.strict:
            raise _Failure(EXIT_NUMERIC, msg)
        log.warning(msg)
    write_estimate(bundle, out)


def cmd_estimate(args) -> int:
    src = Path(args.input)
    out = Path(args.out)
    if src.is_file():
        panel = read_panel(src, delimiter=args.delimiter, header=args.header, transpose=args.transpose)
        _run_estimate(panel, out, args)
        return EXIT_OK
    if not src.exists():
        raise _Failure(EXIT_PARSE, f"no such input: {src}")
    # simulated bundles: default to the frequencies the truth was computed on
    explicit_grid = args.grid is not None or args.grid_max is not None
    reps = replication_dirs(src)
    for d in reps:
        if not is_truth_dir(d):
            raise BundleError(f"{d} is not a truth bundle")
        truth = read_truth(d)
        freqs = None if explicit_grid else tuple(float(f) for f in truth.frequencies)
        target = out if reps == [src] else out / d.name
        _run_estimate(truth.panel, target, args, freqs)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    est_dirs = replication_dirs(args.estimates)
    truth_dirs = replication_dirs(args.truth)
    if len(est_dirs) != len(truth_dirs):
        raise BundleError(f"{len(est_dirs)} estimate bundle(s) but {len(truth_dirs)} truth bundle(s)")
    if len(est_dirs) > 1 and [d.name for d in est_dirs] != [d.name for d in truth_dirs]:
        raise BundleError("estimate and truth directories hold different replications")
    records = []
    frequencies = None
    r_true = None
    for ed, td in zip(est_dirs, truth_dirs):
        bundle, truth = read_estimate(ed), read_truth(td)
        if not np.allclose(bundle.frequencies, truth.frequencies, rtol=0, atol=1e-12):
            raise BundleError(f"{ed} and {td} use different frequency grids")
        frequencies = truth.frequencies
        r_true = int(truth.config["r"])
        m = bundle.matrices
        if "Sigma_tilde" not in m:
            raise BundleError(f"{ed} lacks the smoothed periodogram needed for err_ratio")
        rep = []
        for h, rec in enumerate(bundle.manifest["per_frequency"]):
            rep.append({
                "L_hat": m["L"][h],
                "S_hat": m["S"][h],
                "sigma_hat": m["Sigma"][h],
                "sigma_tilde": m["Sigma_tilde"][h],
                "L_true": truth.L_true[h],
                "S_true": truth.S_true[h],
                "rank": rec["rank"],
                "gamma": rec["rho"] / rec["psi"],
            })
        records.append(rep)
    report = evaluate(records, r_true, frequencies)
    Path(args.report).parent.mkdir(parents=True, exist_ok=True)
    report.to_json(args.report)
    if args.csv_dir:
        report.to_csv(args.csv_dir)
    log.info("rank correct (per-frequency average count): %g of %d", report.rank_correct, report.n_reps)
    return EXIT_OK


def cmd_summary(args) -> int:
    bundle = read_estimate(args.estimates)
    rows = bundle.manifest["per_frequency"]
    k = max((len(r["top_eigenvalues_over_p"]) for r in rows), default=0)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["h", "frequency", "rank", "beta_hat", "zeta_hat", "nonzero_fraction"]
                   + [f"eig{i + 1}_over_p" for i in range(k)])
        for r in rows:
            w.writerow([r["h"], repr(r["frequency"]), r["rank"], repr(r["beta_hat"]),
                        "" if r["zeta_hat"] is None else repr(r["zeta_hat"]), repr(r["nonzero_fraction"])]
                       + [repr(v) for v in r["top_eigenvalues_over_p"]])
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "evaluate": cmd_evaluate,
    "summary": cmd_summary,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except _Failure as exc:
        print(f"unalse: error: {exc}", file=sys.stderr)
        return exc.code
    except (ParseError, BundleError) as exc:
        print(f"unalse: error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except NumericError as exc:
        print(f"unalse: error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
