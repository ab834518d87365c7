"""Command-line entry point: ``levyqw {simulate,oracle,analytic,fit,table,sample}``.

Every CSV gets a ``<path>.manifest.json`` sidecar recording the resolved
arguments (including the seed), so rerunning ``argv`` from the manifest
reproduces the CSV byte for byte.

Exit codes: 0 success, 1 runtime or data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np
from scipy import stats as sps

from . import analysis, engine, oracle, streams, walk, waiting

CSV_HEADER = ["t", "mean_sigma", "rms_sigma", "ensemble_sigma", "count"]
SIGMA_COLUMNS = ("mean_sigma", "rms_sigma", "ensemble_sigma")
DEFAULT_FIT_LO = 10


class DataError(Exception):
    """Bad input data; reported with exit code 1."""


def code_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        from . import __version__

        return __version__


def manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def write_manifest(out: Path, payload: dict) -> None:
    manifest_path(out).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_manifest(out: Path) -> dict | None:
    path = manifest_path(out)
    if not path.exists():
        return None
    return json.loads(path.read_text())


# -- argument helpers -------------------------------------------------------


def parse_window(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(float(x)) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"fit window must look like LO:HI, got {text!r}")
    if not lo < hi:
        raise argparse.ArgumentTypeError(f"fit window needs LO < HI, got {text!r}")
    return lo, hi


def parse_seed(text: str) -> int:
    try:
        return streams.check_seed(int(text, 0))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def resolve_checkpoints(spec: str, t_max: int) -> np.ndarray:
    if spec == "log" or spec.startswith("log:"):
        count = int(spec[4:]) if spec.startswith("log:") else engine.DEFAULT_CHECKPOINTS
        return engine.log_checkpoints(t_max, count)
    if spec == "all":
        return np.arange(1, t_max + 1)
    if spec.startswith("list:"):
        return np.array(sorted({int(x) for x in spec[5:].split(",") if x.strip()}))
    raise ValueError(f"checkpoints must be log, log:N, all or list:T1,T2,..., got {spec!r}")


def build_law(args) -> waiting.WaitingTimeLaw:
    if args.law == "levy":
        if args.alpha is None:
            raise ValueError("--alpha is required with --law levy")
        return waiting.Levy(args.alpha, args.zero_policy)
    if args.law == "fixed":
        if args.period is None:
            raise ValueError("--period is required with --law fixed")
        return waiting.Fixed(args.period)
    return waiting.GaussianBaseline(args.gauss_mean, args.gauss_std)


def law_record(law) -> dict:
    if isinstance(law, waiting.Levy):
        return {"kind": "levy", "alpha": law.alpha, "zero_policy": law.zero_policy}
    if isinstance(law, waiting.Fixed):
        return {"kind": "fixed", "period": law.period}
    return {"kind": "gauss", "mean": law.mean, "stddev": law.stddev}


def law_from_record(rec: dict):
    kind = rec.get("kind")
    if kind == "levy":
        return waiting.Levy(rec["alpha"], rec.get("zero_policy", "clamp"))
    if kind == "fixed":
        return waiting.Fixed(rec["period"])
    if kind == "gauss":
        return waiting.GaussianBaseline(rec["mean"], rec["stddev"])
    return None


def _add_seed(p):
    p.add_argument("--seed", type=parse_seed, default=None,
                   help="unsigned 64-bit master seed (default: drawn from entropy and recorded)")


def _add_run_flags(p):
    p.add_argument("--law", choices=("levy", "fixed", "gauss"), default="levy")
    p.add_argument("--alpha", type=float)
    p.add_argument("--period", type=int)
    p.add_argument("--gauss-mean", type=float, default=10.0)
    p.add_argument("--gauss-std", type=float, default=3.0)
    p.add_argument("--zero-policy", choices=waiting.ZERO_POLICIES, default="clamp",
                   help="what a Levy draw below 1 becomes (default: clamp to T=1)")
    p.add_argument("--theta", type=float, default=walk.DEFAULT_THETA)
    p.add_argument("--trajectories", type=int, default=10000)
    p.add_argument("--t-max", type=int, default=1000)
    p.add_argument("--checkpoints", default="log")
    _add_seed(p)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--block-size", type=int, default=engine.DEFAULT_BLOCK)
    p.add_argument("--fit-window", type=parse_window, default=None)
    p.add_argument("--plot", action="store_true", help="also write a gnuplot script next to the CSV")
    p.add_argument("-o", "--output", type=Path, required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="levyqw", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="full wavefunction Monte Carlo")
    _add_run_flags(p)
    p = sub.add_parser("oracle", help="variance-recurrence ensemble")
    _add_run_flags(p)

    p = sub.add_parser("analytic", help="predicted exponent over an alpha grid")
    p.add_argument("--alpha", type=float, help="single alpha instead of a grid")
    p.add_argument("--alpha-min", type=float, default=0.0)
    p.add_argument("--alpha-max", type=float, default=2.0)
    p.add_argument("--alpha-step", type=float, default=0.1)
    p.add_argument("--horizon", type=float, default=1e4, help="time t of the finite-horizon exponent")
    p.add_argument("--moments", choices=("numeric", "closed"), default="numeric")
    _add_seed(p)
    p.add_argument("-o", "--output", type=Path, required=True)

    p = sub.add_parser("fit", help="fit the power law of a sigma CSV")
    p.add_argument("csv", type=Path)
    p.add_argument("--column", choices=SIGMA_COLUMNS, default="ensemble_sigma")
    p.add_argument("--fit-window", type=parse_window, default=None)
    p.add_argument("--tolerance", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None, help="override the manifest's law")
    p.add_argument("--prediction", choices=("asymptotic", "finite"), default="asymptotic")
    _add_seed(p)

    p = sub.add_parser("table", help="free-walk variances sigma_q^2(T)")
    p.add_argument("--t-max", type=int, required=True)
    p.add_argument("--theta", type=float, default=walk.DEFAULT_THETA)
    _add_seed(p)
    p.add_argument("-o", "--output", type=Path, required=True)

    p = sub.add_parser("sample", help="waiting-time sampler diagnostics")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--n", type=int, default=10**6)
    p.add_argument("--zero-policy", choices=waiting.ZERO_POLICIES, default="clamp")
    _add_seed(p)
    p.add_argument("-o", "--output", type=Path, default=None)
    return parser


# -- commands ---------------------------------------------------------------


def _write_sigma_csv(path: Path, st: engine.EnsembleStats) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for t, ms, rs, es, n in st.rows():
            w.writerow([t, repr(ms), repr(rs), repr(es), n])


def _write_gnuplot(path: Path) -> Path:
    gp = path.with_name(path.name + ".gp")
    gp.write_text(
        "set datafile separator ','\n"
        "set logscale xy\n"
        "set xlabel 't'\nset ylabel 'sigma'\n"
        "set key autotitle columnhead left top\n"
        f"plot '{path.name}' using 1:2 with linespoints, "
        "'' using 1:3 with linespoints, '' using 1:4 with linespoints\n"
    )
    return gp


def _fits(st: engine.EnsembleStats, window) -> dict:
    out = {}
    for col in SIGMA_COLUMNS:
        series = zip(st.time, getattr(st, col))
        try:
            fr = analysis.fit_power_law(series, window)
        except ValueError as exc:
            out[col] = {"error": str(exc)}
            continue
        out[col] = {"c": fr.exponent_c, "stderr": fr.stderr, "r_squared": fr.r_squared,
                    "points": fr.points_used}
    return out


def _resolved_argv(argv: list[str], seed: int) -> list[str]:
    if any(a == "--seed" or a.startswith("--seed=") for a in argv):
        return list(argv)
    return list(argv) + ["--seed", str(seed)]


def cmd_run(args, argv, parser) -> int:
    try:
        law = build_law(args)
        checkpoints = resolve_checkpoints(args.checkpoints, args.t_max)
        seed = args.seed if args.seed is not None else streams.entropy_seed()
        cfg = engine.SimConfig(law, args.theta, walk.SYMMETRIC_QUBIT, args.trajectories,
                               args.t_max, tuple(checkpoints), seed)
        if args.block_size < 1:
            raise ValueError("--block-size must be >= 1")
    except ValueError as exc:
        parser.error(str(exc))
    workers = args.workers or engine.default_workers()
    window = args.fit_window or (DEFAULT_FIT_LO, cfg.t_max)
    started = time.perf_counter()
    if args.command == "simulate":
        st = engine.run_ensemble(cfg, workers=workers, block_size=args.block_size)
    else:
        table = oracle.build_sigma_q_table(cfg.theta, walk.SYMMETRIC_QUBIT, cfg.t_max)
        st = oracle.oracle_ensemble(law, table, cfg.trajectories, cfg.t_max, cfg.checkpoints,
                                    seed, workers=workers, block_size=args.block_size)
    duration = time.perf_counter() - started
    _write_sigma_csv(args.output, st)
    outputs = [str(args.output)]
    if args.plot:
        outputs.append(str(_write_gnuplot(args.output)))
    fits = _fits(st, window)
    write_manifest(args.output, {
        "command": args.command,
        "engine": "mc" if args.command == "simulate" else "oracle",
        "argv": _resolved_argv(argv, seed),
        "config": {
            "law": law_record(law), "theta": cfg.theta,
            "initial_qubit": [[cfg.initial_qubit.left.real, cfg.initial_qubit.left.imag],
                              [cfg.initial_qubit.right.real, cfg.initial_qubit.right.imag]],
            "trajectories": cfg.trajectories, "t_max": cfg.t_max,
            "checkpoints": list(cfg.checkpoints), "master_seed": seed,
            "block_size": args.block_size,
        },
        "workers": workers,
        "version": code_version(),
        "duration_s": duration,
        "outputs": outputs,
        "fit_window": list(window),
        "fits": fits,
    })
    fe = fits["ensemble_sigma"]
    if "c" in fe:
        print(f"c = {fe['c']:.4f} +/- {fe['stderr']:.4f} (ensemble_sigma, window {window[0]}:{window[1]})")
    print(f"wrote {args.output} ({len(st.time)} rows, {duration:.2f} s)")
    return 0


def _alpha_grid(args) -> np.ndarray:
    if args.alpha is not None:
        return np.array([args.alpha])
    if not args.alpha_step > 0:
        raise ValueError("--alpha-step must be positive")
    if args.alpha_max < args.alpha_min:
        raise ValueError("--alpha-max must be >= --alpha-min")
    n = int(math.floor((args.alpha_max - args.alpha_min) / args.alpha_step + 1e-9)) + 1
    return np.round(args.alpha_min + args.alpha_step * np.arange(n), 12)


def cmd_analytic(args, argv, parser) -> int:
    try:
        grid = _alpha_grid(args)
        if np.any((grid < 0) | (grid > 2)):
            raise ValueError("alpha must lie in [0, 2]")
        if not args.horizon > 1:
            raise ValueError("--horizon must be > 1")
    except ValueError as exc:
        parser.error(str(exc))
    seed = args.seed if args.seed is not None else streams.entropy_seed()
    with args.output.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha", "c_asymptotic", "c_finite"])
        for a in grid:
            c_inf = analysis.analytic_exponent_asymptotic(a)
            c_fin = analysis.analytic_exponent_finite(a, args.horizon, args.moments) if a > 0 else math.nan
            w.writerow([repr(float(a)), repr(float(c_inf)), repr(float(c_fin))])
    write_manifest(args.output, {
        "command": "analytic", "engine": "analytic", "argv": _resolved_argv(argv, seed),
        "config": {"horizon": args.horizon, "moments": args.moments, "alphas": grid.tolist(),
                   "master_seed": seed},
        "version": code_version(), "outputs": [str(args.output)],
    })
    print(f"wrote {args.output} ({grid.size} rows)")
    return 0


def read_sigma_csv(path: Path) -> dict[str, np.ndarray]:
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}")
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise DataError(f"{path}: row 1: expected header {','.join(CSV_HEADER)}, got {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                if len(row) != len(CSV_HEADER):
                    raise ValueError(f"expected {len(CSV_HEADER)} fields, got {len(row)}")
                rows.append((int(row[0]), float(row[1]), float(row[2]), float(row[3]), int(row[4])))
            except ValueError as exc:
                raise DataError(f"{path}: row {lineno}: {exc}")
    if not rows:
        raise DataError(f"{path}: no data rows")
    cols = list(zip(*rows))
    return {name: np.array(c) for name, c in zip(CSV_HEADER, cols)}


def cmd_fit(args, argv, parser) -> int:
    data = read_sigma_csv(args.csv)
    manifest = read_manifest(args.csv) or {}
    config = manifest.get("config", {})
    t_max = int(config.get("t_max", data["t"].max()))
    window = args.fit_window or (DEFAULT_FIT_LO, t_max)
    try:
        fr = analysis.fit_power_law(zip(data["t"], data[args.column]), window)
    except ValueError as exc:
        raise DataError(str(exc))
    law = waiting.Levy(args.alpha) if args.alpha is not None else law_from_record(config.get("law", {}))
    if args.prediction == "finite" and isinstance(law, waiting.Levy):
        predicted = analysis.analytic_exponent_finite(law.alpha, t_max)
    else:
        predicted = analysis.predicted_exponent(law, t_max) if law is not None else None
    print(f"exponent_c  {fr.exponent_c:.6f}")
    print(f"stderr      {fr.stderr:.6f}")
    print(f"window      {fr.window[0]}:{fr.window[1]}")
    print(f"r_squared   {fr.r_squared:.6f}")
    print(f"points_used {fr.points_used}")
    if predicted is None:
        print("predicted   n/a")
        if args.tolerance is not None:
            print("no prediction available to compare against", file=sys.stderr)
            return 1
        return 0
    diff = abs(fr.exponent_c - predicted)
    print(f"predicted   {predicted:.6f} ({args.prediction})")
    print(f"difference  {diff:.6f}")
    if args.tolerance is not None and not diff <= args.tolerance:
        print(f"FAIL: |c_fit - c_predicted| = {diff:.4f} exceeds tolerance {args.tolerance}", file=sys.stderr)
        return 1
    return 0


def cmd_table(args, argv, parser) -> int:
    if args.t_max < 1:
        parser.error("--t-max must be >= 1")
    seed = args.seed if args.seed is not None else streams.entropy_seed()
    table = oracle.build_sigma_q_table(args.theta, walk.SYMMETRIC_QUBIT, args.t_max)
    ratio = table.ratio()
    with args.output.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["T", "sigma_q_sq", "ratio"])
        for T in range(table.t_max + 1):
            w.writerow([T, repr(float(table.values[T])), repr(float(ratio[T])) if T else "nan"])
    k = None
    if table.t_max >= 256:
        k_val, k_err = oracle.estimate_k(table)
        k = {"k": k_val, "uncertainty": k_err}
        print(f"k = {k_val:.6f} +/- {k_err:.2e}")
    write_manifest(args.output, {
        "command": "table", "engine": "analytic", "argv": _resolved_argv(argv, seed),
        "config": {"t_max": args.t_max, "theta": args.theta, "master_seed": seed},
        "k": k, "version": code_version(), "outputs": [str(args.output)],
    })
    print(f"wrote {args.output} ({table.t_max + 1} rows)")
    return 0


def cmd_sample(args, argv, parser) -> int:
    try:
        law = waiting.Levy(args.alpha, args.zero_policy)
        if args.n < 1:
            raise ValueError("--n must be >= 1")
    except ValueError as exc:
        parser.error(str(exc))
    seed = args.seed if args.seed is not None else streams.entropy_seed()
    u = streams.uniforms(seed, 0, streams.LANE_WAIT, 0, args.n)
    raw = waiting.levy_inverse_cdf(law.alpha, u)
    ks = sps.kstest(raw, lambda x: waiting.levy_cdf(law.alpha, x))
    print(f"KS distance {ks.statistic:.6f} (p = {ks.pvalue:.3g}, n = {args.n})")
    if args.output is not None:
        T = waiting.interval_block(law, seed, 0, args.n)
        with args.output.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "T"])
            for ti, Ti in zip(raw, T):
                w.writerow([repr(float(ti)), int(Ti)])
        write_manifest(args.output, {
            "command": "sample", "engine": "sampler", "argv": _resolved_argv(argv, seed),
            "config": {"law": law_record(law), "n": args.n, "master_seed": seed},
            "ks_statistic": ks.statistic, "ks_pvalue": ks.pvalue,
            "version": code_version(), "outputs": [str(args.output)],
        })
    return 0


COMMANDS = {
    "simulate": cmd_run,
    "oracle": cmd_run,
    "analytic": cmd_analytic,
    "fit": cmd_fit,
    "table": cmd_table,
    "sample": cmd_sample,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args, argv, parser)
    except (DataError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
