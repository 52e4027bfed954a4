"""Command-line front end.

Every command writes its tables as CSV (17 significant digits), a matplotlib
script that plots them, and ``manifest.json`` holding the fully resolved
argument list. ``toa-outage rerun DIR/manifest.json --out NEW`` regenerates
byte-identical tables.

Exit codes: 0 success, 2 bad arguments, 3 numerical non-convergence,
4 validation property failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import secrets
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .annulus import AnnulusModel
from .montecarlo import (empirical_gdop_ccdf, empirical_speb_ccdf, pilot_u_grid,
                         property_failures, validation_suite, yn_moments_table)
from .outage import gdop_bound_ccdfs, gdop_ccdf, speb_ccdf_approx
from .quadrature import ConvergenceError
from .speb import speb_support_min

EXIT_OK, EXIT_ARGS, EXIT_CONVERGENCE, EXIT_VALIDATION = 0, 2, 3, 4
METHODS = ("mc", "approx", "gdop", "bounds")
CCDF_HEADER = ("speb_times_ts", "mc", "approx", "gdop", "gdop_lower", "gdop_upper")
KS_HEADER = ("n", "d_max", "mc", "approx", "gdop", "gdop_lower", "gdop_upper")
MOMENTS_HEADER = ("n", "mean_yn_analytic", "mean_yn_empirical", "var_yn_empirical",
                  "infeasibility_lhs", "m_opt", "v_opt")

log = logging.getLogger("toa_outage")


class UsageError(Exception):
    pass


# -- argument types -----------------------------------------------------------------

def _count(text: str) -> int:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if value != int(value) or value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return int(value)


def _int_range(text: str) -> list[int]:
    """``3..8`` or ``3,5,7``."""
    try:
        if ".." in text:
            a, b = text.split("..")
            values = list(range(int(a), int(b) + 1))
        else:
            values = [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer range {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return values


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def _methods(text: str) -> list[str]:
    chosen = [m.strip() for m in text.split(",") if m.strip()]
    bad = sorted(set(chosen) - set(METHODS))
    if bad or not chosen:
        raise argparse.ArgumentTypeError(f"methods must be a subset of {','.join(METHODS)}")
    return [m for m in METHODS if m in chosen]


# -- output helpers -----------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


PLOT_TEMPLATE = '''\
import csv
import sys

import matplotlib.pyplot as plt

with open({csv_name!r}) as fh:
    rows = list(csv.reader(fh))
header, data = rows[0], [[float(v) for v in r] for r in rows[1:]]
cols = list(zip(*data))
fig, ax = plt.subplots()
for k, name in enumerate(header[{first}:], start={first}):
    ax.plot(cols[{x_col}], cols[k], {style}label=name)
ax.set_xscale({xscale!r})
ax.set_yscale({yscale!r})
ax.set_xlabel({xlabel!r})
ax.set_ylabel({ylabel!r})
ax.legend()
fig.savefig(sys.argv[1] if len(sys.argv) > 1 else {png!r}, dpi=150)
'''


def write_plot_script(path: Path, csv_name: str, *, x_col: int, first: int, xlabel: str,
                      ylabel: str, xscale="linear", yscale="linear", markers=False) -> None:
    path.write_text(PLOT_TEMPLATE.format(
        csv_name=csv_name, x_col=x_col, first=first, xlabel=xlabel, ylabel=ylabel,
        xscale=xscale, yscale=yscale, style="marker='o', " if markers else "",
        png=Path(csv_name).with_suffix(".png").name), encoding="ascii")


def _resolved_argv(args) -> list[str]:
    """Canonical argument list reproducing this run (``--out`` and ``--threads`` excluded)."""
    argv = [args.command]
    for key, value in sorted(vars(args).items()):
        if key in ("command", "func", "out", "threads", "verbose") or value is None:
            continue
        flag = "--" + key.replace("_", "-")
        if isinstance(value, bool):
            if value:
                argv.append(flag)
            continue
        if isinstance(value, list):
            value = ",".join(_fmt(v) if not isinstance(v, str) else v for v in value)
        elif not isinstance(value, str):
            value = _fmt(value)
        argv += [flag, value]
    return argv


def write_manifest(out: Path, args, started: str, outputs: list[str], extra=None) -> None:
    manifest = {
        "schema": 1,
        "tool": "toa-outage",
        "version": __version__,
        "command": args.command,
        "argv": _resolved_argv(args),
        "parameters": {k: v for k, v in vars(args).items() if k not in ("func", "out")},
        "seed": getattr(args, "seed", None),
        "started": started,
        "finished": _now(),
        "outputs": outputs,
    }
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _model(args, n=None) -> AnnulusModel:
    try:
        return AnnulusModel(args.dmin, args.dmax, args.n if n is None else n, args.ts)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _ensure_seed(args) -> None:
    if getattr(args, "seed", None) is None:
        args.seed = secrets.randbits(63)
        log.info("no --seed given; drew %d", args.seed)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- commands -----------------------------------------------------------------------

def _u_grid(args, model: AnnulusModel) -> np.ndarray:
    given = [args.u_min, args.u_max, args.u_points]
    if all(v is None for v in given):
        return pilot_u_grid(model, args.seed)
    if any(v is None for v in given):
        raise UsageError("--u-min, --u-max and --u-points must be given together")
    if not 0 < args.u_min < args.u_max or args.u_points < 2:
        raise UsageError("need 0 < --u-min < --u-max and --u-points >= 2")
    return np.geomspace(args.u_min, args.u_max, args.u_points)


def cmd_ccdf(args) -> int:
    started = _now()
    _ensure_seed(args)
    model = _model(args)
    u = _u_grid(args, model)
    # The grid is fixed now, so reruns must not depend on the pilot draw again.
    args.u_min, args.u_max, args.u_points = float(u[0]), float(u[-1]), int(u.size)
    u = np.geomspace(args.u_min, args.u_max, args.u_points)
    columns = {}
    if "mc" in args.methods:
        columns["mc"] = empirical_speb_ccdf(model, args.samples, args.seed, u, args.threads).empirical_curve
    if "approx" in args.methods:
        columns["approx"] = speb_ccdf_approx(model, u)
    if "gdop" in args.methods:
        columns["gdop"] = gdop_ccdf(model, u)
    if "bounds" in args.methods:
        columns["gdop_lower"], columns["gdop_upper"] = gdop_bound_ccdfs(model, u)
    header = [h for h in CCDF_HEADER if h == "speb_times_ts" or h in columns]
    rows = zip(model.t_s * u, *(columns[h].values for h in header[1:]))
    out = _outdir(args)
    write_csv(out / "ccdf.csv", header, rows)
    write_plot_script(out / "plot_ccdf.py", "ccdf.csv", x_col=0, first=1,
                      xlabel="T_s * SPEB", ylabel="P(SPEB > u)", xscale="log", yscale="log")
    write_manifest(out, args, started, ["ccdf.csv", "plot_ccdf.py"],
                   {"speb_support_min": speb_support_min(model)})
    return EXIT_OK


def cmd_design(args) -> int:
    if not args.eps_th > 0:
        raise UsageError("--eps-th must be positive")
    if not 0 < args.p_out < 1:
        raise UsageError("--p-out must lie in (0, 1)")
    if args.n_max < 3:
        raise UsageError("--n-max must be at least 3")
    started = _now()
    candidates, chosen = [], None
    for n in range(3, args.n_max + 1):
        model = _model(args, n)
        if speb_support_min(model) >= args.eps_th:
            # Every realisation exceeds the threshold.
            candidates.append({"n": n, "outage_approx": 1.0, "pruned": True})
            continue
        value = float(speb_ccdf_approx(model, [args.eps_th]).values[0])
        candidates.append({"n": n, "outage_approx": value, "pruned": False})
        if value <= args.p_out:
            chosen = n
            break
    report = {"eps_th": args.eps_th, "p_out": args.p_out, "n_max": args.n_max,
              "feasible": chosen is not None, "n": chosen, "candidates": candidates}
    if chosen is not None and args.verify_samples:
        _ensure_seed(args)
        model = _model(args, chosen)
        sim = empirical_speb_ccdf(model, args.verify_samples, args.seed, [args.eps_th], args.threads)
        report["outage_mc"] = float(sim.empirical_curve.values[0])
    text = json.dumps(report, indent=2)
    print(text if chosen is not None else text + f"\ninfeasible up to n_max={args.n_max}")
    if args.out:
        out = _outdir(args)
        (out / "design.json").write_text(text + "\n")
        write_csv(out / "design.csv", ("n", "outage_approx"),
                  [(c["n"], c["outage_approx"]) for c in candidates])
        write_manifest(out, args, started, ["design.json", "design.csv"])
    return EXIT_OK


def cmd_validate(args) -> int:
    started = _now()
    _ensure_seed(args)
    try:
        reports = validation_suite(args.n_range, args.dmax_sweep, args.samples, args.seed,
                                   d_min=args.dmin, t_s=args.ts, threads=args.threads)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = _outdir(args)
    rows = [(r.model.n_anchors, r.model.d_max, *(r[h] for h in KS_HEADER[2:])) for r in reports]
    write_csv(out / "ks.csv", KS_HEADER, rows)
    sweep_n = len(args.dmax_sweep) > 1 and len(args.n_range) == 1
    write_plot_script(out / "plot_ks.py", "ks.csv", x_col=1 if sweep_n else 0, first=3,
                      xlabel="d_max" if sweep_n else "N", ylabel="KS distance to Monte Carlo",
                      markers=True)
    failures = property_failures(reports)
    write_manifest(out, args, started, ["ks.csv", "plot_ks.py"], {"property_failures": failures})
    for msg in failures:
        print(f"FAIL {msg}", file=sys.stderr)
    return EXIT_VALIDATION if failures else EXIT_OK


def cmd_moments(args) -> int:
    started = _now()
    _ensure_seed(args)
    if any(n < 3 for n in args.n_range):
        raise UsageError("N must be at least 3")
    _model(args, 3)
    rows = yn_moments_table(args.n_range, args.dmin, args.dmax, args.samples, args.seed,
                            t_s=args.ts, threads=args.threads)
    out = _outdir(args)
    write_csv(out / "moments.csv", MOMENTS_HEADER, [[r[h] for h in MOMENTS_HEADER] for r in rows])
    write_plot_script(out / "plot_moments.py", "moments.csv", x_col=0, first=4,
                      xlabel="N", ylabel="value", markers=True)
    write_manifest(out, args, started, ["moments.csv", "plot_moments.py"])
    return EXIT_OK


def cmd_rerun(args) -> int:
    try:
        manifest = json.loads(Path(args.manifest).read_text())
        argv = list(manifest["argv"])
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read manifest: {exc}") from None
    return main(argv + ["--out", args.out, "--threads", str(args.threads)])


# -- parser -------------------------------------------------------------------------

def _common(p, *, n=True, dmax=True, seed=True, samples: int | None = 1_000_000):
    if n:
        p.add_argument("--n", type=int, required=True, help="number of anchors (>= 3)")
    p.add_argument("--dmin", type=float, default=1.0, help="inner annulus radius [m]")
    if dmax:
        p.add_argument("--dmax", type=float, default=10.0, help="outer annulus radius [m]")
    p.add_argument("--ts", type=float, default=1.0, help="ranging constant T_s [1/m^2 units]")
    if samples is not None:
        p.add_argument("--samples", type=_count, default=samples, help="Monte Carlo draws")
    if seed:
        p.add_argument("--seed", type=int, default=None,
                       help="random seed; drawn and recorded in the manifest when omitted")
    p.add_argument("--threads", type=int, default=1, help="worker threads (never changes results)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="toa-outage", description="Outage analysis of ToA localisation in annular anchor fields.",
        epilog="Exit codes: 0 ok, 2 bad arguments, 3 non-convergence, 4 validation failure.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ccdf", help="SPEB ccdf curves",
                       description="CSV columns: speb_times_ts, then one per method in the order "
                                   "mc, approx, gdop, gdop_lower, gdop_upper.")
    _common(p)
    p.add_argument("--methods", type=_methods, default=list(METHODS),
                   help="comma-separated subset of mc,approx,gdop,bounds")
    p.add_argument("--u-min", type=float, default=None)
    p.add_argument("--u-max", type=float, default=None)
    p.add_argument("--u-points", type=int, default=None,
                   help="log-spaced SPEB grid; omit all three for a pilot-run grid")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_ccdf)

    p = sub.add_parser("design", help="smallest N meeting an outage target",
                       description="design.csv columns: n, outage_approx.")
    _common(p, n=False, samples=None)
    p.add_argument("--eps-th", type=float, required=True, help="SPEB threshold [m^2]")
    p.add_argument("--p-out", type=float, required=True, help="outage probability target")
    p.add_argument("--n-max", type=int, default=32)
    p.add_argument("--verify-samples", type=_count, default=None,
                   help="confirm the chosen N with this many Monte Carlo draws")
    p.add_argument("--out", default=None, help="optional output directory")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("validate", help="KS distances of every method against Monte Carlo",
                       description="ks.csv columns: " + ", ".join(KS_HEADER) + ".")
    _common(p, n=False, dmax=False)
    p.add_argument("--n-range", type=_int_range, default=list(range(3, 9)), help="e.g. 3..8")
    p.add_argument("--dmax-sweep", type=_float_list, default=[10.0], help="e.g. 2,4,6,8,10")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("moments", help="analytic and empirical Y_N statistics",
                       description="moments.csv columns: " + ", ".join(MOMENTS_HEADER) + ".")
    _common(p, n=False)
    p.add_argument("--n-range", type=_int_range, default=list(range(3, 9)))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("rerun", help="repeat a run from its manifest.json")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_rerun)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", 1) < 1:
        print("toa-outage: --threads must be >= 1", file=sys.stderr)
        return EXIT_ARGS
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"toa-outage: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except ConvergenceError as exc:
        print(f"toa-outage: no convergence in {exc.label}: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
