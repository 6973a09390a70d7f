"""Command-line entry point: CSV analysis, simulation, and decision-model runs.

Every analysis writes a resolved config echo and a JSON manifest recording
bandwidths, critical values, and warnings, so a run can be reproduced from
its output directory alone. Outputs are a deterministic function of the
input bytes, the configuration, and the seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (
    CutoffPair,
    DIRECTION_DECREASING,
    DIRECTION_INCREASING,
    constant_bias_extrapolation,
    curve_from_parts,
    dominance_diagnostic,
    select_sharp_plan,
    sharp_parts,
    fit_local_quadratic,
)
from .data import RdData
from .decision import (
    DecisionModelSpec,
    PeriodicSineDensity,
    example1_spec,
    example2_spec,
    gaussian_noise,
    regression_curves,
    triangular_noise,
    uniform_noise,
)
from .errors import IngestError, RdExtrapError
from .fuzzy import P_MIN_DEFAULT, curve_from_fuzzy_parts, fuzzy_parts, select_fuzzy_plan
from .inference import (
    _band_from_fuzzy_parts,
    _band_from_sharp_parts,
    band_grid,
)
from .kernels import FAMILIES, KernelSpec
from .simulation import SimulationConfig, run_monte_carlo
from .validation import check_cutoffs, match_cutoff_labels, one_sided_violations


def ingest_csv(path, mapping, cutoffs, derive_d=False):
    """Parse a CSV into RdData.

    ``mapping`` holds the column names for y, x, c and optionally d. Rows
    with non-finite y or x are dropped and reported by line number;
    unparseable rows and unknown cutoff labels are errors.
    """
    path = Path(path)
    if not path.exists():
        raise IngestError(f"input file {path} does not exist")
    cutoffs = check_cutoffs(cutoffs)
    y_col, x_col, c_col = mapping["y"], mapping["x"], mapping["c"]
    d_col = mapping.get("d")

    ys, xs, cs, ds, line_nos, rejected = [], [], [], [], [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        needed = [y_col, x_col, c_col] + ([d_col] if d_col and not derive_d else [])
        missing = [name for name in needed if name not in header]
        if missing:
            raise IngestError(f"missing columns {missing} in header {header}")
        has_d = d_col is not None and d_col in header
        for line_no, row in enumerate(reader, start=2):
            try:
                y = float(row[y_col])
                x = float(row[x_col])
                c = float(row[c_col])
                d = float(row[d_col]) if has_d else None
            except (TypeError, ValueError) as exc:
                raise IngestError(f"unparseable row: {exc}", lines=[line_no]) from exc
            if not (math.isfinite(y) and math.isfinite(x) and math.isfinite(c)):
                rejected.append(line_no)
                continue
            if d is not None and d not in (0.0, 1.0):
                raise IngestError("treatment indicator must be 0 or 1", lines=[line_no])
            ys.append(y); xs.append(x); cs.append(c); ds.append(d); line_nos.append(line_no)

    if not ys:
        raise IngestError("no usable rows in input", lines=rejected)
    c_arr = np.asarray(cs, dtype=float)
    snapped, unmatched = match_cutoff_labels(c_arr, cutoffs)
    if unmatched.size:
        lines = [line_nos[i] for i in unmatched[:20]]
        raise IngestError("cutoff labels do not match configured cutoffs", lines=lines)
    x_arr = np.asarray(xs, dtype=float)
    if has_d:
        d_arr = np.asarray(ds, dtype=float).astype(np.int8)
    else:
        d_arr = (x_arr >= snapped).astype(np.int8)
    data = RdData(y=np.asarray(ys, dtype=float), x=x_arr, c=snapped, d=d_arr)
    return data, rejected, line_nos


def _parse_pair(text, name):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"{name} must be 'lo,hi'") from exc
    return lo, hi


def _read_config_file(path):
    values = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise IngestError(f"config line without '=': {line!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _write_csv(path, header, rows):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(value):
    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return ""
    return repr(float(value))


class _OutputSet:
    """Tracks written files so failures leave no partial outputs behind."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.written = []

    def path(self, name):
        p = self.out_dir / name
        self.written.append(p)
        return p

    def cleanup(self):
        for p in self.written:
            try:
                p.unlink(missing_ok=True)
            except OSError:
                pass


def run_analysis(args) -> int:
    """Sharp or fuzzy bounds analysis on a CSV; artifacts land in --out."""
    t0 = time.perf_counter()
    file_conf = _read_config_file(args.config) if args.config else {}

    def conf(key, cli_value, cast, default=None):
        if cli_value is not None:
            return cli_value
        if key in file_conf:
            return cast(file_conf[key])
        return default

    design = conf("design", args.design, str, "sharp")
    kernel_name = conf("kernel", args.kernel, str, "triangular")
    direction = conf("direction", args.direction, str, "increasing")
    alpha = conf("alpha", args.alpha, float, 0.05)
    n_boot = conf("bootstrap", args.bootstrap, int, 1000)
    seed = conf("seed", args.seed, int, 0)
    grid_size = conf("grid", args.grid, int, 50)
    p_min = conf("p_min", args.p_min, float, P_MIN_DEFAULT)
    cutoff_text = conf("cutoffs", args.cutoffs, str)
    if cutoff_text is None:
        raise IngestError("cutoffs are required (--cutoffs l,h,...)")
    cutoffs = check_cutoffs([float(v) for v in str(cutoff_text).split(",")])
    interval = conf(
        "interval",
        tuple(args.interval) if args.interval else None,
        lambda s: _parse_pair(s, "interval"),
    )
    mapping = {
        "y": conf("col_y", args.col_y, str, "y"),
        "x": conf("col_x", args.col_x, str, "x"),
        "c": conf("col_c", args.col_c, str, "c"),
        "d": conf("col_d", args.col_d, str, "d"),
    }
    bw_mode = conf("bw_mode", args.bw_mode, str, "auto")
    overrides = {}
    if bw_mode == "manual":
        overrides = {
            "b_1l": conf("bw_1l", args.bw_1l, float),
            "b_0h": conf("bw_0h", args.bw_0h, float),
            "b_0l": conf("bw_0l", args.bw_0l, float),
        }

    direction_full = (
        DIRECTION_DECREASING if direction.startswith("decr") else DIRECTION_INCREASING
    )
    kernel = KernelSpec(kernel_name)
    pair = CutoffPair(float(cutoffs[0]), float(cutoffs[-1]))
    if interval is None:
        width = pair.h - pair.l
        interval = (pair.l + 0.05 * width, pair.h - 0.05 * width)
    grid = band_grid(interval, grid_size)

    data, rejected, line_nos = ingest_csv(
        args.input, mapping, cutoffs, derive_d=(design == "sharp")
    )
    warnings_list = [f"dropped non-finite row at line {i}" for i in rejected]

    if design == "fuzzy":
        bad = one_sided_violations(data)
        if bad.size:
            raise IngestError(
                "one-sided compliance violated: treated rows below their cutoff",
                lines=[line_nos[i] for i in bad[:20]],
            )

    if design == "sharp":
        plan = select_sharp_plan(data, pair, interval, kernel, **overrides)
        parts = sharp_parts(data, pair, grid, plan, kernel)
        curve = curve_from_parts(parts, direction_full)
        mu_0h_at_l = fit_local_quadratic(parts.sub_0h, pair.l, plan.b_0h, kernel)
        curve = curve.with_cb(parts.contrast_down + (mu_0h_at_l - parts.mu_0l_at_l))
        band = _band_from_sharp_parts(parts, n_boot, alpha, seed, direction_full)
        diag = dominance_diagnostic(data, pair, plan, kernel)
        p_hat = None
    else:
        plan = select_fuzzy_plan(data, pair, interval, kernel, **overrides)
        parts = fuzzy_parts(data, pair, grid, plan, kernel, p_min)
        curve = curve_from_fuzzy_parts(parts)
        band = _band_from_fuzzy_parts(parts, n_boot, alpha, seed)
        diag = None
        p_hat = curve.p_hat
    curve = curve.with_band(band.lo, band.hi)

    crossings = [float(x) for x in curve.grid[curve.crossed]]
    if crossings:
        warnings_list.append(
            f"lower estimate above upper at {len(crossings)} grid points (kept as is)"
        )

    outputs = _OutputSet(args.out)
    try:
        header = ["x", "lower", "upper", "var_lower", "var_upper",
                  "cb_point", "band_lo", "band_hi"]
        if p_hat is not None:
            header.append("p_hat")
        cb_point = getattr(curve, "cb_point", None)
        rows = []
        for i, x in enumerate(curve.grid):
            row = [
                _fmt(x), _fmt(curve.lower[i]), _fmt(curve.upper[i]),
                _fmt(curve.var_lower[i]), _fmt(curve.var_upper[i]),
                _fmt(cb_point[i]) if cb_point is not None else "",
                _fmt(curve.band_lo[i]), _fmt(curve.band_hi[i]),
            ]
            if p_hat is not None:
                row.append(_fmt(p_hat[i]))
            rows.append(row)
        _write_csv(outputs.path("bounds.csv"), header, rows)

        _write_csv(
            outputs.path("band.csv"),
            ["x", "band_lo", "band_hi"],
            [[_fmt(x), _fmt(lo), _fmt(hi)] for x, lo, hi in zip(band.grid, band.lo, band.hi)],
        )

        series = {"lower": curve.lower, "upper": curve.upper,
                  "band_lo": curve.band_lo, "band_hi": curve.band_hi}
        if curve.cb_point is not None:
            series["cb"] = curve.cb_point
        long_rows = [
            [_fmt(x), name, _fmt(vals[i])]
            for name, vals in series.items()
            for i, x in enumerate(curve.grid)
        ]
        _write_csv(outputs.path("plot.csv"), ["x", "series", "value"], long_rows)

        resolved = {
            "command": "bounds", "input": str(args.input), "design": design,
            "kernel": kernel_name, "direction": direction_full,
            "cutoffs": [float(v) for v in cutoffs],
            "interval": [float(interval[0]), float(interval[1])],
            "grid": int(grid_size), "alpha": float(alpha), "bootstrap": int(n_boot),
            "seed": int(seed), "bw_mode": bw_mode, "p_min": float(p_min),
            "columns": mapping,
        }
        echo_path = outputs.path("config_echo.txt")
        echo_path.write_text(
            "".join(f"{k}={json.dumps(v) if isinstance(v, (list, dict)) else v}\n"
                    for k, v in resolved.items()),
            encoding="utf-8",
        )

        manifest = {
            "config": resolved,
            "n_rows": int(len(data)),
            "bandwidths": {"b_1l": plan.b_1l, "b_0h": plan.b_0h, "b_0l": plan.b_0l},
            "crit_values": {"lower": band.crit_lower, "upper": band.crit_upper},
            "bootstrap_discarded": int(band.n_discarded),
            "bound_crossings": crossings,
            "warnings": warnings_list,
            "dominance": (
                {"statistic": diag.statistic, "std_error": diag.std_error, "flag": diag.flag}
                if diag is not None else None
            ),
            "wall_time_s": time.perf_counter() - t0,
            "version": __version__,
        }
        outputs.path("manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    except BaseException:
        outputs.cleanup()
        raise
    return 0


def run_simulate(args) -> int:
    config = SimulationConfig(
        design=args.design,
        n_per_group=args.n,
        reps=args.reps,
        bootstrap_m=args.bootstrap,
        alpha=args.alpha,
        seed=args.seed,
        kernel=args.kernel or "triangular",
    )
    if args.full:
        config = SimulationConfig(
            design=args.design, n_per_group=args.n, reps=1000, bootstrap_m=1000,
            alpha=args.alpha, seed=args.seed, kernel=args.kernel or "triangular",
        )
    report = run_monte_carlo(config, n_jobs=args.jobs)
    print(report.format_table())

    outputs = _OutputSet(args.out)
    try:
        frame = report.to_frame()
        frame.to_csv(outputs.path("report.csv"), index=False)
        manifest = {
            "config": {
                "design": config.design, "n_per_group": config.n_per_group,
                "reps": config.reps, "bootstrap_m": config.bootstrap_m,
                "alpha": config.alpha, "seed": config.seed, "kernel": config.kernel,
                "eval_points": list(config.eval_points),
            },
            "completed": report.n_completed,
            "failed": report.n_failed,
            "failures": list(report.failures),
            "wall_time_s": report.wall_time,
            "version": __version__,
        }
        outputs.path("manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    except BaseException:
        outputs.cleanup()
        raise
    return 0


def _custom_spec(args) -> DecisionModelSpec:
    noises = {
        "triangular": triangular_noise,
        "uniform": lambda: uniform_noise(4.0),
        "gaussian": gaussian_noise,
        "sine": lambda: PeriodicSineDensity(period=args.cutoffs[1] - args.cutoffs[0]),
    }
    base = example1_spec()
    from dataclasses import replace as _replace
    from scipy import stats as _stats

    lo, width = args.ability[0], args.ability[1] - args.ability[0]
    return _replace(
        base,
        noise=noises[args.noise](),
        ability=_stats.uniform(loc=lo, scale=width),
        cutoffs=(float(args.cutoffs[0]), float(args.cutoffs[1])),
        tau_belief=args.tau_belief,
        gamma=args.gamma,
        beta=args.beta,
        manipulable=not args.non_manipulable,
        closed_form=None,
    )


def run_decision_model(args) -> int:
    if args.example == "1":
        spec = example1_spec()
    elif args.example == "2":
        spec = example2_spec()
    else:
        spec = _custom_spec(args)
    l, h = spec.cutoffs
    grid = np.linspace(l, h, args.grid)
    curves = regression_curves(spec, grid, n_agents=args.agents, seed=args.seed)

    outputs = _OutputSet(args.out)
    try:
        _write_csv(
            outputs.path("curves.csv"),
            ["x", "curve_low", "se_low", "curve_high", "se_high", "gap", "gap_se"],
            [
                [_fmt(x), _fmt(curves.curve_low[i]), _fmt(curves.se_low[i]),
                 _fmt(curves.curve_high[i]), _fmt(curves.se_high[i]),
                 _fmt(curves.gap[i]), _fmt(curves.gap_se[i])]
                for i, x in enumerate(grid)
            ],
        )
        manifest = {
            "command": "decision-model", "example": args.example,
            "agents": int(args.agents), "seed": int(args.seed),
            "bandwidth": curves.bandwidth, "cutoffs": [float(l), float(h)],
            "version": __version__,
        }
        outputs.path("manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    except BaseException:
        outputs.cleanup()
        raise
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rdextrap",
        description="Bounds on extrapolated treatment effects in multi-cutoff RD designs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bounds", help="estimate bound curves and a uniform band from a CSV")
    b.add_argument("--input", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--config", default=None, help="flat key=value file; flags override")
    b.add_argument("--design", choices=("sharp", "fuzzy"), default=None)
    b.add_argument("--cutoffs", default=None, help="comma-separated, strictly increasing")
    b.add_argument("--direction", choices=("increasing", "decreasing"), default=None)
    b.add_argument("--interval", type=lambda s: _parse_pair(s, "interval"), default=None)
    b.add_argument("--grid", type=int, default=None)
    b.add_argument("--alpha", type=float, default=None)
    b.add_argument("--bootstrap", type=int, default=None, metavar="M")
    b.add_argument("--seed", type=int, default=None)
    b.add_argument("--kernel", choices=FAMILIES, default=None)
    b.add_argument("--bw-mode", choices=("auto", "manual"), default=None)
    b.add_argument("--bw-1l", type=float, default=None)
    b.add_argument("--bw-0h", type=float, default=None)
    b.add_argument("--bw-0l", type=float, default=None)
    b.add_argument("--p-min", type=float, default=None)
    b.add_argument("--col-y", default=None)
    b.add_argument("--col-x", default=None)
    b.add_argument("--col-c", default=None)
    b.add_argument("--col-d", default=None)
    b.set_defaults(func=run_analysis)

    s = sub.add_parser("simulate", help="run the Monte Carlo coverage study")
    s.add_argument("--design", choices=("sharp", "fuzzy"), default="sharp")
    s.add_argument("--n", type=int, default=500)
    s.add_argument("--reps", type=int, default=200)
    s.add_argument("--bootstrap", type=int, default=500, metavar="M")
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--kernel", choices=FAMILIES, default=None)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", required=True)
    s.add_argument("--full", action="store_true",
                   help="paper-scale run: 1000 reps, 1000 bootstrap replications")
    s.set_defaults(func=run_simulate)

    d = sub.add_parser("decision-model", help="simulate agent behavior and group curves")
    d.add_argument("--example", choices=("1", "2", "custom"), default="1")
    d.add_argument("--agents", type=int, default=100_000)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--grid", type=int, default=41)
    d.add_argument("--out", required=True)
    d.add_argument("--noise", choices=("triangular", "uniform", "gaussian", "sine"),
                   default="triangular")
    d.add_argument("--cutoffs", type=lambda s: _parse_pair(s, "cutoffs"), default=(2.0, 3.0))
    d.add_argument("--ability", type=lambda s: _parse_pair(s, "ability"), default=(0.0, 1.0))
    d.add_argument("--tau-belief", type=float, default=1.0)
    d.add_argument("--gamma", type=float, default=0.0)
    d.add_argument("--beta", type=float, default=1.0)
    d.add_argument("--non-manipulable", action="store_true")
    d.set_defaults(func=run_decision_model)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RdExtrapError as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        if hasattr(exc, "lines") and exc.lines:
            payload["lines"] = list(exc.lines)
        print(json.dumps(payload), file=sys.stderr)
        return 1
    except ValueError as exc:
        print(json.dumps({"error": "ValueError", "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
