"""Command line interface.

One executable with reproducible subcommands: width, solve, sweep, regions,
orthants, concentration, and slope.  Every run embeds its resolved
configuration and master seed as `#` comment lines in the output, writes
results atomically (temp file plus rename), and exits 0 on success, 1 on a
usage error, and 2 on a numeric or domain error.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import List, Optional, Sequence

import numpy as np

from . import configio, harness
from .ensembles import (
    build_mixing,
    load_matrix_csv,
    load_vector_csv,
    stable_rank,
)
from .geometry import (
    WHICH_DIFFERENCE,
    WHICH_SET,
    count_orthants,
    orthant_count_bound,
    width_mc,
)
from .seeding import derive_rng
from .solvers import solve_lasso
from .structures import (
    Subspace,
    build_structure,
    enumerate_regions,
    load_network,
    ReluNetwork,
)

SUBCOMMANDS = ("width", "solve", "sweep", "regions", "orthants",
               "concentration", "slope")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems with exit code 1."""

    def error(self, message):
        raise UsageError(message)


def _atomic_write(path: str, text: str) -> None:
    tmp = str(path) + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _comment_block(subcommand: str, seed, lines: Sequence[str]) -> List[str]:
    out = [f"# mixlasso {subcommand}"]
    if seed is not None:
        out.append(f"# seed = {seed}")
    out.extend(f"# {line}" for line in lines)
    return out


def _csv_text(comments: Sequence[str], header: str,
              rows: Sequence[str]) -> str:
    return "\n".join([*comments, header, *rows]) + "\n"


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def _resolve_seed(parser, section: str, args) -> int:
    if args.seed is not None:
        return args.seed
    sec = configio.section_items(parser, section)
    if "seed" in sec:
        return int(sec["seed"])
    raise UsageError(f"no seed given: pass --seed or set [{section}] seed")


def _cmd_width(args) -> int:
    parser = configio.read_config(args.config)
    base = os.path.dirname(os.path.abspath(args.config))
    spec = configio.structure_from_config(parser, base)
    sec = configio.section_items(parser, "width")
    which = sec.get("which", "difference").strip().lower()
    if which not in (WHICH_SET, WHICH_DIFFERENCE):
        raise UsageError(f"[width] which must be set or difference, got {which!r}")
    num = int(sec.get("num_gaussians", "2000"))
    seed = _resolve_seed(parser, "width", args)
    structure = build_structure(spec)
    est = width_mc(structure, which, num, derive_rng(seed, "width"))
    comments = _comment_block("width", seed, [
        f"structure = {structure.describe()}",
        f"which = {which}",
        f"num_gaussians = {num}",
    ])
    row = ",".join([structure.describe(), which, _fmt(est.mean),
                    _fmt(est.stderr), str(est.num_gaussians), est.sup_solver])
    _atomic_write(args.out, _csv_text(
        comments, "structure,which,mean,stderr,num_gaussians,sup_solver",
        [row]))
    return 0


def _cmd_solve(args) -> int:
    parser = configio.read_config(args.config)
    base = os.path.dirname(os.path.abspath(args.config))
    spec = configio.structure_from_config(parser, base)
    sec = configio.section_items(parser, "solve")
    if "y" not in sec:
        raise UsageError("[solve] needs a y = <csv path> entry")
    y = load_vector_csv(os.path.join(base, sec["y"]))
    if "m" in sec:
        mat = load_matrix_csv(os.path.join(base, sec["m"]))
    elif "b" in sec and "a" in sec:
        mat = load_matrix_csv(os.path.join(base, sec["b"])) @ \
            load_matrix_csv(os.path.join(base, sec["a"]))
    else:
        raise UsageError("[solve] needs m = <path> or b = <path> and a = <path>")
    structure = build_structure(spec)
    report = solve_lasso(y, mat, structure)
    xhat_path = os.path.splitext(str(args.out))[0] + ".xhat.csv"
    comments = _comment_block("solve", args.seed, [
        f"structure = {structure.describe()}",
        f"measurements = {mat.shape[0]}x{mat.shape[1]}",
        f"xhat = {os.path.basename(xhat_path)}",
    ])
    row = ",".join([
        _fmt(report.objective), _fmt(report.eps_upper),
        "1" if report.eps_certified else "0", str(report.iterations),
        "1" if report.converged else "0", report.strategy,
    ])
    _atomic_write(args.out, _csv_text(
        comments,
        "objective,eps_upper,eps_certified,iterations,converged,strategy",
        [row]))
    _atomic_write(xhat_path,
                  ",".join(f"{v:.17g}" for v in report.xhat) + "\n")
    return 0


def _cmd_sweep(args) -> int:
    parser = configio.read_config(args.config)
    base = os.path.dirname(os.path.abspath(args.config))
    config = configio.experiment_from_config(parser, base,
                                             seed_override=args.seed)
    comments = [f"mixlasso sweep", f"seed = {config.master_seed}"]
    comments += configio.describe_experiment(config)
    rows = harness.sweep(config, args.out, threads=args.threads,
                         resume=args.resume, timing=args.timing,
                         header_lines=comments)
    expected = len(harness.sweep_grid(config)) * config.trials
    if rows != expected:
        raise ValueError(f"wrote {rows} rows, expected {expected}")
    if args.plot:
        _plot_sweep(config, args.out, args.plot)
    return 0


def _plot_sweep(config, csv_path: str, plot_path: str) -> None:
    from . import plotting

    axis = config.axes[0][0]
    rows = harness.read_csv_rows(csv_path)
    groups = {}
    for row in rows:
        point = dict(part.split("=") for part in row["axis_point"].split(";"))
        x = float(point[axis])
        groups.setdefault(x, []).append(float(row["recovery_error"]))
    plotting.save_sweep_medians(groups, plot_path, axis, "recovery_error")


def _cmd_regions(args) -> int:
    parser = configio.read_config(args.config)
    base = os.path.dirname(os.path.abspath(args.config))
    sec = configio.section_items(parser, "network")
    if "path" in sec:
        network = load_network(os.path.join(base, sec["path"]))
        seed = args.seed
    else:
        if "layer_dims" not in sec:
            raise UsageError("[network] needs path or layer_dims")
        dims = [int(t) for t in sec["layer_dims"].replace(",", " ").split()]
        seed = _resolve_seed(parser, "network", args)
        network = ReluNetwork.random(dims, seed,
                                     leak=float(sec.get("leak", "0")))
    regions = enumerate_regions(network)
    comments = _comment_block("regions", seed, [
        f"network = {network.describe()}",
        f"count = {len(regions)}",
    ])
    rows = [f"{r.pattern_string()},{r.dim}" for r in regions]
    _atomic_write(args.out, _csv_text(comments, "pattern,dim", rows))
    return 0


def _cmd_orthants(args) -> int:
    parser = configio.read_config(args.config)
    sec = configio.section_items(parser, "orthants")
    if "n" not in sec or "k" not in sec:
        raise UsageError("[orthants] needs n and k")
    n, k = int(sec["n"]), int(sec["k"])
    mode = sec.get("mode", "exhaustive").strip().lower()
    seed = _resolve_seed(parser, "orthants", args)
    basis = Subspace.random(n, k, derive_rng(seed, "orthants")).basis
    count = count_orthants(basis, mode=mode)
    bound = orthant_count_bound(n, k)
    comments = _comment_block("orthants", seed, [
        f"n = {n}", f"k = {k}", f"mode = {mode}",
    ])
    _atomic_write(args.out, _csv_text(
        comments, "n,k,mode,count,bound",
        [f"{n},{k},{mode},{count},{bound}"]))
    return 0


def _cmd_concentration(args) -> int:
    parser = configio.read_config(args.config)
    base = os.path.dirname(os.path.abspath(args.config))
    mixing = build_mixing(configio.mixing_from_config(parser, base))
    row_dist = configio.rows_from_config(parser)
    structure = build_structure(configio.structure_from_config(parser, base))
    sec = configio.section_items(parser, "concentration")
    directions = int(sec.get("num_directions", "1"))
    trials = int(sec.get("trials", "200"))
    seed = _resolve_seed(parser, "concentration", args)
    report = harness.verify_concentration(
        mixing, row_dist, structure, directions, trials,
        derive_rng(seed, "concentration"))
    comments = _comment_block("concentration", seed, [
        f"mixing.sr = {_fmt(stable_rank(mixing))}",
        f"rows = {row_dist.describe()}",
        f"structure = {structure.describe()}",
        f"num_directions = {directions}",
        f"trials = {trials}",
    ])
    row = ",".join([
        _fmt(report.ratio_min), _fmt(report.ratio_q25),
        _fmt(report.ratio_median), _fmt(report.ratio_q75),
        _fmt(report.ratio_max), _fmt(report.frac_within_10),
        _fmt(report.frac_within_30), str(report.num_ratios),
    ])
    _atomic_write(args.out, _csv_text(
        comments,
        "ratio_min,ratio_q25,ratio_median,ratio_q75,ratio_max,"
        "frac_within_10,frac_within_30,num_ratios", [row]))
    return 0


def _cmd_slope(args) -> int:
    parser = configio.read_config(args.config)
    sec = configio.section_items(parser, "slope")
    for key in ("input", "x_col", "y_col"):
        if key not in sec:
            raise UsageError(f"[slope] needs {key}")
    # the input is a result file, resolved against the working directory
    input_path = sec["input"]
    slope, stderr = harness.fit_slope(input_path, sec["x_col"], sec["y_col"])
    comments = _comment_block("slope", args.seed, [
        f"input = {sec['input']}",
        f"x_col = {sec['x_col']}",
        f"y_col = {sec['y_col']}",
    ])
    _atomic_write(args.out, _csv_text(
        comments, "x_col,y_col,slope,stderr",
        [f"{sec['x_col']},{sec['y_col']},{_fmt(slope)},{_fmt(stderr)}"]))
    if args.plot:
        _plot_slope(input_path, sec["x_col"], sec["y_col"], slope, args.plot)
    return 0


def _plot_slope(input_path, x_col, y_col, slope, plot_path) -> None:
    from . import plotting

    rows = harness.read_csv_rows(input_path)
    groups = {}
    for row in rows:
        groups.setdefault(float(row[x_col]), []).append(float(row[y_col]))
    xs = sorted(groups)
    meds = [float(np.median(groups[x])) for x in xs]
    plotting.save_loglog_fit(xs, meds, slope, meds[0], plot_path,
                             x_col, y_col)


_HANDLERS = {
    "width": _cmd_width,
    "solve": _cmd_solve,
    "sweep": _cmd_sweep,
    "regions": _cmd_regions,
    "orthants": _cmd_orthants,
    "concentration": _cmd_concentration,
    "slope": _cmd_slope,
}


def build_parser() -> _Parser:
    parser = _Parser(prog="mixlasso",
                     description="structured recovery experiments")
    sub = parser.add_subparsers(dest="subcommand")
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="INI config path")
        p.add_argument("--out", required=True, help="output CSV path")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed override (nonnegative)")
        p.add_argument("--threads", type=int, default=1,
                       help="worker pool size (sweep)")
        p.add_argument("--resume", action="store_true",
                       help="resume a partial sweep")
        p.add_argument("--timing", action="store_true",
                       help="record wall times (breaks byte determinism)")
        p.add_argument("--plot", default=None,
                       help="also render a figure to this path")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.subcommand is None:
            raise UsageError("missing subcommand")
        if args.seed is not None and args.seed < 0:
            raise UsageError("--seed must be nonnegative")
        return _HANDLERS[args.subcommand](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
