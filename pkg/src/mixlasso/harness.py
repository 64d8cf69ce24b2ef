"""Seeded Monte Carlo experiment harness.

Runs recovery trials y = B A x + w end to end: draw a structured ground
truth (optionally pushed a controlled distance away from the structure set),
fix the noise direction, then draw the random measurement rows, solve, and
record the achieved error together with the three bound terms it decomposes
into (noise, optimization gap, structure mismatch).  Sweeps write an
analysis-ready CSV that is resumable and byte-deterministic.
"""

from __future__ import annotations

import csv
import io
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .seeding import as_rng, derive_rng, derive_seed
from .ensembles import (
    MixingSpec,
    RowDistribution,
    build_mixing,
    identity_family,
    sample_rows,
    stable_rank,
)
from .geometry import WHICH_DIFFERENCE, network_width_bound, width_mc
from .solvers import SolveOptions, solve_with_gap_target
from .structures import (
    NetworkRange,
    SparseCone,
    StructureSpec,
    Subspace,
    SubspaceUnion,
    build_structure,
)

CSV_HEADER = ("axis_point,trial,seed,sr_b,width,width_source,noise_norm,"
              "eps_achieved,eps_certified,mismatch,recovery_error,"
              "term_noise,term_eps,term_mismatch,converged,wall_ms")

# sweepable configuration fields
AXIS_NAMES = ("sr_b", "noise_norm", "mismatch", "eps_inject")

_WIDTH_DRAWS = 2000


@dataclass(frozen=True)
class ExperimentConfig:
    mixing: MixingSpec
    row_dist: RowDistribution
    structure: StructureSpec
    noise_norm: float
    mismatch: float
    eps_target: float
    trials: int
    master_seed: int
    axes: tuple = ()            # ((name, (values...)), ...)
    eps_inject: float = 0.0

    def __post_init__(self):
        if self.noise_norm < 0 or self.mismatch < 0:
            raise ValueError("noise_norm and mismatch must be nonnegative")
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if self.eps_inject < 0:
            raise ValueError("eps_inject must be nonnegative")
        axes = tuple((str(name), tuple(float(v) for v in values))
                     for name, values in self.axes)
        for name, values in axes:
            if name not in AXIS_NAMES:
                raise ValueError(
                    f"unknown sweep axis {name!r}; supported: {AXIS_NAMES}"
                )
            if not values:
                raise ValueError(f"sweep axis {name!r} has no values")
        object.__setattr__(self, "axes", axes)


@dataclass(frozen=True)
class TrialResult:
    seed: int
    recovery_error: float
    eps_achieved: float
    eps_certified: bool
    sr_b: float
    width_used: float
    width_source: str
    noise_norm: float
    mismatch: float           # achieved distance of the ground truth from T
    term_noise: float
    term_eps: float
    term_mismatch: float
    converged: bool
    wall_ms: float


def apply_axis_point(config: ExperimentConfig,
                     assignment: Dict[str, float]) -> ExperimentConfig:
    """Override config fields for one point of the sweep grid."""
    out = config
    for name, value in assignment.items():
        if name == "sr_b":
            out = replace(out, mixing=identity_family(int(round(value))))
        elif name == "noise_norm":
            out = replace(out, noise_norm=float(value))
        elif name == "mismatch":
            out = replace(out, mismatch=float(value))
        elif name == "eps_inject":
            out = replace(out, eps_inject=float(value))
        else:
            raise ValueError(f"unknown sweep axis {name!r}")
    return out


def axis_point_label(assignment: Dict[str, float]) -> str:
    if not assignment:
        return "-"
    return ";".join(f"{k}={v:g}" for k, v in assignment.items())


@dataclass
class TrialContext:
    """Per-axis-point precomputation shared across trials."""

    mixing: np.ndarray
    structure: object
    sr_b: float
    fro_b: float
    width: float
    width_source: str
    nominal_k: float


def build_context(config: ExperimentConfig) -> TrialContext:
    mixing = build_mixing(config.mixing)
    structure = build_structure(config.structure)
    if mixing.shape[1] < 1:
        raise ValueError("mixing matrix needs at least one column")
    if isinstance(structure, NetworkRange):
        net = structure.network
        bound = network_width_bound(net.latent_dim, net.depth, net.dims[1:])
        width, source = bound.width_bound, "bound"
    else:
        est = width_mc(structure, WHICH_DIFFERENCE, _WIDTH_DRAWS,
                       derive_rng(config.master_seed, "width"))
        width, source = est.mean, "mc"
    return TrialContext(
        mixing=mixing,
        structure=structure,
        sr_b=stable_rank(mixing),
        fro_b=float(np.linalg.norm(mixing)),
        width=width,
        width_source=source,
        nominal_k=config.row_dist.nominal_k,
    )


def _draw_mismatched_truth(structure, target: float, rng) -> Tuple[np.ndarray, float]:
    """Unit-norm member plus a perturbation re-drawn until its distance from
    the structure set lands within 10% of the target (at most 50 attempts)."""
    base = structure.sample_point(rng, normalize=True)
    if target == 0.0:
        return base, 0.0
    best_x, best_dist = None, None
    for _ in range(50):
        u = rng.standard_normal(structure.ambient_dim)
        u /= np.linalg.norm(u)
        x = base + target * u
        dist = structure.distance(x)
        if best_x is None or abs(dist - target) < abs(best_dist - target):
            best_x, best_dist = x, dist
        if abs(dist - target) <= 0.1 * target:
            break
    return best_x, float(best_dist)


def _injection_direction(structure, x_opt: np.ndarray, rng) -> np.ndarray:
    """A unit direction along which x_opt can move while staying in T."""
    if isinstance(structure, Subspace):
        v = structure.basis @ rng.standard_normal(structure.dim)
    elif isinstance(structure, SubspaceUnion):
        member = structure.members[structure.best_member(x_opt)[0]]
        v = member.basis @ rng.standard_normal(member.dim)
    elif isinstance(structure, SparseCone):
        support = np.flatnonzero(x_opt)
        if support.size == 0:
            support = np.arange(structure.sparsity)
        v = np.zeros(structure.ambient_dim)
        v[support] = rng.standard_normal(support.size)
    else:
        raise ValueError(
            "gap injection is supported for sparse, subspace, and union "
            "structures only"
        )
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ValueError("degenerate injection direction")
    return v / norm


def run_trial(config: ExperimentConfig, trial_index: int,
              axis_label: str = "-", context: Optional[TrialContext] = None,
              trace: Optional[list] = None) -> TrialResult:
    """One seeded recovery experiment; bit-reproducible given its inputs.

    The noise vector is drawn from its own stream strictly before the
    measurement rows, so the noise never depends on the realization of the
    random matrix.
    """
    ctx = context or build_context(config)
    trial_seed = derive_seed(config.master_seed, axis_label, trial_index)
    start = time.perf_counter()

    x, achieved_mismatch = _draw_mismatched_truth(
        ctx.structure, config.mismatch, derive_rng(trial_seed, "truth"))
    if trace is not None:
        trace.append("truth")

    l, m = ctx.mixing.shape
    noise = np.zeros(l)
    if config.noise_norm > 0.0:
        direction = derive_rng(trial_seed, "noise").standard_normal(l)
        noise = config.noise_norm * direction / np.linalg.norm(direction)
    if trace is not None:
        trace.append("noise")

    rows = sample_rows(config.row_dist, m, ctx.structure.ambient_dim,
                       derive_rng(trial_seed, "rows"))
    if trace is not None:
        trace.append("rows")

    measurement = ctx.mixing @ rows
    y = measurement @ x + noise

    if config.eps_inject > 0.0:
        if config.noise_norm != 0.0:
            raise ValueError("gap injection requires noiseless trials")
        v = _injection_direction(ctx.structure, x,
                                 derive_rng(trial_seed, "inject"))
        scale = np.linalg.norm(measurement @ v)
        if scale == 0.0:
            raise ValueError("injection direction lies in the null space")
        xhat = x + (config.eps_inject / scale) * v
        eps_achieved, eps_certified = config.eps_inject, True
        converged = True
    else:
        report = solve_with_gap_target(
            y, measurement, ctx.structure, config.eps_target,
            SolveOptions(seed=derive_seed(trial_seed, "solve")))
        xhat = report.xhat
        eps_achieved, eps_certified = report.eps_upper, report.eps_certified
        converged = report.converged
    if trace is not None:
        trace.append("solve")

    wall_ms = (time.perf_counter() - start) * 1000.0
    k = ctx.nominal_k
    sqrt_sr = np.sqrt(ctx.sr_b)
    return TrialResult(
        seed=trial_seed,
        recovery_error=float(np.linalg.norm(x - xhat)),
        eps_achieved=float(eps_achieved),
        eps_certified=bool(eps_certified),
        sr_b=ctx.sr_b,
        width_used=ctx.width,
        width_source=ctx.width_source,
        noise_norm=config.noise_norm,
        mismatch=achieved_mismatch,
        term_noise=float(k * ctx.width / (ctx.fro_b * sqrt_sr)
                         * config.noise_norm),
        term_eps=float(eps_achieved / ctx.fro_b),
        term_mismatch=float(k * np.sqrt(l) / sqrt_sr * achieved_mismatch),
        converged=converged,
        wall_ms=float(wall_ms),
    )


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def sweep_grid(config: ExperimentConfig) -> List[Dict[str, float]]:
    """Cartesian product of the sweep axes, in declaration order."""
    if not config.axes:
        raise ValueError("sweep needs at least one axis")
    grid = [dict()]
    for name, values in config.axes:
        grid = [dict(point, **{name: v}) for point in grid for v in values]
    return grid


def _format_float(x: float) -> str:
    return f"{x:.10g}"


def format_row(label: str, trial: int, result: TrialResult,
               timing: bool) -> str:
    cells = [
        label,
        str(trial),
        str(result.seed),
        _format_float(result.sr_b),
        _format_float(result.width_used),
        result.width_source,
        _format_float(result.noise_norm),
        _format_float(result.eps_achieved),
        "1" if result.eps_certified else "0",
        _format_float(result.mismatch),
        _format_float(result.recovery_error),
        _format_float(result.term_noise),
        _format_float(result.term_eps),
        _format_float(result.term_mismatch),
        "1" if result.converged else "0",
        f"{result.wall_ms:.3f}" if timing else "0",
    ]
    return ",".join(cells)


def run_sweep(config: ExperimentConfig, threads: int = 1,
              done: Optional[Dict[Tuple[str, int], str]] = None,
              timing: bool = False,
              progress=None) -> List[Tuple[Tuple[str, int], str]]:
    """Compute every (axis point, trial) row of the sweep.

    Rows already present in `done` are reused verbatim.  Execution may be
    parallel; the returned rows are always in deterministic grid order.
    """
    grid = sweep_grid(config)
    points = [(axis_point_label(p), apply_axis_point(config, p))
              for p in grid]
    keys = [(label, t) for label, _ in points for t in range(config.trials)]
    done = done or {}
    pending = [key for key in keys if key not in done]

    contexts = {label: build_context(cfg) for label, cfg in points
                if any(k[0] == label for k in pending)}
    configs = dict(points)

    def compute(key):
        label, trial = key
        result = run_trial(configs[label], trial, axis_label=label,
                           context=contexts[label])
        return key, format_row(label, trial, result, timing)

    rows = dict(done)
    if threads <= 1:
        for key in pending:
            k, row = compute(key)
            rows[k] = row
            if progress is not None:
                progress(k, row)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for k, row in pool.map(compute, pending):
                rows[k] = row
                if progress is not None:
                    progress(k, row)
    return [(key, rows[key]) for key in keys]


def partial_path(out_path: str) -> str:
    return str(out_path) + ".partial"


def load_partial(path: str) -> Dict[Tuple[str, int], str]:
    done: Dict[Tuple[str, int], str] = {}
    if not os.path.exists(path):
        return done
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            cells = line.split(",")
            if len(cells) < 2:
                continue
            try:
                done[(cells[0], int(cells[1]))] = line
            except ValueError:
                continue
    return done


def sweep(config: ExperimentConfig, out_path: str, threads: int = 1,
          resume: bool = False, timing: bool = False,
          header_lines: Sequence[str] = ()) -> int:
    """Run the sweep and write the CSV atomically; returns the row count.

    Finished rows stream to `<out>.partial` so an interrupted run can resume;
    the final file only ever appears complete.
    """
    part = partial_path(out_path)
    done: Dict[Tuple[str, int], str] = {}
    if os.path.exists(part):
        if not resume:
            raise ValueError(
                f"partial output {part} exists; pass resume=True to continue"
            )
        done = load_partial(part)
    with open(part, "a", encoding="utf-8") as partial_fh:
        def progress(key, row):
            partial_fh.write(row + "\n")
            partial_fh.flush()

        ordered = run_sweep(config, threads=threads, done=done,
                            timing=timing, progress=progress)
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    buf.write(CSV_HEADER + "\n")
    for _, row in ordered:
        buf.write(row + "\n")
    tmp = str(out_path) + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(buf.getvalue())
    os.replace(tmp, out_path)
    os.remove(part)
    return len(ordered)


# ---------------------------------------------------------------------------
# Concentration and slope diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConcentrationReport:
    ratio_min: float
    ratio_q25: float
    ratio_median: float
    ratio_q75: float
    ratio_max: float
    frac_within_10: float   # fraction of ratios in [0.9, 1.1]
    frac_within_30: float   # fraction of ratios in [0.7, 1.3]
    num_ratios: int

    @property
    def iqr(self) -> float:
        return self.ratio_q75 - self.ratio_q25


def verify_concentration(mixing: np.ndarray, row_dist: RowDistribution,
                         structure, num_directions: int, trials: int,
                         seed) -> ConcentrationReport:
    """Distribution of ||B A h|| / ||B||_F over fresh draws of the rows.

    Directions h are normalized differences of two structure members, i.e.
    unit vectors of the difference set.  Requires a structure with exact
    sampling (network ranges are excluded).
    """
    if isinstance(structure, NetworkRange):
        raise ValueError("concentration check needs an exact-sampling structure")
    mixing = np.asarray(mixing, dtype=float)
    fro = np.linalg.norm(mixing)
    if fro == 0.0:
        raise ValueError("mixing matrix must be nonzero")
    rng = as_rng(seed)
    n = structure.ambient_dim
    directions = []
    for _ in range(num_directions):
        for _ in range(100):
            h = (structure.sample_point(rng) - structure.sample_point(rng))
            norm = np.linalg.norm(h)
            if norm > 1e-12:
                directions.append(h / norm)
                break
        else:
            raise ValueError("could not draw a nonzero difference direction")
    ratios = np.empty(num_directions * trials)
    idx = 0
    for _ in range(trials):
        rows = sample_rows(row_dist, mixing.shape[1], n, rng)
        ba = mixing @ rows
        for h in directions:
            ratios[idx] = np.linalg.norm(ba @ h) / fro
            idx += 1
    return ConcentrationReport(
        ratio_min=float(ratios.min()),
        ratio_q25=float(np.quantile(ratios, 0.25)),
        ratio_median=float(np.median(ratios)),
        ratio_q75=float(np.quantile(ratios, 0.75)),
        ratio_max=float(ratios.max()),
        frac_within_10=float(np.mean((ratios >= 0.9) & (ratios <= 1.1))),
        frac_within_30=float(np.mean((ratios >= 0.7) & (ratios <= 1.3))),
        num_ratios=ratios.size,
    )


def read_csv_rows(path: str) -> List[Dict[str, str]]:
    """Read a harness CSV, skipping `#` comment lines."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("".join(lines))))


def fit_slope(source, x_col: str, y_col: str) -> Tuple[float, float]:
    """Log-log slope of the per-x median of y, by ordinary least squares.

    `source` is a CSV path or a list of row dicts.  Requires at least four
    distinct positive x values and positive medians.
    """
    rows = read_csv_rows(source) if isinstance(source, (str, os.PathLike)) \
        else list(source)
    groups: Dict[float, List[float]] = {}
    for row in rows:
        x, y = float(row[x_col]), float(row[y_col])
        groups.setdefault(x, []).append(y)
    if len(groups) < 4:
        raise ValueError("slope fit needs at least 4 distinct x values")
    xs = np.array(sorted(groups))
    meds = np.array([np.median(groups[x]) for x in xs])
    if np.any(xs <= 0.0) or np.any(meds <= 0.0):
        raise ValueError("slope fit needs positive x values and medians")
    lx, ly = np.log(xs), np.log(meds)
    lx_c = lx - lx.mean()
    slope = float(np.sum(lx_c * ly) / np.sum(lx_c**2))
    intercept = float(ly.mean() - slope * lx.mean())
    resid = ly - (intercept + slope * lx)
    dof = max(len(xs) - 2, 1)
    stderr = float(np.sqrt(np.sum(resid**2) / dof / np.sum(lx_c**2)))
    return slope, stderr
