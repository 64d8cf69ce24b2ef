"""Constrained least-squares solvers.

Solves min ||y - M x||_2^2 over x in a structure set T: closed form on
subspaces, exact minimum over members for unions, iterative hard thresholding
with a debiasing pass for sparse cones, and multi-restart latent descent for
network ranges.  Every report carries an upper bound on the optimization gap
(the amount by which the returned objective may exceed the constrained
minimum), tagged as certified or heuristic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from .seeding import as_rng, derive_seed
from .structures import (
    NetworkRange,
    ProjectOptions,
    SparseCone,
    StructureSet,
    Subspace,
    SubspaceUnion,
)

_UNION_MEMBER_LIMIT = 10_000
_SUPPORT_ORACLE_MAX_DIM = 12


@dataclass(frozen=True)
class SolveOptions:
    max_iters: int = 500
    restarts: int = 10
    extra_restarts: Optional[int] = None
    tol: float = 1e-9
    seed: int = 0
    record_trace: bool = False


DEFAULT_SOLVE_OPTIONS = SolveOptions()


@dataclass(frozen=True)
class SolveReport:
    xhat: np.ndarray
    objective: float          # ||y - M xhat||_2^2
    eps_upper: float          # bound on sqrt(objective - min over T)
    eps_certified: bool
    iterations: int
    converged: bool
    strategy: str
    objective_trace: Optional[np.ndarray] = None


def operator_norm(mat: np.ndarray, iters: int = 100, seed: int = 0) -> float:
    """Largest singular value via power iteration on M^T M."""
    mat = np.asarray(mat, dtype=float)
    rng = as_rng(seed)
    v = rng.standard_normal(mat.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(iters):
        w = mat.T @ (mat @ v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        sigma = np.sqrt(norm)
    return float(sigma)


def _residual_objective(y, mat, x) -> float:
    r = y - mat @ x
    return float(r @ r)


def _lstsq_on(y, cols) -> Tuple[np.ndarray, float]:
    coef, _, _, _ = np.linalg.lstsq(cols, y, rcond=None)
    resid = y - cols @ coef
    return coef, float(resid @ resid)


def exhaustive_sparse_minimum(y: np.ndarray, mat: np.ndarray,
                              sparsity: int) -> Tuple[float, tuple]:
    """Smallest objective over every support of the given size.

    Brute force over C(n, s) supports; guarded to n <= 20.
    """
    n = mat.shape[1]
    if n > 20:
        raise ValueError("exhaustive support search is guarded to n <= 20")
    best, best_support = np.inf, None
    for support in itertools.combinations(range(n), sparsity):
        _, obj = _lstsq_on(y, mat[:, support])
        if obj < best:
            best, best_support = obj, support
    return float(best), best_support


def _solve_subspace(y, mat, structure: Subspace) -> SolveReport:
    coef, obj = _lstsq_on(y, mat @ structure.basis)
    return SolveReport(structure.basis @ coef, obj, 0.0, True, 1, True,
                       "subspace-lstsq")


def _solve_union(y, mat, structure: SubspaceUnion) -> SolveReport:
    if len(structure.members) > _UNION_MEMBER_LIMIT:
        raise ValueError(
            f"union solve is limited to {_UNION_MEMBER_LIMIT} members"
        )
    best_x, best_obj = None, np.inf
    for member in structure.members:
        coef, obj = _lstsq_on(y, mat @ member.basis)
        if obj < best_obj:
            best_x, best_obj = member.basis @ coef, obj
    return SolveReport(best_x, best_obj, 0.0, True, len(structure.members),
                       True, "union-lstsq")


def _iht_descend(y, mat, structure: SparseCone, x0, step,
                 opts: SolveOptions, trace):
    """One hard-thresholding run; the objective is monotone because the
    step applied to the half-gradient M^T(y - Mx) keeps each thresholded
    update a minimizer of a quadratic upper model."""
    x = x0
    obj = _residual_objective(y, mat, x)
    if trace is not None:
        trace.append(obj)
    iterations = 0
    converged = False
    for iterations in range(1, opts.max_iters + 1):
        grad_half = mat.T @ (y - mat @ x)
        x = structure.project(x + step * grad_half).point
        new_obj = _residual_objective(y, mat, x)
        if trace is not None:
            trace.append(new_obj)
        if obj - new_obj < opts.tol * max(obj, 1.0):
            obj = new_obj
            converged = True
            break
        obj = new_obj
    support = np.flatnonzero(x)
    if support.size == 0:
        support = structure.top_support(mat.T @ y)
    coef, debiased_obj = _lstsq_on(y, mat[:, support])
    if debiased_obj <= obj:
        x = np.zeros(mat.shape[1])
        x[support] = coef
        obj = debiased_obj
    return x, obj, iterations, converged


def _solve_sparse(y, mat, structure: SparseCone,
                  opts: SolveOptions) -> SolveReport:
    """Iterative hard thresholding plus a least-squares debiasing pass.

    Restart 0 starts from zero; further restarts use seeded dense starts at
    the solution scale to escape spurious thresholding fixed points.  The
    lowest final objective wins, ties to the lowest restart index.
    """
    if opts.restarts < 1:
        raise ValueError("sparse solve needs at least one restart")
    n = mat.shape[1]
    sigma = operator_norm(mat, seed=opts.seed)
    if sigma == 0.0:
        raise ValueError("measurement matrix is zero")
    step = 1.0 / sigma**2
    start_scale = 3.0 * np.linalg.norm(y) / sigma
    rng = as_rng(opts.seed)
    best = None
    total_iters = 0
    trace = [] if opts.record_trace else None
    for restart in range(opts.restarts):
        x0 = np.zeros(n) if restart == 0 else \
            start_scale * rng.standard_normal(n)
        run_trace = [] if (trace is not None and restart == 0) else None
        x, obj, iters, converged = _iht_descend(y, mat, structure, x0, step,
                                                opts, run_trace)
        if run_trace is not None:
            trace = run_trace
        total_iters += iters
        if best is None or obj < best[1]:
            best = (x, obj, converged)
    x, obj, converged = best
    if n <= _SUPPORT_ORACLE_MAX_DIM:
        oracle_min, _ = exhaustive_sparse_minimum(y, mat, structure.sparsity)
        eps, certified = float(np.sqrt(max(obj - oracle_min, 0.0))), True
    else:
        eps, certified = 0.0, False
    return SolveReport(x, obj, eps, certified, total_iters, converged,
                       "sparse-iht-debias",
                       np.array(trace) if trace is not None else None)


def _solve_network(y, mat, structure: NetworkRange,
                   opts: SolveOptions) -> SolveReport:
    """Latent-space multi-restart descent on ||y - M G(z)||^2.

    The returned point is the best of the nominal restart pool; an enlarged
    probe pool supplies a heuristic gap estimate.
    """
    if opts.restarts < 1:
        raise ValueError("latent solve needs at least one restart")
    net = structure.network

    def objective_grad(z):
        out, masks = net.forward_with_masks(z)
        r = mat @ out - y
        return float(r @ r), net.vjp(masks, 2.0 * (mat.T @ r))

    proj_opts = ProjectOptions(restarts=opts.restarts,
                               extra_restarts=opts.extra_restarts,
                               iterations=opts.max_iters, tol=opts.tol,
                               seed=opts.seed)
    z, obj, obj_all = structure._fit_latent(
        objective_grad, proj_opts,
        forward_map=lambda zz: mat @ net.forward(zz), target=y)
    eps = float(np.sqrt(max(obj - obj_all, 0.0)))
    return SolveReport(net.forward(z), float(obj), eps, False,
                       opts.max_iters, True, "network-latent")


def solve_lasso(y: np.ndarray, mat: np.ndarray, structure: StructureSet,
                opts: SolveOptions = None) -> SolveReport:
    """Approximately minimize ||y - M x||_2^2 subject to x in T."""
    y = np.asarray(y, dtype=float).reshape(-1)
    mat = np.asarray(mat, dtype=float)
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(mat))):
        raise ValueError("y and M must be finite")
    if mat.shape[0] != y.shape[0] or mat.shape[1] != structure.ambient_dim:
        raise ValueError(
            f"shape mismatch: M is {mat.shape}, y has {y.shape[0]} entries, "
            f"T lives in dim {structure.ambient_dim}"
        )
    opts = opts or DEFAULT_SOLVE_OPTIONS
    if opts.max_iters < 1:
        raise ValueError("iteration budget must be positive")
    if isinstance(structure, Subspace):
        return _solve_subspace(y, mat, structure)
    if isinstance(structure, SubspaceUnion):
        return _solve_union(y, mat, structure)
    if isinstance(structure, SparseCone):
        return _solve_sparse(y, mat, structure, opts)
    if isinstance(structure, NetworkRange):
        return _solve_network(y, mat, structure, opts)
    raise TypeError(f"no solver for {type(structure).__name__}")


def solve_with_gap_target(y, mat, structure: StructureSet, eps_target: float,
                          opts: SolveOptions = None,
                          max_rounds: int = 4) -> SolveReport:
    """Re-run solve_lasso with escalating budgets until the gap bound meets
    the target; budget exhaustion returns the best report unconverged."""
    if eps_target < 0.0:
        raise ValueError("gap target must be nonnegative")
    opts = opts or DEFAULT_SOLVE_OPTIONS
    best = None
    for round_idx in range(max_rounds):
        scale = 2**round_idx
        round_opts = replace(
            opts,
            max_iters=opts.max_iters * scale,
            restarts=opts.restarts * scale,
            seed=derive_seed(opts.seed, "round", round_idx),
        )
        report = solve_lasso(y, mat, structure, round_opts)
        if best is None or report.objective < best.objective:
            best = report
        if best.eps_upper <= eps_target:
            return replace(best, converged=True)
    return replace(best, converged=best.eps_upper <= eps_target)
