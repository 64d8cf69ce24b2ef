"""Geometric complexity measures.

Monte Carlo estimation of Gaussian mean widths with an exact per-draw
supremum wherever the structure permits, closed-form region/width bounds for
ReLU-network ranges, exact counting of the orthants met by a low-dimensional
subspace, and the dimension of a subspace slice after rectification.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .seeding import as_rng
from .ensembles import stable_rank
from .structures import (
    NetworkRange,
    ProjectOptions,
    SparseCone,
    StructureSet,
    Subspace,
    SubspaceUnion,
)

WHICH_SET = "set"              # T intersected with the unit sphere
WHICH_DIFFERENCE = "difference"  # (T - T) intersected with the unit sphere


@dataclass(frozen=True)
class WidthEstimate:
    mean: float
    stderr: float
    num_gaussians: int
    sup_solver: str  # "exact" or "latent-approx"

    def __str__(self):
        return f"{self.mean:.6g} +/- {self.stderr:.2g} ({self.sup_solver})"


def _summarize(sups: np.ndarray, solver: str) -> WidthEstimate:
    sups = np.asarray(sups, dtype=float)
    n = sups.shape[0]
    stderr = float(np.std(sups, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return WidthEstimate(float(np.mean(sups)), stderr, n, solver)


def _top_abs_norms(g: np.ndarray, s: int) -> np.ndarray:
    """Per-row L2 norm of the s largest-magnitude entries."""
    s = min(s, g.shape[1])
    a = np.abs(g)
    part = np.partition(a, g.shape[1] - s, axis=1)[:, g.shape[1] - s:]
    return np.linalg.norm(part, axis=1)


def _pair_bases(members: Sequence[Subspace]) -> List[np.ndarray]:
    """Orthonormal bases of the pairwise sums E_i + E_j (including i = j)."""
    bases = []
    for i, a in enumerate(members):
        for b in members[i:]:
            if a is b:
                bases.append(a.basis)
                continue
            stacked = np.concatenate([a.basis, b.basis], axis=1)
            u, sv, _ = np.linalg.svd(stacked, full_matrices=False)
            bases.append(u[:, sv > 1e-12 * sv[0]])
    return bases


def _latent_sup(structure: NetworkRange, g: np.ndarray,
                opts: ProjectOptions, difference: bool) -> float:
    """Lower estimate of sup <v, g> over the (difference of the) range,
    v restricted to the unit sphere, by first-order search in latent space."""
    net = structure.network
    k = net.latent_dim
    main, extra = opts.pool_sizes()
    if main < 1:
        raise ValueError("latent sup needs at least one restart")
    rng = as_rng(opts.seed)

    def value_grad(z):
        if difference:
            out1, m1 = net.forward_with_masks(z[:k])
            out2, m2 = net.forward_with_masks(z[k:])
            u = out1 - out2
        else:
            out1, m1 = net.forward_with_masks(z)
            u = out1
        norm = np.linalg.norm(u)
        if norm <= 1e-300:
            return 0.0, np.zeros_like(z)
        val = float(u @ g) / norm
        du = g / norm - (val / norm**2) * u
        if difference:
            grad = np.concatenate([net.vjp(m1, du), net.vjp(m2, -du)])
        else:
            grad = net.vjp(m1, du)
        return -val, -grad  # descend the negated objective

    dim = 2 * k if difference else k
    best = 0.0
    for _ in range(main + extra):
        z0 = rng.standard_normal(dim)
        z, val = structure._descend(value_grad, z0, opts.iterations, opts.tol)
        best = max(best, -val)
    return best


def width_mc(structure: StructureSet, which: str, num_gaussians: int, seed,
             opts: Optional[ProjectOptions] = None) -> WidthEstimate:
    """Monte Carlo Gaussian mean width of T (or T - T) on the unit sphere.

    The per-draw supremum is exact for sparse cones, subspaces, and unions;
    network ranges use a latent-space search and are flagged as a lower
    estimate.
    """
    if num_gaussians < 100:
        raise ValueError("width estimation needs at least 100 Gaussian draws")
    if which not in (WHICH_SET, WHICH_DIFFERENCE):
        raise ValueError(f"unknown width target {which!r}")
    rng = as_rng(seed)
    n = structure.ambient_dim
    g = rng.standard_normal((num_gaussians, n))

    if isinstance(structure, Subspace):
        sups = np.linalg.norm(g @ structure.basis, axis=1)
        return _summarize(sups, "exact")
    if isinstance(structure, SparseCone):
        s = structure.sparsity if which == WHICH_SET else 2 * structure.sparsity
        return _summarize(_top_abs_norms(g, s), "exact")
    if isinstance(structure, SubspaceUnion):
        if which == WHICH_SET:
            bases = [m.basis for m in structure.members]
        else:
            bases = _pair_bases(structure.members)
        per_member = np.stack(
            [np.linalg.norm(g @ b, axis=1) if b.shape[1] else
             np.zeros(num_gaussians) for b in bases], axis=1)
        return _summarize(per_member.max(axis=1), "exact")
    if isinstance(structure, NetworkRange):
        opts = opts or ProjectOptions(restarts=5, extra_restarts=0,
                                      iterations=200)
        sups = np.empty(num_gaussians)
        for i in range(num_gaussians):
            draw_opts = ProjectOptions(
                restarts=opts.restarts, extra_restarts=opts.extra_restarts,
                iterations=opts.iterations, tol=opts.tol,
                seed=int(rng.integers(2**63)))
            sups[i] = _latent_sup(structure, g[i], draw_opts,
                                  which == WHICH_DIFFERENCE)
        return _summarize(sups, "latent-approx")
    raise TypeError(f"width not implemented for {type(structure).__name__}")


def finite_set_width(points: np.ndarray, num_gaussians: int, seed) -> WidthEstimate:
    """Width of a finite point set: exact sup per draw.  Test oracle utility."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    rng = as_rng(seed)
    g = rng.standard_normal((num_gaussians, points.shape[1]))
    return _summarize((g @ points.T).max(axis=1), "exact")


# ---------------------------------------------------------------------------
# Closed-form bounds for network ranges
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NetworkWidthBound:
    log_region_count: float    # natural log of the region-count bound
    region_count: float        # may overflow to inf; use the log for math
    width_bound: float         # sqrt(2k) + sqrt(2 k d log(2e p'/k))
    geometric_mean_width: float  # p', the geometric mean of the layer widths
    log_clamped: bool          # True when k exceeds 2e p' (log term floored)


def network_width_bound(latent_dim: int, depth: int,
                        layer_dims: Sequence[int]) -> NetworkWidthBound:
    """Region-count and mean-width bounds from the layer dimensions alone.

    The number of linear regions is at most [(2e/k)^d * prod(p_i)]^k and the
    width of the normalized difference set is at most
    sqrt(2k) + sqrt(2 k d log(2e p'/k)) with p' the geometric mean of the
    layer widths.  Computed in the log domain to avoid overflow.
    """
    k, d = int(latent_dim), int(depth)
    dims = [int(p) for p in layer_dims]
    if k < 1 or d < 1 or len(dims) != d or any(p < 1 for p in dims):
        raise ValueError("invalid network dimensions")
    log_dims = [math.log(p) for p in dims]
    log_count = k * (d * (math.log(2.0) + 1.0 - math.log(k)) + sum(log_dims))
    count = math.exp(log_count) if log_count < 700 else math.inf
    p_geo = math.exp(sum(log_dims) / d)
    inner = math.log(2.0 * math.e * p_geo / k)
    clamped = inner < 0.0
    width = math.sqrt(2.0 * k) + math.sqrt(2.0 * k * d * max(inner, 0.0))
    return NetworkWidthBound(log_count, count, width, p_geo, clamped)


# ---------------------------------------------------------------------------
# Orthants met by a subspace
# ---------------------------------------------------------------------------
#
# A point x = B c of the subspace lies in the closed orthant with signs s
# exactly when the sign pattern of x is compatible with s (zeros are free).
# The patterns realizable by nonzero c are constant on the faces of the
# hyperplane arrangement {c : b_i . c = 0} in coefficient space, so for
# k <= 3 the count is obtained exactly by enumerating one witness per face
# and marking the compatible orthants.  Higher k falls back to a linear
# program per sign prefix.

_PATTERN_TOL = 1e-11


def _sign_pattern(x: np.ndarray, tol: float = _PATTERN_TOL) -> tuple:
    return tuple(0 if abs(v) <= tol else (1 if v > 0 else -1) for v in x)


def _perp_2d(v: np.ndarray) -> np.ndarray:
    return np.array([-v[1], v[0]])


def _realized_patterns(basis: np.ndarray) -> set:
    """Sign patterns of B c over all nonzero c, for k <= 3."""
    n, k = basis.shape
    rows = [basis[i] for i in range(n)]
    effective = [r for r in rows if np.linalg.norm(r) > 1e-12]
    patterns = set()

    def add(c):
        patterns.add(_sign_pattern(basis @ c))

    if k == 1:
        add(np.array([1.0]))
        add(np.array([-1.0]))
        return patterns

    if k == 2:
        angles = []
        for r in effective:
            phi = math.atan2(r[1], r[0])
            for a in (phi + math.pi / 2, phi - math.pi / 2):
                angles.append(a % (2.0 * math.pi))
        angles = sorted(set(round(a, 12) for a in angles))
        # rays (faces of the line arrangement) and sector midpoints (cells)
        for i, a in enumerate(angles):
            add(np.array([math.cos(a), math.sin(a)]))
            b = angles[(i + 1) % len(angles)]
            if i + 1 == len(angles):
                b += 2.0 * math.pi
            mid = 0.5 * (a + b)
            add(np.array([math.cos(mid), math.sin(mid)]))
        return patterns

    # k == 3: arrangement of great circles on the sphere of directions
    verts = []

    def push_vert(v):
        nv = np.linalg.norm(v)
        if nv > 1e-12:
            verts.append(v / nv)

    for r1, r2 in itertools.combinations(effective, 2):
        cross = np.cross(r1, r2)
        push_vert(cross)
        push_vert(-cross)
    for r in effective:
        # pseudo-vertices so circles missed by every crossing still get edges
        seed = np.array([1.0, 0.0, 0.0])
        if abs(r[0]) > 0.9 * np.linalg.norm(r):
            seed = np.array([0.0, 1.0, 0.0])
        u = seed - (seed @ r) / (r @ r) * r
        push_vert(u)
        push_vert(-u)
    for v in verts:
        add(v)
    for r in effective:
        axis = r / np.linalg.norm(r)
        on_circle = [v for v in verts if abs(v @ axis) <= 1e-9]
        if not on_circle:
            continue
        # order the circle's vertices by angle and take arc midpoints
        ref = on_circle[0]
        ref = ref - (ref @ axis) * axis
        ref /= np.linalg.norm(ref)
        ref2 = np.cross(axis, ref)
        ang = sorted(set(
            round(math.atan2(float(v @ ref2), float(v @ ref))
                  % (2.0 * math.pi), 12)
            for v in on_circle))
        for i, a in enumerate(ang):
            b = ang[(i + 1) % len(ang)]
            if i + 1 == len(ang):
                b += 2.0 * math.pi
            mid_angle = 0.5 * (a + b)
            mid = math.cos(mid_angle) * ref + math.sin(mid_angle) * ref2
            add(mid)
            # limiting patterns of the two cells adjacent across this circle
            base = basis @ mid
            side = basis @ axis
            for sgn in (1.0, -1.0):
                resolved = np.where(np.abs(base) > _PATTERN_TOL, base,
                                    sgn * side)
                patterns.add(_sign_pattern(resolved))
    return patterns


def _count_compatible(patterns, n: int) -> int:
    """Number of sign vectors in {-1,+1}^n compatible with some pattern."""
    table = np.zeros(2**n, dtype=bool)
    for pat in patterns:
        if all(p == 0 for p in pat):
            continue  # only the zero vector realizes the empty pattern
        idx = np.array([0], dtype=np.int64)
        for j, p in enumerate(pat):
            bit = 1 << j
            if p > 0:
                idx = idx + bit
            elif p == 0:
                idx = np.concatenate([idx, idx + bit])
        table[idx] = True
    return int(table.sum())


def _cone_has_nonzero(rows: np.ndarray) -> bool:
    """Does {c : rows @ c >= 0} contain a nonzero point?

    Decided by maximizing the constraint sum (positive iff a nonzero point
    exists); the LP witness is re-verified strictly so solver feasibility
    tolerances cannot smuggle in a point of an empty cone, with the kernel
    as a separate exact certificate.
    """
    from scipy.optimize import linprog

    rows = np.asarray(rows, dtype=float)
    m, k = rows.shape
    res = linprog(-rows.sum(axis=0), A_ub=-rows, b_ub=np.zeros(m),
                  bounds=[(-1.0, 1.0)] * k, method="highs")
    if res.status == 0 and res.fun < -1e-9:
        witness = res.x
        if np.all(rows @ witness >= -1e-12):
            return True
    sv = np.linalg.svd(rows, compute_uv=False)
    return sv.size < k or sv[-1] <= 1e-12 * sv[0]


def count_orthants(basis: np.ndarray, mode: str = "exhaustive",
                   num_samples: int = 4096, seed: int = 0) -> int:
    """Closed orthants of R^n containing a nonzero point of the subspace.

    `mode="exhaustive"` decides every orthant exactly (guarded to n <= 20);
    `mode="lp"` samples directions and reports a verified lower bound.
    """
    basis = np.asarray(basis, dtype=float)
    n, k = basis.shape
    if np.max(np.abs(basis.T @ basis - np.eye(k))) > 1e-8:
        raise ValueError("basis columns must be orthonormal")
    if mode == "lp":
        rng = as_rng(seed)
        coeffs = rng.standard_normal((num_samples, k))
        patterns = {_sign_pattern(basis @ c) for c in coeffs}
        return _count_compatible(patterns, n)
    if mode != "exhaustive":
        raise ValueError(f"unknown mode {mode!r}")
    if n > 20:
        raise ValueError("exhaustive orthant counting is guarded to n <= 20")
    if k >= n:
        return 2**n
    if k <= 3:
        return _count_compatible(_realized_patterns(basis), n)
    # general k: depth-first over sign prefixes with LP pruning
    count = 0
    stack = [()]
    while stack:
        signs = stack.pop()
        rows = np.array([s * basis[i] for i, s in enumerate(signs)]) \
            if signs else np.zeros((0, k))
        if signs and not _cone_has_nonzero(rows):
            continue
        if len(signs) == n:
            count += 1
            continue
        stack.append(signs + (1.0,))
        stack.append(signs + (-1.0,))
    return count


def orthant_count_bound(n: int, k: int) -> int:
    """2^k * C(n, k), the combinatorial ceiling on the orthant count."""
    return 2**k * math.comb(n, k)


def relu_image_dim(basis: np.ndarray, orthant_signs: Sequence[int]) -> int:
    """Dimension of span{rect(v) : v in subspace and in the given orthant}.

    Rectification zeroes the coordinates with nonpositive sign, so the span
    is contained in the image of the positive-coordinate mask applied to the
    basis; its dimension never exceeds min(k, #positive signs).
    """
    basis = np.asarray(basis, dtype=float)
    signs = np.asarray(orthant_signs)
    if signs.shape[0] != basis.shape[0]:
        raise ValueError("sign vector length must match the ambient dimension")
    masked = basis[signs > 0, :]
    if masked.size == 0:
        return 0
    sv = np.linalg.svd(masked, compute_uv=False)
    if sv[0] <= 0.0:
        return 0
    return int(np.sum(sv > 1e-9 * sv[0]))


# ---------------------------------------------------------------------------
# Union width diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UnionWidthReport:
    union_mean: float
    union_stderr: float
    max_member_mean: float
    max_member_stderr: float
    sqrt_log_count: float

    @property
    def excess(self) -> float:
        """Width gained by taking the union over its widest member."""
        return self.union_mean - self.max_member_mean


def union_width_check(member_dims: Sequence[int], ambient_dim: int,
                      num_gaussians: int, seed,
                      bases: Optional[Sequence[np.ndarray]] = None
                      ) -> UnionWidthReport:
    """Width of a union of random subspaces against its widest member.

    Draws one random subspace per entry of `member_dims` (or uses the given
    bases), estimates the width of the union of their unit spheres and the
    maximum member width with an exact supremum per Gaussian draw, and
    reports sqrt(log N) as the combinatorial excess scale.
    """
    if len(member_dims) < 1:
        raise ValueError("need at least one member")
    rng = as_rng(seed)
    if bases is None:
        bases = [Subspace.random(ambient_dim, d, rng).basis
                 for d in member_dims]
    else:
        bases = [np.asarray(b, dtype=float) for b in bases]
    g = rng.standard_normal((num_gaussians, ambient_dim))
    per_member = np.stack([np.linalg.norm(g @ b, axis=1) for b in bases],
                          axis=1)
    union_sups = per_member.max(axis=1)
    means = per_member.mean(axis=0)
    best = int(np.argmax(means))
    stderrs = per_member.std(axis=0, ddof=1) / np.sqrt(num_gaussians)
    return UnionWidthReport(
        union_mean=float(union_sups.mean()),
        union_stderr=float(np.std(union_sups, ddof=1) / np.sqrt(num_gaussians)),
        max_member_mean=float(means[best]),
        max_member_stderr=float(stderrs[best]),
        sqrt_log_count=float(np.sqrt(np.log(len(bases)))),
    )


def oversampling_factor(mixing: np.ndarray, width_difference: float) -> float:
    """Stable rank of the mixing matrix over the squared width of T'."""
    if width_difference <= 0.0:
        raise ValueError("width must be positive")
    return stable_rank(mixing) / width_difference**2
