"""Structure sets.

The prior T is one of: a sparse cone, a linear subspace, a finite union of
subspaces, or the range of a (bias-free) ReLU network.  All four are closed
cones.  Each variant supports Euclidean projection (exact where the geometry
permits, multi-restart latent descent for network ranges), distance queries,
and seeded sampling of members.  The module also enumerates the linear
regions of small ReLU networks together with the subspace spanned by each
region's image.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .seeding import as_rng


# ---------------------------------------------------------------------------
# ReLU networks
# ---------------------------------------------------------------------------


class ReluNetwork:
    """Composition z -> act(W_d ... act(W_2 act(W_1 z))) with no biases.

    `act` is applied entrywise and includes the outermost layer.  The default
    act(u) = max(u, 0); a leaky slope may be supplied, keeping the map
    two-piece linear.  The map is positively homogeneous, so its range is a
    cone.
    """

    def __init__(self, weights: Sequence[np.ndarray], leak: float = 0.0):
        if len(weights) < 1:
            raise ValueError("network needs at least one layer")
        mats = []
        for i, w in enumerate(weights):
            w = np.array(w, dtype=float)
            if w.ndim != 2:
                raise ValueError(f"layer {i} weight must be a matrix")
            if mats and w.shape[1] != mats[-1].shape[0]:
                raise ValueError(
                    f"layer {i} expects input dim {mats[-1].shape[0]}, "
                    f"got {w.shape[1]}"
                )
            w.setflags(write=False)
            mats.append(w)
        if mats[0].shape[1] < 1:
            raise ValueError("latent dimension must be >= 1")
        self.weights = tuple(mats)
        self.leak = float(leak)

    @property
    def depth(self) -> int:
        return len(self.weights)

    @property
    def latent_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def dims(self) -> tuple:
        """(p_0, p_1, ..., p_depth) starting at the latent dimension."""
        return (self.latent_dim,) + tuple(w.shape[0] for w in self.weights)

    def _act(self, u: np.ndarray) -> np.ndarray:
        if self.leak == 0.0:
            return np.maximum(u, 0.0)
        return np.where(u > 0.0, u, self.leak * u)

    def forward(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float).reshape(-1)
        if z.shape[0] != self.latent_dim:
            raise ValueError(
                f"latent vector has dim {z.shape[0]}, expected {self.latent_dim}"
            )
        out = z
        for w in self.weights:
            out = self._act(w @ out)
        return out

    __call__ = forward

    def forward_with_masks(self, z: np.ndarray):
        """Forward pass recording the active (pre-activation > 0) masks."""
        z = np.asarray(z, dtype=float).reshape(-1)
        out = z
        masks = []
        for w in self.weights:
            pre = w @ out
            mask = pre > 0.0
            masks.append(mask)
            out = self._act(pre)
        return out, masks

    def activation_pattern(self, z: np.ndarray) -> tuple:
        _, masks = self.forward_with_masks(z)
        return tuple(tuple(bool(b) for b in m) for m in masks)

    def vjp(self, masks, upstream: np.ndarray) -> np.ndarray:
        """Pull a cotangent at the output back to the latent space.

        Units exactly at zero pre-activation use the inactive-side slope,
        matching the activation convention act(0) = 0.
        """
        g = np.asarray(upstream, dtype=float)
        for w, mask in zip(reversed(self.weights), reversed(masks)):
            slope = np.where(mask, 1.0, self.leak)
            g = w.T @ (g * slope)
        return g

    def linear_map(self, pattern) -> np.ndarray:
        """The output_dim x latent_dim matrix realizing one activation pattern."""
        mat = np.eye(self.latent_dim)
        for w, bits in zip(self.weights, pattern):
            slope = np.where(np.asarray(bits, dtype=bool), 1.0, self.leak)
            mat = (w @ mat) * slope[:, None]
        return mat

    @classmethod
    def random(cls, dims: Sequence[int], seed, leak: float = 0.0) -> "ReluNetwork":
        """Standard Gaussian weights for the given (p_0, ..., p_d) chain."""
        dims = [int(d) for d in dims]
        if len(dims) < 2:
            raise ValueError("need at least latent and output dimensions")
        rng = as_rng(seed)
        weights = [rng.standard_normal((dims[i + 1], dims[i]))
                   for i in range(len(dims) - 1)]
        return cls(weights, leak=leak)

    def describe(self) -> str:
        dims = "x".join(str(d) for d in self.dims)
        return f"relu-net({dims})" if self.leak == 0.0 else \
            f"leaky-net({dims} leak={self.leak:g})"


def save_network(network: ReluNetwork, path) -> None:
    """Plain-text serialization: dims, leak, then row-major weight blocks."""
    lines = ["dims " + " ".join(str(d) for d in network.dims),
             f"leak {network.leak!r}"]
    for i, w in enumerate(network.weights):
        lines.append(f"layer {i + 1}")
        for row in w:
            lines.append(" ".join(f"{x:.17g}" for x in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_network(path) -> ReluNetwork:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines or not lines[0].startswith("dims "):
        raise ValueError(f"{path}: expected a 'dims' header line")
    dims = [int(tok) for tok in lines[0].split()[1:]]
    leak = 0.0
    idx = 1
    if idx < len(lines) and lines[idx].startswith("leak "):
        leak = float(lines[idx].split()[1])
        idx += 1
    weights = []
    for layer in range(len(dims) - 1):
        if idx >= len(lines) or not lines[idx].startswith("layer"):
            raise ValueError(f"{path}: missing 'layer {layer + 1}' block")
        idx += 1
        rows = []
        for _ in range(dims[layer + 1]):
            rows.append([float(tok) for tok in lines[idx].split()])
            idx += 1
        weights.append(np.array(rows))
    return ReluNetwork(weights, leak=leak)


# ---------------------------------------------------------------------------
# Projections
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Projection:
    """Result of projecting a vector onto a structure set.

    `gap` upper-bounds how far `distance` may sit above the true minimum.
    It is zero (certified) for the exact variants and a reported, uncertified
    bound for network ranges.
    """

    point: np.ndarray
    distance: float
    gap: float


@dataclass(frozen=True)
class ProjectOptions:
    restarts: int = 10
    extra_restarts: Optional[int] = None  # defaults to `restarts`
    iterations: int = 500
    tol: float = 1e-9
    seed: int = 0

    def pool_sizes(self) -> Tuple[int, int]:
        extra = self.restarts if self.extra_restarts is None else self.extra_restarts
        return self.restarts, extra


DEFAULT_PROJECT_OPTIONS = ProjectOptions()


class StructureSet:
    """Base class; concrete variants implement project and sample_point."""

    ambient_dim: int

    def project(self, v: np.ndarray, opts: ProjectOptions = None) -> Projection:
        raise NotImplementedError

    def distance(self, v: np.ndarray, opts: ProjectOptions = None) -> float:
        return self.project(v, opts).distance

    def sample_point(self, rng, normalize: bool = False) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> str:
        raise NotImplementedError

    def _check_dim(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float).reshape(-1)
        if v.shape[0] != self.ambient_dim:
            raise ValueError(
                f"vector has dim {v.shape[0]}, expected {self.ambient_dim}"
            )
        return v

    def _normalized_sample(self, draw, normalize: bool) -> np.ndarray:
        for _ in range(100):
            x = draw()
            norm = np.linalg.norm(x)
            if norm > 0.0:
                return x / norm if normalize else x
        if normalize:
            raise ValueError("could not draw a nonzero point in 100 attempts")
        return x


class SparseCone(StructureSet):
    """Vectors with at most `sparsity` nonzero entries."""

    def __init__(self, ambient_dim: int, sparsity: int):
        if not 1 <= sparsity <= ambient_dim:
            raise ValueError("need 1 <= sparsity <= ambient_dim")
        self.ambient_dim = int(ambient_dim)
        self.sparsity = int(sparsity)

    def top_support(self, v: np.ndarray) -> np.ndarray:
        """Indices of the s largest-magnitude entries, ties by lowest index."""
        v = np.asarray(v, dtype=float)
        order = np.lexsort((np.arange(v.shape[0]), -np.abs(v)))
        return np.sort(order[: self.sparsity])

    def project(self, v, opts=None) -> Projection:
        v = self._check_dim(v)
        keep = self.top_support(v)
        point = np.zeros_like(v)
        point[keep] = v[keep]
        return Projection(point, float(np.linalg.norm(v - point)), 0.0)

    def sample_point(self, rng, normalize=False):
        rng = as_rng(rng)

        def draw():
            support = rng.choice(self.ambient_dim, self.sparsity, replace=False)
            x = np.zeros(self.ambient_dim)
            x[support] = rng.standard_normal(self.sparsity)
            return x

        return self._normalized_sample(draw, normalize)

    def describe(self) -> str:
        return f"sparse(n={self.ambient_dim} s={self.sparsity})"


class Subspace(StructureSet):
    def __init__(self, basis: np.ndarray):
        basis = np.array(basis, dtype=float)
        if basis.ndim != 2 or basis.shape[1] < 1:
            raise ValueError("basis must be an n x d matrix with d >= 1")
        gram = basis.T @ basis
        if np.max(np.abs(gram - np.eye(basis.shape[1]))) > 1e-10:
            raise ValueError("basis columns must be orthonormal to 1e-10")
        basis.setflags(write=False)
        self.basis = basis
        self.ambient_dim = basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def project(self, v, opts=None) -> Projection:
        v = self._check_dim(v)
        point = self.basis @ (self.basis.T @ v)
        return Projection(point, float(np.linalg.norm(v - point)), 0.0)

    def sample_point(self, rng, normalize=False):
        rng = as_rng(rng)
        return self._normalized_sample(
            lambda: self.basis @ rng.standard_normal(self.dim), normalize
        )

    @classmethod
    def random(cls, ambient_dim: int, dim: int, rng) -> "Subspace":
        rng = as_rng(rng)
        g = rng.standard_normal((ambient_dim, dim))
        q, r = np.linalg.qr(g)
        signs = np.sign(np.diag(r))
        signs[signs == 0] = 1.0
        return cls(q * signs)

    def describe(self) -> str:
        return f"subspace(n={self.ambient_dim} d={self.dim})"


class SubspaceUnion(StructureSet):
    def __init__(self, members: Sequence):
        subs = [m if isinstance(m, Subspace) else Subspace(m) for m in members]
        if not subs:
            raise ValueError("union needs at least one member")
        n = subs[0].ambient_dim
        if any(s.ambient_dim != n for s in subs):
            raise ValueError("union members must share the ambient dimension")
        self.members = tuple(subs)
        self.ambient_dim = n

    def best_member(self, v: np.ndarray) -> Tuple[int, Projection]:
        v = self._check_dim(v)
        best_idx, best = 0, self.members[0].project(v)
        for i, member in enumerate(self.members[1:], start=1):
            proj = member.project(v)
            if proj.distance < best.distance:
                best_idx, best = i, proj
        return best_idx, best

    def project(self, v, opts=None) -> Projection:
        return self.best_member(v)[1]

    def sample_point(self, rng, normalize=False):
        rng = as_rng(rng)

        def draw():
            member = self.members[int(rng.integers(len(self.members)))]
            return member.basis @ rng.standard_normal(member.dim)

        return self._normalized_sample(draw, normalize)

    def describe(self) -> str:
        dims = " ".join(str(m.dim) for m in self.members)
        return f"union(n={self.ambient_dim} dims=[{dims}])"


class NetworkRange(StructureSet):
    """Range of a ReLU network; projection is approximate latent descent."""

    def __init__(self, network: ReluNetwork):
        self.network = network
        self.ambient_dim = network.output_dim

    def _descend(self, objective_grad, z0: np.ndarray, iterations: int, tol: float):
        """First-order descent with per-iteration step halving.

        `objective_grad(z)` returns (value, gradient).  Returns (z, value).
        """
        z = z0.copy()
        value, grad = objective_grad(z)
        for _ in range(iterations):
            step = 1.0
            improved = False
            for _ in range(60):
                cand = z - step * grad
                cand_value, cand_grad = objective_grad(cand)
                if cand_value < value:
                    improved = True
                    break
                step *= 0.5
            if not improved:
                break
            rel_drop = (value - cand_value) / max(value, 1e-300)
            z, value, grad = cand, cand_value, cand_grad
            if rel_drop < tol:
                break
        return z, value

    def _fit_latent(self, objective_grad, opts: ProjectOptions,
                    forward_map=None, target=None):
        """Multi-restart minimization; the extra pool probes suboptimality.

        When `forward_map` and `target` are given, each restart direction is
        rescaled to the ray-optimal starting point: the network is positively
        homogeneous, so min_a ||target - a * forward_map(z)|| is closed form.
        Returns (best z over the main pool, its value, best value over the
        enlarged pool).  Ties resolve to the lowest restart index.
        """
        main, extra = opts.pool_sizes()
        if main < 1:
            raise ValueError("latent descent needs at least one restart")
        rng = as_rng(opts.seed)
        k = self.network.latent_dim
        best_z, best_value = None, np.inf
        best_all = np.inf
        for r in range(main + extra):
            z0 = rng.standard_normal(k)
            if forward_map is not None:
                z0 = self._ray_optimal_start(z0, forward_map, target)
            z, value = self._descend(objective_grad, z0, opts.iterations, opts.tol)
            if r < main and value < best_value:
                best_z, best_value = z, value
            best_all = min(best_all, value)
        return best_z, best_value, best_all

    @staticmethod
    def _ray_optimal_start(z0, forward_map, target):
        best_z, best_resid = z0, np.inf
        for cand in (z0, -z0):
            out = forward_map(cand)
            energy = float(out @ out)
            if energy <= 0.0:
                continue
            scale = float(target @ out) / energy
            if scale <= 0.0:
                continue
            resid = float(np.sum((target - scale * out) ** 2))
            if resid < best_resid:
                best_z, best_resid = scale * cand, resid
        return best_z

    def project(self, v, opts=None) -> Projection:
        v = self._check_dim(v)
        opts = opts or DEFAULT_PROJECT_OPTIONS
        net = self.network

        def objective_grad(z):
            out, masks = net.forward_with_masks(z)
            resid = out - v
            return float(resid @ resid), net.vjp(masks, 2.0 * resid)

        z, value, value_all = self._fit_latent(objective_grad, opts,
                                               forward_map=net.forward,
                                               target=v)
        achieved = float(np.sqrt(max(value, 0.0)))
        best = float(np.sqrt(max(value_all, 0.0)))
        return Projection(net.forward(z), achieved, max(achieved - best, 0.0))

    def sample_point(self, rng, normalize=False):
        rng = as_rng(rng)
        k = self.network.latent_dim
        return self._normalized_sample(
            lambda: self.network.forward(rng.standard_normal(k)), normalize
        )

    def describe(self) -> str:
        return f"range({self.network.describe()})"


def project(structure: StructureSet, v, opts: ProjectOptions = None) -> Projection:
    return structure.project(v, opts)


def distance(structure: StructureSet, v, opts: ProjectOptions = None) -> float:
    return structure.distance(v, opts)


def sample_point(structure: StructureSet, rng, normalize: bool = False):
    return structure.sample_point(rng, normalize)


# ---------------------------------------------------------------------------
# Linear region enumeration
# ---------------------------------------------------------------------------
#
# Activation patterns are enumerated layer by layer.  A region is a cone in
# latent space cut out by half-space constraints; a unit chosen "active"
# contributes the open side (enforced with a small margin on the normalized
# row), a unit chosen "inactive" the closed side, matching act(0) = 0.
# Patterns whose feasible cone contains no nonzero point are pruned, so the
# all-zero latent point alone never spawns a region.  Feasibility is analytic
# for latent dimension 1 (sign branches) and 2 (circular arcs); dimension 3
# falls back to linear programming.

_MARGIN = 1e-9
_TWO_PI = 2.0 * np.pi


class _RaySet:
    """Feasible directions in R^1: subsets of {+1, -1}."""

    def __init__(self, plus=True, minus=True):
        self.plus, self.minus = plus, minus

    def constrain(self, row, active):
        a = float(row[0])
        scale = abs(a)
        plus, minus = self.plus, self.minus
        if active:
            if scale <= 0.0:
                return _RaySet(False, False)
            plus = plus and a > 0.0
            minus = minus and a < 0.0
        else:
            plus = plus and a <= 0.0
            minus = minus and -a <= 0.0
        return _RaySet(plus, minus)

    def has_nonzero(self) -> bool:
        return self.plus or self.minus

    def witness(self) -> np.ndarray:
        return np.array([1.0 if self.plus else -1.0])


class _ArcSet:
    """Feasible directions in R^2 as closed arcs [lo, hi] on the circle."""

    def __init__(self, arcs=None):
        self.arcs = [(0.0, _TWO_PI)] if arcs is None else arcs

    @staticmethod
    def _intersect_one(arc, lo, hi):
        """Intersect one arc with the window [lo, hi] (hi - lo <= 2*pi)."""
        a_lo, a_hi = arc
        pieces = []
        for shift in (-_TWO_PI, 0.0, _TWO_PI):
            w_lo, w_hi = lo + shift, hi + shift
            p_lo, p_hi = max(a_lo, w_lo), min(a_hi, w_hi)
            if p_lo <= p_hi:
                pieces.append((p_lo, p_hi))
        return pieces

    def constrain(self, row, active):
        norm = float(np.hypot(row[0], row[1]))
        if norm <= 0.0:
            return _ArcSet(list(self.arcs)) if not active else _ArcSet([])
        phi = float(np.arctan2(row[1], row[0]))
        if active:
            # cos(theta - phi) >= margin on the unit circle
            half = np.pi / 2.0 - _MARGIN
            lo, hi = phi - half, phi + half
        else:
            lo, hi = phi + np.pi / 2.0, phi + 3.0 * np.pi / 2.0
        out = []
        for arc in self.arcs:
            out.extend(self._intersect_one(arc, lo, hi))
        # normalize representatives into [0, 2*pi)
        canon = []
        for p_lo, p_hi in out:
            base = np.floor(p_lo / _TWO_PI) * _TWO_PI
            canon.append((p_lo - base, p_hi - base))
        canon.sort()
        merged = []
        for arc in canon:
            if merged and arc[0] <= merged[-1][1] + 1e-15:
                merged[-1] = (merged[-1][0], max(merged[-1][1], arc[1]))
            else:
                merged.append(arc)
        return _ArcSet(merged)

    def has_nonzero(self) -> bool:
        return bool(self.arcs)

    def witness(self) -> np.ndarray:
        widest = max(self.arcs, key=lambda a: a[1] - a[0])
        mid = 0.5 * (widest[0] + widest[1])
        return np.array([np.cos(mid), np.sin(mid)])


class _ConeLP:
    """Feasible directions in R^k (k >= 3) via linear programming."""

    def __init__(self, dim, rows=None):
        self.dim = dim
        self.rows = [] if rows is None else rows  # (unit_row, active)
        self._cache = None

    def constrain(self, row, active):
        row = np.asarray(row, dtype=float)
        norm = float(np.linalg.norm(row))
        if norm <= 0.0:
            if active:
                cone = _ConeLP(self.dim, list(self.rows))
                cone._cache = False
                return cone
            return _ConeLP(self.dim, list(self.rows))
        return _ConeLP(self.dim, self.rows + [(row / norm, active)])

    def _solve(self):
        from scipy.optimize import linprog

        if not self.rows:
            return np.ones(self.dim) / np.sqrt(self.dim)
        bounds = [(-1.0, 1.0)] * self.dim
        actives = [row for row, active in self.rows if active]
        inactives = [row for row, active in self.rows if not active]
        if actives:
            # maximize the worst active margin t; deciding on the achieved
            # objective is robust where a bare feasibility probe with a tiny
            # margin would drown in the solver's constraint tolerance
            k = self.dim
            A, b = [], []
            for row in actives:
                A.append(np.append(-row, 1.0))   # t <= row . z
                b.append(0.0)
            for row in inactives:
                A.append(np.append(row, 0.0))    # row . z <= 0
                b.append(0.0)
            cost = np.zeros(k + 1)
            cost[k] = -1.0
            res = linprog(cost, A_ub=np.array(A), b_ub=np.array(b),
                          bounds=bounds + [(0.0, 2.0)], method="highs")
            if res.status == 0 and res.x[k] >= _MARGIN:
                return res.x[:k]
            return None
        # no active units: look for a nonzero point of {C z <= 0}
        mat = np.array(inactives)
        res = linprog(mat.sum(axis=0), A_ub=mat, b_ub=np.zeros(len(inactives)),
                      bounds=bounds, method="highs")
        if res.status == 0 and res.fun < -1e-9:
            return res.x
        _, sv, vt = np.linalg.svd(mat)
        if sv.size < self.dim or sv[-1] <= 1e-12 * sv[0]:
            return vt[-1]
        return None

    def has_nonzero(self) -> bool:
        if self._cache is None:
            self._cache = self._solve() is not None
        return bool(self._cache)

    def witness(self) -> np.ndarray:
        w = self._solve()
        if w is None:
            raise ValueError("cone has no nonzero point")
        return w / np.linalg.norm(w)


def _full_cone(dim: int):
    if dim == 1:
        return _RaySet()
    if dim == 2:
        return _ArcSet()
    return _ConeLP(dim)


@dataclass(frozen=True)
class LinearRegion:
    """One activation pattern with a nonzero feasible latent witness."""

    pattern: tuple            # per layer, tuple of active bits
    basis: np.ndarray         # orthonormal basis of the image span (n x r)
    witness: np.ndarray       # nonzero latent point realizing the pattern

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def pattern_string(self) -> str:
        return "|".join("".join("1" if b else "0" for b in bits)
                        for bits in self.pattern)


def _span_basis(mat: np.ndarray, rel_tol: float = 1e-9) -> np.ndarray:
    u, sv, _ = np.linalg.svd(mat, full_matrices=False)
    if sv.size == 0 or sv[0] <= 0.0:
        return np.zeros((mat.shape[0], 0))
    rank = int(np.sum(sv > rel_tol * sv[0]))
    return u[:, :rank]


def enumerate_regions(network: ReluNetwork) -> List[LinearRegion]:
    """All feasible activation patterns of a small network.

    Returns one entry per pattern realizable on a nonzero latent cone, with
    the orthonormal basis of that pattern's image span.  Guarded to latent
    dimension <= 3 and at most 20 total units.
    """
    k = network.latent_dim
    total_units = sum(w.shape[0] for w in network.weights)
    if k > 3 or total_units > 20:
        raise ValueError(
            f"region enumeration is desk-scale only (latent dim <= 3, "
            f"<= 20 units); got dim {k} with {total_units} units"
        )
    regions = [(_full_cone(k), np.eye(k), ())]
    for w in network.weights:
        next_regions = []
        for cone, lin, pattern in regions:
            rows = w @ lin
            stack = [(cone, 0, ())]
            while stack:
                cur, j, bits = stack.pop()
                if j == rows.shape[0]:
                    slope = np.where(np.array(bits, dtype=bool), 1.0,
                                     network.leak)
                    next_regions.append(
                        (cur, rows * slope[:, None], pattern + (bits,))
                    )
                    continue
                # inactive pushed first so the active branch is explored first
                for choice in (False, True):
                    cand = cur.constrain(rows[j], choice)
                    if cand.has_nonzero():
                        stack.append((cand, j + 1, bits + (choice,)))
        regions = next_regions
    return [LinearRegion(pattern, _span_basis(lin), cone.witness())
            for cone, lin, pattern in regions]


def region_membership_residual(regions: Sequence[LinearRegion],
                               v: np.ndarray) -> float:
    """Distance from v to the nearest enumerated image span."""
    v = np.asarray(v, dtype=float)
    best = np.linalg.norm(v)
    for region in regions:
        if region.basis.shape[1] == 0:
            resid = np.linalg.norm(v)
        else:
            resid = np.linalg.norm(v - region.basis @ (region.basis.T @ v))
        best = min(best, float(resid))
    return best


def dump_regions_csv(regions: Sequence[LinearRegion], path) -> None:
    lines = ["pattern,dim"]
    lines += [f"{r.pattern_string()},{r.dim}" for r in regions]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Construction recipes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StructureSpec:
    """Reproducible recipe for a structure set.

    kind "sparse" needs `sparsity`; "subspace" needs `dim` and `seed`;
    "union" needs `member_dims` and `seed`; "network" needs either
    `network_path` or `network_dims` (latent first) plus `seed`.
    """

    kind: str
    ambient_dim: int
    sparsity: Optional[int] = None
    dim: Optional[int] = None
    member_dims: Optional[tuple] = None
    seed: Optional[int] = None
    network_dims: Optional[tuple] = None
    network_path: Optional[str] = None
    leak: float = 0.0

    def __post_init__(self):
        if self.kind not in ("sparse", "subspace", "union", "network"):
            raise ValueError(f"unknown structure kind {self.kind!r}")
        if self.kind == "sparse" and not self.sparsity:
            raise ValueError("sparse structure requires a sparsity level")
        if self.kind == "subspace" and (not self.dim or self.seed is None):
            raise ValueError("subspace structure requires dim and seed")
        if self.kind == "union":
            if not self.member_dims or self.seed is None:
                raise ValueError("union structure requires member_dims and seed")
            object.__setattr__(self, "member_dims",
                               tuple(int(d) for d in self.member_dims))
        if self.kind == "network":
            if self.network_path is None:
                if not self.network_dims or self.seed is None:
                    raise ValueError(
                        "network structure requires a path or dims plus seed"
                    )
                dims = tuple(int(d) for d in self.network_dims)
                if dims[-1] != self.ambient_dim:
                    raise ValueError("network output dim must match ambient dim")
                object.__setattr__(self, "network_dims", dims)

    def describe(self) -> str:
        if self.kind == "sparse":
            return f"sparse(n={self.ambient_dim} s={self.sparsity})"
        if self.kind == "subspace":
            return f"subspace(n={self.ambient_dim} d={self.dim} seed={self.seed})"
        if self.kind == "union":
            dims = " ".join(str(d) for d in self.member_dims)
            return f"union(n={self.ambient_dim} dims=[{dims}] seed={self.seed})"
        if self.network_path is not None:
            return f"network(n={self.ambient_dim} path={self.network_path})"
        dims = "x".join(str(d) for d in self.network_dims)
        return f"network(dims={dims} seed={self.seed})"


def build_structure(spec: StructureSpec) -> StructureSet:
    """Materialize a StructureSpec; deterministic given the spec."""
    if spec.kind == "sparse":
        return SparseCone(spec.ambient_dim, spec.sparsity)
    if spec.kind == "subspace":
        return Subspace.random(spec.ambient_dim, spec.dim, as_rng(spec.seed))
    if spec.kind == "union":
        rng = as_rng(spec.seed)
        members = [Subspace.random(spec.ambient_dim, d, rng)
                   for d in spec.member_dims]
        return SubspaceUnion(members)
    if spec.network_path is not None:
        network = load_network(spec.network_path)
    else:
        network = ReluNetwork.random(spec.network_dims, spec.seed,
                                     leak=spec.leak)
    if network.output_dim != spec.ambient_dim:
        raise ValueError("network output dim must match ambient dim")
    return NetworkRange(network)
