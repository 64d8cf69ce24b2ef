"""Structure sets: networks, projections, sampling, region enumeration."""

import itertools

import numpy as np
import pytest

from mixlasso.seeding import derive_rng
from mixlasso.structures import (
    NetworkRange,
    ProjectOptions,
    ReluNetwork,
    SparseCone,
    StructureSpec,
    Subspace,
    SubspaceUnion,
    build_structure,
    dump_regions_csv,
    enumerate_regions,
    load_network,
    region_membership_residual,
    save_network,
)


class TestReluNetwork:
    def test_shape_chain_validation(self):
        with pytest.raises(ValueError):
            ReluNetwork([np.ones((3, 2)), np.ones((4, 5))])

    def test_zero_weights(self):
        net = ReluNetwork([np.zeros((4, 2))])
        np.testing.assert_array_equal(net.forward([1.0, -2.0]), np.zeros(4))

    def test_single_layer_identity(self):
        net = ReluNetwork([np.eye(2)])
        np.testing.assert_array_equal(net.forward([1.0, -2.0]), [1.0, 0.0])

    def test_two_layer_hand_evaluated(self):
        # layer 1: rect((3, -3)) = (3, 0); layer 2: rect((3, 0)) = (3, 0)
        net = ReluNetwork([np.array([[1.0], [-1.0]]),
                           np.array([[1.0, 1.0], [0.0, 2.0]])])
        np.testing.assert_array_equal(net.forward([3.0]), [3.0, 0.0])

    def test_dims(self):
        net = ReluNetwork.random([2, 5, 3], 0)
        assert net.dims == (2, 5, 3)
        assert net.depth == 2
        assert net.latent_dim == 2
        assert net.output_dim == 3

    def test_positive_homogeneity(self):
        net = ReluNetwork.random([2, 4, 6], 13)
        rng = np.random.default_rng(1)
        for _ in range(10):
            z = rng.standard_normal(2)
            lam = float(rng.uniform(0, 3))
            np.testing.assert_allclose(net.forward(lam * z),
                                       lam * net.forward(z), atol=1e-12)

    def test_leaky_variant(self):
        net = ReluNetwork([np.eye(2)], leak=0.1)
        np.testing.assert_allclose(net.forward([1.0, -2.0]), [1.0, -0.2])

    def test_save_load_roundtrip(self, tmp_path):
        net = ReluNetwork.random([2, 3, 4], 99, leak=0.05)
        path = tmp_path / "net.txt"
        save_network(net, path)
        loaded = load_network(path)
        assert loaded.leak == net.leak
        for a, b in zip(loaded.weights, net.weights):
            np.testing.assert_array_equal(a, b)

    def test_dimension_mismatch_on_forward(self):
        net = ReluNetwork.random([2, 3], 0)
        with pytest.raises(ValueError):
            net.forward([1.0, 2.0, 3.0])


class TestSparseConeProjection:
    def test_example_keep_largest(self):
        proj = SparseCone(2, 1).project([3.0, -1.0])
        np.testing.assert_array_equal(proj.point, [3.0, 0.0])
        assert proj.distance == pytest.approx(1.0)
        assert proj.gap == 0.0

    def test_tie_break_lowest_index(self):
        proj = SparseCone(2, 1).project([2.0, -2.0])
        np.testing.assert_array_equal(proj.point, [2.0, 0.0])

    def test_matches_brute_force_over_supports(self):
        rng = np.random.default_rng(7)
        for n, s in [(6, 2), (9, 3), (12, 4)]:
            cone = SparseCone(n, s)
            for _ in range(20):
                v = rng.standard_normal(n)
                best = min(
                    np.linalg.norm(v - _restrict(v, sup))
                    for sup in itertools.combinations(range(n), s)
                )
                assert cone.project(v).distance == pytest.approx(best)

    def test_idempotent(self):
        cone = SparseCone(8, 3)
        v = np.random.default_rng(2).standard_normal(8)
        once = cone.project(v).point
        np.testing.assert_allclose(cone.project(once).point, once,
                                   atol=1e-10)

    def test_membership_distance_zero(self):
        cone = SparseCone(10, 2)
        x = cone.sample_point(np.random.default_rng(5))
        assert cone.distance(x) == 0.0

    def test_distance_example(self):
        assert SparseCone(2, 1).distance([3.0, 4.0]) == pytest.approx(3.0)

    def test_cone_scaling(self):
        cone = SparseCone(12, 3)
        rng = np.random.default_rng(11)
        for _ in range(10):
            v = rng.standard_normal(12)
            lam = float(rng.uniform(0, 4))
            np.testing.assert_allclose(cone.distance(lam * v),
                                       lam * cone.distance(v), rtol=1e-6,
                                       atol=1e-12)

    def test_closed_under_nonnegative_scaling(self):
        cone = SparseCone(10, 2)
        rng = np.random.default_rng(6)
        for _ in range(10):
            x = cone.sample_point(rng)
            assert cone.distance(3.7 * x) == 0.0
            assert cone.distance(0.0 * x) == 0.0


def _restrict(v, support):
    out = np.zeros_like(v)
    out[list(support)] = v[list(support)]
    return out


class TestSubspaceProjection:
    def test_example_axis(self):
        sub = Subspace(np.array([[1.0], [0.0]]))
        proj = sub.project([2.0, 5.0])
        np.testing.assert_allclose(proj.point, [2.0, 0.0])
        assert proj.distance == pytest.approx(5.0)

    def test_orthonormality_enforced(self):
        with pytest.raises(ValueError):
            Subspace(np.array([[1.0], [1.0]]))

    def test_idempotent(self):
        sub = Subspace.random(10, 3, np.random.default_rng(0))
        v = np.random.default_rng(1).standard_normal(10)
        once = sub.project(v).point
        np.testing.assert_allclose(sub.project(once).point, once, atol=1e-10)

    def test_sample_point_lies_in_subspace(self):
        sub = Subspace.random(12, 4, np.random.default_rng(3))
        x = sub.sample_point(np.random.default_rng(4))
        assert sub.distance(x) < 1e-10

    def test_normalized_sample(self):
        sub = Subspace.random(12, 4, np.random.default_rng(3))
        x = sub.sample_point(np.random.default_rng(4), normalize=True)
        assert np.linalg.norm(x) == pytest.approx(1.0)


class TestUnionProjection:
    def test_example_two_axes(self):
        union = SubspaceUnion([np.array([[1.0], [0.0]]),
                               np.array([[0.0], [1.0]])])
        proj = union.project([1.0, 4.0])
        np.testing.assert_allclose(proj.point, [0.0, 4.0])
        assert proj.distance == pytest.approx(1.0)

    def test_matches_member_brute_force(self):
        rng = np.random.default_rng(9)
        members = [Subspace.random(8, 2, rng) for _ in range(5)]
        union = SubspaceUnion(members)
        for _ in range(20):
            v = rng.standard_normal(8)
            best = min(m.project(v).distance for m in members)
            assert union.project(v).distance == pytest.approx(best)

    def test_sample_point_member(self):
        rng = np.random.default_rng(10)
        union = SubspaceUnion([Subspace.random(6, 2, rng) for _ in range(3)])
        x = union.sample_point(np.random.default_rng(11))
        assert union.distance(x) < 1e-10


class TestNetworkRangeProjection:
    def test_member_projects_to_itself(self):
        net = ReluNetwork.random([2, 4, 6], 11)
        structure = NetworkRange(net)
        x = net.forward(np.random.default_rng(9).standard_normal(2))
        proj = structure.project(x, ProjectOptions(seed=4))
        assert proj.distance < 1e-6
        assert proj.gap >= 0.0

    def test_perturbed_member_distance(self):
        net = ReluNetwork.random([2, 4, 6], 11)
        structure = NetworkRange(net)
        rng = np.random.default_rng(12)
        x = net.forward(rng.standard_normal(2))
        u = rng.standard_normal(6)
        u /= np.linalg.norm(u)
        d = structure.distance(x + 0.1 * u, ProjectOptions(seed=4))
        assert d <= 0.1 + 1e-6

    def test_sample_point_self_consistent(self):
        structure = NetworkRange(ReluNetwork.random([2, 3, 5], 21))
        x = structure.sample_point(np.random.default_rng(1), normalize=True)
        assert structure.distance(x, ProjectOptions(seed=2)) < 1e-6

    def test_cone_scaling_approximate(self):
        structure = NetworkRange(ReluNetwork.random([1, 3, 4], 8))
        rng = np.random.default_rng(3)
        opts = ProjectOptions(seed=5)
        for _ in range(5):
            v = rng.standard_normal(4)
            base = structure.distance(v, opts)
            lam = 2.5
            scaled = structure.distance(lam * v, opts)
            assert scaled == pytest.approx(lam * base, rel=1e-2, abs=1e-8)

    def test_zero_restarts_rejected(self):
        structure = NetworkRange(ReluNetwork.random([1, 2], 0))
        with pytest.raises(ValueError):
            structure.project(np.ones(2), ProjectOptions(restarts=0))


class TestRegionEnumeration:
    def test_zero_weight_model(self):
        regions = enumerate_regions(ReluNetwork([np.zeros((3, 2))]))
        assert len(regions) == 1
        assert regions[0].dim == 0

    def test_two_sided_single_column(self):
        # one latent variable feeding units (1, -1): two rays, two regions
        net = ReluNetwork([np.array([[1.0], [-1.0]])])
        regions = enumerate_regions(net)
        assert len(regions) == 2
        assert sorted(r.pattern_string() for r in regions) == ["01", "10"]
        assert all(r.dim == 1 for r in regions)
        # region count bound (2e/k)^d * prod(p) at k=1, d=1, p=2 is 4e
        assert len(regions) <= 4 * np.e

    @pytest.mark.parametrize("dims,seed", [([2, 4, 3], 17), ([3, 5], 2),
                                           ([3, 3, 4], 40)])
    def test_witness_realizes_pattern(self, dims, seed):
        net = ReluNetwork.random(dims, seed)
        for region in enumerate_regions(net):
            lin = net.linear_map(region.pattern)
            np.testing.assert_allclose(net.forward(region.witness),
                                       lin @ region.witness, atol=1e-9)

    @pytest.mark.parametrize("dims,seed", [([2, 4, 3], 17), ([3, 5], 2),
                                           ([2, 5, 4], 8)])
    def test_witness_constraints_strict(self, dims, seed):
        # active units strictly positive at the witness, inactive ones
        # nonpositive up to rounding; guards against solver-tolerance
        # artifacts in the feasibility backends
        net = ReluNetwork.random(dims, seed)
        for region in enumerate_regions(net):
            out = region.witness
            for w, bits in zip(net.weights, region.pattern):
                pre = w @ out
                for j, active in enumerate(bits):
                    scale = max(np.linalg.norm(w[j])
                                * np.linalg.norm(region.witness), 1e-30)
                    if active:
                        assert pre[j] > 0.0
                    else:
                        assert pre[j] <= 1e-9 * scale
                out = np.maximum(pre, 0.0)

    @pytest.mark.parametrize("dims,seed", [([2, 3, 5], 1), ([3, 4], 6),
                                           ([1, 5, 3], 12)])
    def test_sampled_patterns_all_enumerated(self, dims, seed):
        # forward patterns at many scales must appear among the regions
        net = ReluNetwork.random(dims, seed)
        patterns = {r.pattern for r in enumerate_regions(net)}
        rng = derive_rng(90, seed)
        for _ in range(200):
            z = rng.standard_normal(dims[0]) * float(rng.choice([0.01, 1, 100]))
            assert net.activation_pattern(z) in patterns

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_forward_evals_covered(self, seed):
        rng = derive_rng(40, seed)
        dims = [1, 3, 4]
        net = ReluNetwork.random(dims, seed)
        regions = enumerate_regions(net)
        for _ in range(20):
            z = rng.standard_normal(1)
            assert region_membership_residual(regions, net.forward(z)) < 1e-8

    def test_latent_dim_three_lp_path(self):
        net = ReluNetwork.random([3, 4], 5)
        regions = enumerate_regions(net)
        assert len(regions) >= 2
        rng = np.random.default_rng(6)
        for _ in range(20):
            z = rng.standard_normal(3)
            assert region_membership_residual(regions, net.forward(z)) < 1e-8

    def test_subspace_dims_bounded_by_latent(self):
        net = ReluNetwork.random([2, 5, 6], 23)
        assert all(r.dim <= 2 for r in enumerate_regions(net))

    def test_scale_guard(self):
        with pytest.raises(ValueError):
            enumerate_regions(ReluNetwork.random([4, 4], 0))
        with pytest.raises(ValueError):
            enumerate_regions(ReluNetwork.random([2, 12, 12], 0))

    def test_regions_csv(self, tmp_path):
        regions = enumerate_regions(ReluNetwork([np.array([[1.0], [-1.0]])]))
        path = tmp_path / "regions.csv"
        dump_regions_csv(regions, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "pattern,dim"
        assert len(lines) == 3


class TestStructureSpec:
    def test_build_sparse(self):
        spec = StructureSpec("sparse", 10, sparsity=2)
        structure = build_structure(spec)
        assert isinstance(structure, SparseCone)

    def test_build_deterministic(self):
        spec = StructureSpec("union", 16, member_dims=(2, 3), seed=5)
        a = build_structure(spec)
        b = build_structure(spec)
        for ma, mb in zip(a.members, b.members):
            assert ma.basis.tobytes() == mb.basis.tobytes()

    def test_network_from_file(self, tmp_path):
        net = ReluNetwork.random([1, 2, 3], 3)
        path = tmp_path / "net.txt"
        save_network(net, path)
        spec = StructureSpec("network", 3, network_path=str(path))
        structure = build_structure(spec)
        assert isinstance(structure, NetworkRange)
        assert structure.network.dims == (1, 2, 3)

    def test_validation(self):
        with pytest.raises(ValueError):
            StructureSpec("sparse", 10)
        with pytest.raises(ValueError):
            StructureSpec("subspace", 10, dim=2)
        with pytest.raises(ValueError):
            StructureSpec("banana", 10)

    def test_sparse_sample_support(self):
        structure = build_structure(StructureSpec("sparse", 10, sparsity=2))
        x = structure.sample_point(np.random.default_rng(0))
        assert np.count_nonzero(x) <= 2
