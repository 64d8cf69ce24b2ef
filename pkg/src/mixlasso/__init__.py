"""Structured signal recovery with mixed sub-gaussian measurements.

A library plus experiment CLI for recovery problems y = B A x + w where B is
a fixed mixing matrix and A has independent sub-gaussian rows: construction
and sampling of the measurement ensembles, structure sets (sparse cones,
subspaces, unions, ReLU-network ranges) with projections and solvers,
Gaussian mean-width estimation and counting bounds, and a seeded Monte Carlo
harness with CSV output.
"""

from .ensembles import (
    MixingSpec,
    RowDistribution,
    build_mixing,
    estimate_subgaussian_constant,
    identity_family,
    sample_rows,
    stable_rank,
)
from .geometry import (
    NetworkWidthBound,
    UnionWidthReport,
    WidthEstimate,
    count_orthants,
    finite_set_width,
    network_width_bound,
    orthant_count_bound,
    oversampling_factor,
    relu_image_dim,
    union_width_check,
    width_mc,
)
from .harness import (
    ConcentrationReport,
    ExperimentConfig,
    TrialResult,
    fit_slope,
    run_trial,
    sweep,
    verify_concentration,
)
from .solvers import (
    SolveOptions,
    SolveReport,
    exhaustive_sparse_minimum,
    solve_lasso,
    solve_with_gap_target,
)
from .structures import (
    LinearRegion,
    NetworkRange,
    Projection,
    ProjectOptions,
    ReluNetwork,
    SparseCone,
    StructureSpec,
    Subspace,
    SubspaceUnion,
    build_structure,
    distance,
    enumerate_regions,
    load_network,
    project,
    sample_point,
    save_network,
)

__version__ = "0.1.0"
