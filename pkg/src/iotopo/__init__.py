"""iotopo: anchor-free IoT network localization and transmit-power
topology extraction.

Pipeline: generate a deployment, measure noisy pairwise distances,
decompose the measurement graph into globally rigid patches, embed each
patch (distance completion + classical MDS + majorization), stitch the
patches by eigenvector synchronization of reflections and rotations
plus a least-squares translation solve, then extract a communication
topology (iterative SNR-driven extraction, LMST, or brute-force grid
search) under an SNR-threshold link model.
"""

from .errors import (
    ConfigError,
    DegenerateConfiguration,
    DegenerateOverlap,
    DisconnectedPatch,
    EmptyInput,
    EmptyNetwork,
    Infeasible,
    InvalidCount,
    InvalidRegion,
    IotopoError,
    LengthMismatch,
    NonPositivePower,
    NotConverged,
    RankDeficient,
    UnlocalizableGraph,
    ZeroDistance,
    ZeroEigenvectorComponent,
)
from .scenario import Deployment, MeasurementGraph, generate_annulus, generate_rectangle, measure
from .rigidity import Patch, PatchSet, decompose, is_globally_rigid, is_rigid
from .embed import (
    CompletedDistances,
    MdsDecomposition,
    classical_mds,
    complete_distances,
    embed_patch,
    refine_majorization,
)
from .sync import (
    LocalizationResult,
    PairAlignment,
    SyncState,
    align_pair,
    localize,
    solve_translations,
    sync_reflections,
    sync_rotations,
)
from .radio import (
    OFF,
    PowerAssignment,
    RadioParams,
    assign_power_lp,
    dbm_to_mw,
    is_detectable,
    link_snr,
    mw_to_dbm,
    transmission_range_km,
)
from .topo import (
    Topology,
    avg_node_degree,
    brute_force,
    extract,
    lmst,
    max_nt_top,
    network_throughput,
)
from .metrics import RunReport, aggregate, procrustes_error
from .harness import ExperimentConfig, load_config, run

__version__ = "0.1.0"
