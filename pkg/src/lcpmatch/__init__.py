"""Largest-common-point-set matching of 3D point sets under rigid motions.

Public surface: the geometry core (rigid motions, invariant keys, dihedral
intervals), preprocessing indexes, the exact voting algorithms, the
dihedral-angle tolerant matcher with pluggable pair sources, sampling
schemes, and the ground-truth oracle used for verification and instance
generation.
"""

from .da import MatchParams, da_exact, da_match, expander_da
from .errors import (
    ConstructionFailed,
    DegenerateBasis,
    DegeneratePair,
    DegreeTooSmall,
    EmptySet,
    LcpMatchError,
    NoCandidatePairs,
    NoCongruentTriplets,
    OverlappingSets,
    SizeMismatch,
    SpecInfeasible,
    TooFewPoints,
    TooLarge,
)
from .exact import (
    ExactParams,
    alignment,
    geometric_hashing,
    ght,
    ght_pair_based,
    motion_key,
    pose_clustering,
)
from .geometry import (
    AngleInterval,
    QuadKey,
    RigidMotion,
    compose,
    dihedral_interval,
    hausdorff,
    least_squares_motion,
    max_overlap_angle,
    min_interpoint_distance,
    motion_from_bases,
    pair_canonical_motion,
    quad_key,
    rotation_about_line,
    tolerant_precondition,
    triangle_key,
    union_intervals,
)
from .index import PairDict, TripletIndex, VoteTable, build_pair_dict, build_triplet_index
from .oracle import (
    GenSpec,
    Instance,
    OracleResult,
    Truth,
    bottleneck_distance,
    exact_lcp_bruteforce,
    generate_instance,
    verify_motion,
)
from .result import MatchResult
from .sampling import (
    AllPairs,
    Expander,
    ExpanderGraph,
    PairSource,
    Pigeonhole,
    diam_k,
    edges_between,
    estimate_lambda,
    materialize_pairs,
    pigeonhole_pairs,
    pigeonhole_triplets,
    random_regular_graph,
)

__version__ = "0.1.0"
