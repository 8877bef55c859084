"""Simulation and verification lab for critical totally-asymmetric
activated random walks, their flow process, and the avalanche scaling limit."""

from .errors import (
    ArwError,
    ConfigError,
    DomainMismatch,
    EmptyPath,
    EmptySample,
    GridTooCoarse,
    InvalidDistributionParams,
    MalformedInput,
    NonpositiveScale,
    RefinementBudgetExceeded,
    SeedCollision,
    SiteOutsideSupport,
    ToppleBudgetExceeded,
    ToppleIllegal,
    UnknownCheck,
    UnorderedStarts,
)
from .flow import (
    ArrowField,
    BlackPath,
    BluePath,
    FlowTrajectory,
    RedPath,
    SleepIndicatorStream,
    blue_paths,
    flow_marginal,
    flow_oracle,
    flow_trajectory,
    red_path,
    reset_seed_registry,
)
from .limit import (
    DiffusionParams,
    FidiRequest,
    HittingProfile,
    SampledPath,
    coalesce,
    limit_marginal,
    reflect,
    running_max_bm,
    sample_fidi,
    sample_limit_path,
)
from .model import (
    SLEEPING,
    Configuration,
    EtaDistribution,
    Instruction,
    InstructionField,
    ModelParams,
    Odometer,
    sample_eta,
    stabilize,
    topple,
    twopoint_zeta_for_rho,
)
from .randomness import derive_seed, hash_u64, make_generator, threshold_u64
from .stats import (
    JumpSummary,
    KSResult,
    extract_jumps,
    half_normal_cdf,
    kolmogorov_sf,
    ks_one_sample,
    ks_two_sample,
    self_similarity_check,
)

__version__ = "0.1.0"
