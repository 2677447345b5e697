"""Extended D-stability certification for non-square gain matrices.

Certifies decentralized integral controllability of systems with more
inputs than outputs: every square column-selection of the partitioned gain
gets its own diagonal Lyapunov certificate, a combinatorial weight
construction stitches the certificates into a witness for any positive
scaling, randomized sampling hunts for counterexamples, and a
singular-perturbation closed-loop simulation validates the conclusions at
system level.
"""

from .core import (
    ActiveSet,
    DocumentError,
    MixingMatrix,
    PartitionedGain,
    ScalingDiagonal,
    active_mask,
    apply_scaling,
    block_offset,
    flat_index,
    gain_document,
    kbar_matrix,
    load_gain,
    read_gain_document,
)
from .dstab import (
    AggregateWitness,
    CertifyReport,
    Counterexample,
    FalsifyOutcome,
    SamplerConfig,
    assemble_witness,
    falsify,
    falsify_scan,
    full_certify,
    match_ek,
)
from .pairing import (
    PairingAssignment,
    PairingReport,
    enumerate_assignments,
    evaluate_pairing,
    greedy_assignment,
    rank_pairings,
    surjection_count,
)
from .sim import (
    ClosedLoop,
    EtaSweep,
    PlantRealization,
    Trajectory,
    closed_loop_matrix,
    eta_threshold,
    quasi_steady_state_check,
    read_plant_document,
    reduced_model_matrix,
    simulate,
    steady_state_gain,
    trajectory_csv,
)
from .squared import (
    SquaredSelection,
    count_selections,
    enumerate_selections,
    extract_squared,
    selection_rank,
)
from .vl import (
    VlCertificate,
    VlVerdict,
    all_certified,
    certify_individual_vl,
    check_column_dominance,
    check_vl,
    collect_certificates,
    overall_status,
    verify_certificate,
)
from .weights import (
    WeightProblem,
    WeightSystem,
    construct_weights,
    payoff,
    verify_ratios,
)

__version__ = "0.1.0"
