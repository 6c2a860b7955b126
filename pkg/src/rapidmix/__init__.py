"""rapidmix: reversible finite Markov chains with exhaustive mixing
diagnostics, coupling harnesses, and samplers for bipartite matchings,
subgraph worlds, and convex bodies."""

from .chains import (
    Distribution,
    FiniteChain,
    chain_to_json,
    check_reversible,
    evolve,
    l1_distance,
    lazify,
    lazy_cycle_chain,
    lazy_hypercube_chain,
    load_chain_json,
    metropolize,
    mixing_time_exact,
    random_reversible_chain,
    relative_entropy,
    simulate,
    stationary,
)
from .coupling import (
    ContractionReport,
    CouplingRule,
    PathMetricGraph,
    coupling_tv_check,
    estimate_meet_prob,
    hypercube_coupling_rule,
    independent_coupling,
    meet_failure_curve,
    path_contraction_factor,
    path_coupling_bound,
    verify_marginals,
)
from .diagnostics import (
    BlockingFunction,
    ConductanceProfile,
    SpectralSummary,
    amplified_mixing_check,
    avcond_mixing_bound,
    blocking_conductance_of_set,
    build_bcf,
    cheeger_check,
    conductance_of_set,
    entropy_decay_report,
    ergodic_flow,
    global_conductance,
    spectral_summary,
    tv_bound_thm1,
)
from .geometry import (
    ConvexBody,
    LogConcaveDensity,
    WalkConfig,
    ball_body,
    ball_volume,
    ball_walk_step,
    coordinate_grid_chain,
    coordinate_walk_step,
    cube_body,
    halfspace_body,
    isoperimetry_halfspace_check,
    load_body_json,
    metropolis_walk_step,
    run_walk,
    uniform_in_ball,
    volume_estimate,
)
from .ising import (
    IsingProblem,
    SubgraphWorld,
    hamiltonian,
    load_ising_json,
    load_world_json,
    partition_exact,
    sample_subgraphs,
    subgraph_chain_explicit,
    subgraph_chain_step,
    subgraph_total_weight,
    subgraph_weight,
    subgraph_weight_table,
)
from .matchings import (
    BipartiteGraph,
    Matching,
    ModifiedWeights,
    broder_chain_explicit,
    broder_step,
    dense_check,
    enumerate_matchings,
    jsv_modified_weights,
    jsv_weighted_chain,
    load_matrix_json,
    maximum_matching,
    near_perfect_ratio,
    permanent_estimate,
    permanent_exact,
    sample_perfect_rejection,
)
from .rng import RandomSource

__version__ = "0.1.0"
