"""Two-level online stochastic mirror descent for bandits with graph feedback."""

from .env import (
    Adversary,
    ConstantAdversary,
    FixedSequenceAdversary,
    RunRecord,
    StochasticGapAdversary,
    play_game,
    reveal,
)
from .graph import FeedbackGraph, Observability, classify, greedy_packing_independent_set, incidence_graph
from .harness import ExperimentConfig, FitResult, bound_report, fit_exponent, run_experiment
from .mirror import Kind, PotentialSpec, SeparablePotential, local_norm_sq, mirror_step_simplex, unconstrained_step
from .osmd import TwoLevelState, block_losses, estimate_losses, plan_round, run_round, sample_arm, update
from .partition import (
    BlockLP,
    LegalPartition,
    build_c_corrupted,
    build_components_partition,
    build_hypercube_partition,
    solve_block_lp,
    validate,
)
from .realizations import (
    RealizationConfig,
    adaptive_schedule,
    baseline_schedule,
    hybrid_schedule,
    well_clustered_schedule,
)

__version__ = "0.1.0"
