"""Heat and work along Monte Carlo trajectories of a monitored, driven qubit.

A two-level system is driven along sigma_y, decays through sigma_minus, and
has the sigma_x quadrature of its fluorescence monitored by a homodyne
detector of efficiency eta.  The package integrates the conditional
(stochastic master equation) dynamics, splits every step into a unitary
(work) and a nonunitary (heat) sub-step, applies phase-locked or optimal
unitary feedback, and aggregates the per-trajectory ledgers into first-law
checks, work distributions and the generalized-Jarzynski efficacy.
"""

from .bloch import (
    EXCITED,
    GROUND,
    BlochState,
    EnergyScale,
    closed_rabi_probabilities,
    excited_population,
    ground_population,
    phase,
    purity,
    rotate_y,
)
from .config import NO_FEEDBACK, FeedbackConfig, SimConfig
from .ensemble import EnsembleResult, run_ensemble
from .feedback import DelayLine, apply_delay, optimal_control, phase_locked_control
from .oracle import LindbladSolution, closed_two_point_sample, ensemble_vs_oracle, lindblad_evolve
from .sme import (
    HomodyneSample,
    NumericalBlowupError,
    StepLedger,
    TrajectoryRecord,
    ito_step,
    renormalize,
    rng_for_trajectory,
    sample_homodyne,
    simulate_trajectory,
    split_step,
)
from .stats import (
    EfficacyResult,
    TransitionLedger,
    WorkDistribution,
    accumulate,
    efficacy_from_trajectories,
    first_law_residual,
    jarzynski_average,
    pearson_r,
    rabi_contrast,
    transition_probabilities,
    two_point_work_distribution,
)
from .experiments import run_efficacy_protocol, sweep_gain_offset

__version__ = "0.1.0"

__all__ = [
    "BlochState",
    "DelayLine",
    "EXCITED",
    "EfficacyResult",
    "EnergyScale",
    "EnsembleResult",
    "FeedbackConfig",
    "GROUND",
    "HomodyneSample",
    "LindbladSolution",
    "NO_FEEDBACK",
    "NumericalBlowupError",
    "SimConfig",
    "StepLedger",
    "TrajectoryRecord",
    "TransitionLedger",
    "WorkDistribution",
    "accumulate",
    "apply_delay",
    "closed_rabi_probabilities",
    "closed_two_point_sample",
    "efficacy_from_trajectories",
    "ensemble_vs_oracle",
    "excited_population",
    "first_law_residual",
    "ground_population",
    "ito_step",
    "jarzynski_average",
    "lindblad_evolve",
    "optimal_control",
    "pearson_r",
    "phase",
    "phase_locked_control",
    "purity",
    "rabi_contrast",
    "renormalize",
    "rng_for_trajectory",
    "rotate_y",
    "run_efficacy_protocol",
    "run_ensemble",
    "sample_homodyne",
    "simulate_trajectory",
    "split_step",
    "sweep_gain_offset",
    "transition_probabilities",
    "two_point_work_distribution",
    "__version__",
]
