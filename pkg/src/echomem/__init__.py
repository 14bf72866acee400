"""Cavity-assisted multimode quantum memory with processing nodes.

Closed-form spectral efficiencies, intracavity transfer dynamics, and a
brute-force time-domain oracle that cross-validates all of it.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DegenerateRootError,
    EchoMemError,
    IntegrationError,
    LevelNotAttainedError,
    ModeOverlapError,
    NormalizationError,
    QuadratureError,
    RootFindingError,
    SingularEvaluationError,
    ThresholdError,
)
from .params import (
    DerivedQuantities,
    MemoryNodeSpec,
    NetworkSpec,
    ProcessingNodeSpec,
    RateParams,
    SignalModeSpec,
    UnitSystem,
    derived_quantities,
    matched_network,
    symmetric_processors,
    validate_network,
)
from .spectral import (
    EchoTrace,
    EfficiencyReport,
    SpectralResponse,
    bandwidth_metric,
    build_response,
    cavity_response,
    dispersion_shift,
    echo_time_trace,
    matched_form_efficiency,
    mode_amplitude,
    mode_density,
    mode_time_profile,
    narrowband_storage,
    optimal_broadening,
    processing_dispersion,
    rebalance_detunings,
    retrieval_efficiency_mode,
    spectral_efficiency,
    storage_efficiency_mode,
    total_memory_efficiency,
)
from .transfer import (
    CubicRoots,
    ReversalSnapshot,
    SelfModeParams,
    TransferConfig,
    TransferResult,
    cardano_roots,
    cavity_depopulation,
    characteristic_roots,
    dephasing_horizon,
    field_trace_values,
    mode_spectrum,
    normalization,
    overlap_integral_closed,
    response_kernel,
    self_mode,
    self_mode_trig,
    self_mode_values,
    time_reversal_map,
    transfer_efficiency,
)
from .oracle import (
    DiscretizedEnsemble,
    Schedule,
    ScheduleEvent,
    TrajectoryHistory,
    TrajectoryState,
    crib_flip,
    integrate_storage,
    integrate_transfer,
    rephasing_state,
    reversibility_check,
    sample_ensemble,
    storage_step_size,
    transfer_protocol,
)
from .sweeps import (
    FlatnessSearch,
    SweepGrid,
    SweepResult,
    config_fingerprint,
    evaluate_sweep,
    figure_dataset,
    find_threshold,
    optimize_flatness,
    q1_of_delta,
    retune_broadening,
)

__all__ = [name for name in dir() if not name.startswith("_")]
