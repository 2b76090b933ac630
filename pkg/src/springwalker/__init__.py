"""Compliant bipedal walker models with variable leg stiffness control."""

from .control import (
    ErrorVector,
    GaitController,
    LieDerivatives,
    RefBundle,
    control_knee,
    control_swing,
    control_vslip,
    errors,
    lie_derivatives,
)
from .dynamics import energies, leg_length, mass_matrix, phase_terms, vector_fields
from .integrate import (
    IntegrationError,
    PassiveController,
    RunOutcome,
    SimTrace,
    integrate_step,
    run_gait,
)
from .metrics import GaitMetrics, cost_of_transport, gait_metrics
from .params import ControlGains, IntegratorConfig, WalkerParams
from .reference import (
    LimitCycle,
    ReferenceGait,
    RetractionReference,
    SwingReference,
    find_limit_cycle,
    fit_reference,
    make_retraction_reference,
    make_swing_reference,
)
from .state import ControlInput, HybridState, Model, Phase, VectorFieldBundle
from .transitions import (
    EventKind,
    GuardValue,
    TransitionEvent,
    apply_liftoff,
    apply_touchdown,
    liftoff_guard,
    touchdown_guard,
)

__version__ = "0.1.0"
