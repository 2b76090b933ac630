"""Error functions, Lie derivatives and the stiffness control laws.

Every controlled output is "reference minus coordinate", so its second
time derivative along the closed loop is

    hddot = (reference terms) - qddot[k],   qddot = a(q, p) + Gq(q) u,

which reduces all Lie-derivative computations to the acceleration-level
pieces produced by `dynamics.phase_terms`.  The chain rule through the
q1-parameterized hip reference adds the d(q2*)/dq1 terms to the h1
channel.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dynamics import PhaseTerms, leg_length, phase_terms
from .params import ControlGains, WalkerParams
from .reference import (
    ReferenceGait,
    RetractionReference,
    SwingReference,
    make_retraction_reference,
    make_swing_reference,
)
from .state import ControlInput, HybridState, Model, Phase, StateError
from .transitions import EventKind, TransitionEvent

logger = logging.getLogger(__name__)


class BackwardMotionFault(StateError):
    """The reference lookup requires strictly forward hip motion."""


@dataclass(frozen=True)
class RefBundle:
    """Active references: the fitted hip curve plus per-step polynomials."""

    gait: ReferenceGait
    swing: SwingReference | None = None
    retraction: RetractionReference | None = None


@dataclass(frozen=True)
class ErrorVector:
    """Tracking errors; h3/h4 are reported as zero where undefined."""

    h1: float           # hip-height error (m)
    h2: float           # forward-speed error (m/s)
    h3: float = 0.0     # swing-angle error (rad)
    h4: float = 0.0     # swing-leg length error (m)
    h1_dot: float = 0.0
    h3_dot: float = 0.0
    h4_dot: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.h1, self.h2, self.h3, self.h4])


@dataclass(frozen=True)
class LieDerivatives:
    """Closed-form Lie derivatives of the error functions at one state.

    The lg_* arrays have one entry per input field of the phase.
    """

    lf_h1: float
    lf2_h1: float
    lg_lf_h1: np.ndarray
    lf_h2: float
    lg_h2: np.ndarray
    lf_h3: float | None = None
    lf2_h3: float | None = None
    lg_lf_h3: np.ndarray | None = None
    lf_h4: float | None = None
    lf2_h4: float | None = None
    lg_lf_h4: np.ndarray | None = None


def errors(
    state: HybridState,
    refs: RefBundle,
    t: float,
    params: WalkerParams,
    *,
    strict: bool = True,
    terms: PhaseTerms | None = None,
) -> ErrorVector:
    """Evaluate the tracking errors at a state.

    With `strict`, non-forward hip motion raises BackwardMotionFault
    (the q1 parameterization of the reference breaks down there).
    """
    if terms is None:
        terms = phase_terms(state, params)
    q = state.q
    qdot = terms.qdot
    if strict and qdot[0] <= 0.0:
        raise BackwardMotionFault(f"forward velocity {qdot[0]:.4f} <= 0")
    gait = refs.gait
    h1 = gait.q2_series.value(q[0]) - q[1]
    h1_dot = gait.q2_series.d1(q[0]) * qdot[0] - qdot[1]
    h2 = gait.qd1_series.value(q[0]) - qdot[0]
    h3 = h3_dot = h4 = h4_dot = 0.0
    if state.phase in (Phase.SINGLE_SUPPORT_SWING, Phase.SINGLE_SUPPORT_KNEE):
        if refs.swing is None:
            raise StateError("no swing reference active in single support")
        h3 = refs.swing.value(t) - q[2]
        h3_dot = refs.swing.d1(t) - qdot[2]
    if state.phase is Phase.SINGLE_SUPPORT_KNEE:
        if refs.retraction is None:
            raise StateError("no retraction reference active in single support")
        h4 = refs.retraction.value(t) - q[3]
        h4_dot = refs.retraction.d1(t) - qdot[3]
    return ErrorVector(h1, h2, h3, h4, h1_dot, h3_dot, h4_dot)


def lie_derivatives(
    state: HybridState,
    refs: RefBundle,
    t: float,
    params: WalkerParams,
    terms: PhaseTerms | None = None,
) -> LieDerivatives:
    """Closed-form Lie derivatives of every error defined in the phase."""
    if terms is None:
        terms = phase_terms(state, params)
    q = state.q
    qdot, a, Gq = terms.qdot, terms.accel, terms.Gq
    gait = refs.gait
    r1 = gait.q2_series.d1(q[0])
    r2 = gait.q2_series.d2(q[0])
    lf_h1 = r1 * qdot[0] - qdot[1]
    lf2_h1 = r2 * qdot[0] * qdot[0] + r1 * a[0] - a[1]
    lg_lf_h1 = r1 * Gq[0, :] - Gq[1, :]
    s1 = gait.qd1_series.d1(q[0])
    lf_h2 = s1 * qdot[0] - a[0]
    lg_h2 = -Gq[0, :]
    out = dict(lf_h1=lf_h1, lf2_h1=lf2_h1, lg_lf_h1=lg_lf_h1, lf_h2=lf_h2, lg_h2=lg_h2)
    if state.phase in (Phase.SINGLE_SUPPORT_SWING, Phase.SINGLE_SUPPORT_KNEE):
        swing = refs.swing
        out.update(
            lf_h3=swing.d1(t) - qdot[2],
            lf2_h3=swing.d2(t) - a[2],
            lg_lf_h3=-Gq[2, :],
        )
    if state.phase is Phase.SINGLE_SUPPORT_KNEE:
        retr = refs.retraction
        out.update(
            lf_h4=retr.d1(t) - qdot[3],
            lf2_h4=retr.d2(t) - a[3],
            lg_lf_h4=-Gq[3, :],
        )
    return LieDerivatives(**out)


def in_rest_length_band(state: HybridState, params: WalkerParams) -> bool:
    """True when either double-support leg is within L_e of rest length.

    Inside this band the height-only pseudo-inverse law is active and the
    forward-speed channel is uncontrolled.
    """
    if state.phase is not Phase.DOUBLE_SUPPORT:
        return False
    margin = params.L_0 - params.L_e
    return (
        leg_length(state.q, state.c1) >= margin
        or leg_length(state.q, state.c2) >= margin
    )


def _clamp_stiffness(u: float, params: WalkerParams) -> tuple[float, bool]:
    lo = params.k_min - params.k_0
    hi = params.k_max - params.k_0
    if u < lo:
        return lo, True
    if u > hi:
        return hi, True
    return u, False


def control_vslip(
    state: HybridState,
    err: ErrorVector,
    lies: LieDerivatives,
    gains: ControlGains,
    params: WalkerParams,
) -> ControlInput:
    """Stiffness law for the massless-leg walker.

    Single support regulates the hip height with the stance spring alone.
    Double support uses the full decoupling law in the interior and falls
    back to the minimum-norm (pseudo-inverse) height law inside the
    rest-length margin, where one leg is nearly uncontrollable.
    """
    b1 = lies.lf2_h1 + gains.kappa_d * lies.lf_h1 + gains.kappa_p * err.h1
    if state.phase is Phase.SINGLE_SUPPORT_VSLIP:
        denom = float(lies.lg_lf_h1[0])
        # Zero authority only at exact rest length, which the stance
        # extension guard terminates; keep the division safe regardless.
        u_raw = -b1 / denom if denom != 0.0 else 0.0
        u1, clamped = _clamp_stiffness(u_raw, params)
        return ControlInput(u1=u1, clamped=clamped)

    if state.phase is not Phase.DOUBLE_SUPPORT:
        raise StateError(f"vslip law does not apply in {state.phase}")
    A1 = lies.lg_lf_h1
    if in_rest_length_band(state, params):
        u_vec = _height_only_ds(A1, b1)
    else:
        A = np.vstack([A1, lies.lg_h2])
        b = np.array([b1, lies.lf_h2 + gains.kappa_v * err.h2])
        det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
        if abs(det) < 1e-8:
            logger.warning(
                "decoupling matrix ill-conditioned (det=%.3e) at q1=%.3f; "
                "falling back to height-only law", det, state.q[0],
            )
            u_vec = _height_only_ds(A1, b1)
        else:
            u_vec = -np.linalg.solve(A, b)
    u1, c1 = _clamp_stiffness(float(u_vec[0]), params)
    u2, c2 = _clamp_stiffness(float(u_vec[1]), params)
    return ControlInput(u1=u1, u2=u2, clamped=c1 or c2)


def _height_only_ds(A1: np.ndarray, b1: float) -> np.ndarray:
    """Minimum-norm stiffness pair enforcing the hip-height channel only."""
    nrm = float(A1 @ A1)
    if nrm < 1e-20:
        return np.zeros(2)
    return -A1 * (b1 / nrm)


def _clamp_torque(tau: float, gains: ControlGains) -> tuple[float, bool]:
    if tau > gains.tau_max:
        return gains.tau_max, True
    if tau < -gains.tau_max:
        return -gains.tau_max, True
    return tau, False


def control_swing(
    state: HybridState,
    err: ErrorVector,
    lies: LieDerivatives,
    gains: ControlGains,
    params: WalkerParams,
) -> ControlInput:
    """Decoupling law for stance stiffness and swing hip torque."""
    if state.phase is not Phase.SINGLE_SUPPORT_SWING:
        raise StateError(f"swing law does not apply in {state.phase}")
    A = np.vstack([lies.lg_lf_h1, lies.lg_lf_h3])
    b = np.array(
        [
            lies.lf2_h1 + gains.kappa_d * lies.lf_h1 + gains.kappa_p * err.h1,
            lies.lf2_h3 + gains.kappa_w * lies.lf_h3 + gains.kappa_a * err.h3,
        ]
    )
    u_vec = _solve_decoupling(A, b)
    u1, c1 = _clamp_stiffness(float(u_vec[0]), params)
    tau, c2 = _clamp_torque(float(u_vec[1]), gains)
    return ControlInput(u1=u1, tau=tau, clamped=c1 or c2)


def control_knee(
    state: HybridState,
    err: ErrorVector,
    lies: LieDerivatives,
    gains: ControlGains,
    params: WalkerParams,
) -> ControlInput:
    """Decoupling law for stance stiffness, hip torque and knee force."""
    if state.phase is not Phase.SINGLE_SUPPORT_KNEE:
        raise StateError(f"knee law does not apply in {state.phase}")
    A = np.vstack([lies.lg_lf_h1, lies.lg_lf_h3, lies.lg_lf_h4])
    b = np.array(
        [
            lies.lf2_h1 + gains.kappa_d * lies.lf_h1 + gains.kappa_p * err.h1,
            lies.lf2_h3 + gains.kappa_w * lies.lf_h3 + gains.kappa_a * err.h3,
            lies.lf2_h4 + gains.kappa_n * lies.lf_h4 + gains.kappa_l * err.h4,
        ]
    )
    u_vec = _solve_decoupling(A, b)
    u1, c1 = _clamp_stiffness(float(u_vec[0]), params)
    tau, c2 = _clamp_torque(float(u_vec[1]), gains)
    tau2, c3 = _clamp_torque(float(u_vec[2]), gains)
    return ControlInput(u1=u1, tau=tau, tau2=tau2, clamped=c1 or c2 or c3)


def _solve_decoupling(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        return -np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        # Singular only when the stance spring loses authority; the stance
        # extension guard ends such runs, so just keep the values finite.
        logger.warning("singular decoupling matrix; using least-squares inputs")
        return -np.linalg.lstsq(A, b, rcond=None)[0]


class GaitController:
    """Closed-loop controller: dispatches the phase-appropriate law.

    Owns the fitted hip reference and rebuilds the per-step swing and
    retraction references at every lift-off event.
    """

    def __init__(self, model: Model, gait: ReferenceGait, gains: ControlGains,
                 params: WalkerParams):
        if model is Model.SLIP:
            raise ValueError("the passive model takes PassiveController")
        if model in (Model.SWING, Model.KNEE) and params.m_f <= 0.0:
            raise ValueError("feet models need positive foot mass")
        self.model = model
        self.gains = gains
        self.params = params
        self.refs = RefBundle(gait=gait)

    def start(self, state: HybridState, t: float) -> None:
        if state.phase.is_single_support and self.model.has_feet:
            self._build_step_refs(state, t)

    def on_event(self, event: TransitionEvent) -> None:
        if event.kind is EventKind.LIFTOFF and self.model.has_feet:
            self._build_step_refs(event.post_state, event.t)

    def _build_step_refs(self, state: HybridState, t_lo: float) -> None:
        t_swing = self.refs.gait.t_swing
        swing = make_swing_reference(state.q[2], t_lo, t_swing, self.params.alpha_0)
        retraction = None
        if self.model is Model.KNEE:
            retraction = make_retraction_reference(
                min(state.q[3], self.params.L_0), t_lo, t_swing, self.params
            )
        self.refs = RefBundle(gait=self.refs.gait, swing=swing, retraction=retraction)

    def errors(self, state: HybridState, t: float) -> np.ndarray:
        return errors(
            state, self.refs, t, self.params, strict=False
        ).as_array()

    def control(self, state: HybridState, t: float,
                terms: PhaseTerms | None = None) -> ControlInput:
        if terms is None:
            terms = phase_terms(state, self.params)
        err = errors(state, self.refs, t, self.params, strict=False, terms=terms)
        lies = lie_derivatives(state, self.refs, t, self.params, terms)
        if state.phase in (Phase.DOUBLE_SUPPORT, Phase.SINGLE_SUPPORT_VSLIP):
            return control_vslip(state, err, lies, self.gains, self.params)
        if state.phase is Phase.SINGLE_SUPPORT_SWING:
            return control_swing(state, err, lies, self.gains, self.params)
        return control_knee(state, err, lies, self.gains, self.params)
