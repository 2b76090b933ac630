"""Guard functions and the touchdown / lift-off transition maps.

Contact bookkeeping: in single support the stance contact is c1.  A
touchdown plants the new contact ahead of the hip as c2, so during
double support c1 is the trailing and c2 the leading contact.  At
lift-off the trailing leg departs and c2 is relabeled to c1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import DegenerateStateError, leg_length, mass_matrix, phase_terms, swing_S
from .params import WalkerParams
from .state import HybridState, Phase, StateError


class GaitFault(StateError):
    """A transition was requested from a state outside the nominal gait."""


class EventKind(enum.Enum):
    TOUCHDOWN = "touchdown"
    LIFTOFF = "liftoff"
    FALL = "fall"
    BACKWARD_MOTION = "backward_motion"


@dataclass(frozen=True)
class GuardValue:
    """Signed distance to an event surface and its firing convention.

    `direction` is the sign of d(value)/dt at a firing crossing (-1 means
    the event triggers when the value decreases through zero).  `armed`
    reports whether a zero would currently count as an event.
    """

    value: float
    direction: int
    armed: bool = True


@dataclass(frozen=True)
class TransitionEvent:
    kind: EventKind
    t: float
    pre_state: HybridState
    post_state: HybridState
    energy_dissipated: float = 0.0


def swing_foot_position(state: HybridState, params: WalkerParams) -> np.ndarray:
    """World position of the swing foot (single support, feet models)."""
    q = state.q
    if state.phase is Phase.SINGLE_SUPPORT_SWING:
        r = params.L_0
    elif state.phase is Phase.SINGLE_SUPPORT_KNEE:
        r = q[3]
    else:
        raise StateError(f"no swing foot in phase {state.phase}")
    return np.array([q[0] - r * math.cos(q[2]), q[1] - r * math.sin(q[2])])


def swing_foot_velocity(state: HybridState, params: WalkerParams) -> np.ndarray:
    """World velocity of the swing foot (single support, feet models)."""
    q = state.q
    qdot = phase_terms(state, params).qdot
    s3, c3 = math.sin(q[2]), math.cos(q[2])
    if state.phase is Phase.SINGLE_SUPPORT_SWING:
        r, rdot = params.L_0, 0.0
    elif state.phase is Phase.SINGLE_SUPPORT_KNEE:
        r, rdot = q[3], qdot[3]
    else:
        raise StateError(f"no swing foot in phase {state.phase}")
    return np.array(
        [
            qdot[0] + r * s3 * qdot[2] - c3 * rdot,
            qdot[1] - r * c3 * qdot[2] - s3 * rdot,
        ]
    )


def touchdown_guard(state: HybridState, params: WalkerParams) -> GuardValue:
    """Height of the landing condition; fires decreasing through zero.

    For the feet models the guard is the swing-foot height and it is
    armed only once the foot has passed in front of the hip; before that
    the swing leg may dip through the floor without triggering anything.
    """
    q = state.q
    if state.phase is Phase.SINGLE_SUPPORT_VSLIP:
        return GuardValue(q[1] - params.touchdown_height, direction=-1)
    foot = swing_foot_position(state, params)
    return GuardValue(float(foot[1]), direction=-1, armed=bool(foot[0] > q[0]))


def liftoff_guard(state: HybridState, params: WalkerParams) -> GuardValue:
    """Rest-length deficit of the trailing leg; fires decreasing through 0."""
    if state.phase is not Phase.DOUBLE_SUPPORT:
        raise StateError("lift-off guard is defined in double support only")
    trailing, _ = _split_contacts(state)
    return GuardValue(params.L_0 - leg_length(state.q, trailing), direction=-1)


def leading_leg_guard(state: HybridState, params: WalkerParams) -> GuardValue:
    """Rest-length deficit of the leading leg; a firing is a gait violation."""
    if state.phase is not Phase.DOUBLE_SUPPORT:
        raise StateError("leading-leg guard is defined in double support only")
    _, leading = _split_contacts(state)
    return GuardValue(params.L_0 - leg_length(state.q, leading), direction=-1)


def _split_contacts(state: HybridState) -> tuple[float, float]:
    """(trailing, leading) contact abscissae of a double-support state."""
    if state.c1 < state.c2:
        return state.c1, state.c2
    return state.c2, state.c1


def apply_touchdown(state: HybridState, params: WalkerParams, t: float) -> TransitionEvent:
    """Plant the swing foot: single support -> double support.

    The impact is compliant: the hip momentum carries over unchanged and
    the foot mass instantaneously loses its kinetic energy, which is
    recorded as `energy_dissipated`.
    """
    q = state.q
    if state.phase is Phase.SINGLE_SUPPORT_VSLIP:
        c2 = q[0] + params.L_0 * math.cos(params.alpha_0)
        p_new = state.p.copy()
        dissipated = 0.0
    elif state.phase in (Phase.SINGLE_SUPPORT_SWING, Phase.SINGLE_SUPPORT_KNEE):
        c2 = float(swing_foot_position(state, params)[0])
        qdot = phase_terms(state, params).qdot
        v_foot = swing_foot_velocity(state, params)
        p_new = params.m_h * qdot[:2]
        dissipated = 0.5 * params.m_f * float(v_foot @ v_foot)
    else:
        raise StateError("touchdown applies in single support only")
    if c2 <= state.c1:
        raise GaitFault(f"new contact {c2:.4f} behind stance contact {state.c1:.4f}")
    post = HybridState(
        phase=Phase.DOUBLE_SUPPORT,
        q=q[:2].copy(),
        p=p_new,
        c1=state.c1,
        c2=c2,
        t_phase=0.0,
        t_lo=state.t_lo,
    )
    post.validate(params)
    return TransitionEvent(EventKind.TOUCHDOWN, t, state, post, dissipated)


def apply_liftoff(
    state: HybridState, params: WalkerParams, target: Phase, t: float
) -> TransitionEvent:
    """Release the trailing leg: double support -> the model's single support.

    The hip velocity is continuous; the departing foot is mapped into the
    swing-leg coordinates with the foot held stationary (horizontally for
    the rigid swing leg, fully for the telescopic one), and the leading
    contact is relabeled as the stance contact c1.
    """
    if state.phase is not Phase.DOUBLE_SUPPORT:
        raise StateError("lift-off applies in double support only")
    trailing, leading = _split_contacts(state)
    if abs(params.L_0 - leg_length(state.q, leading)) < 1e-12:
        raise GaitFault("both legs at rest length: ambiguous lift-off")

    q = state.q
    qdot = state.p / params.m_h
    if target is Phase.SINGLE_SUPPORT_VSLIP:
        post = HybridState(
            phase=target, q=q.copy(), p=state.p.copy(), c1=leading,
            t_phase=0.0, t_lo=t,
        )
    elif target is Phase.SINGLE_SUPPORT_SWING:
        q3 = math.atan2(q[1], q[0] - trailing)
        s3 = math.sin(q3)
        if abs(s3) < 1e-12:
            raise DegenerateStateError("swing-leg map singular at sin(q3) = 0")
        # Horizontal foot coordinate held stationary: q1dot + L0 s3 q3dot = 0.
        q3dot = -qdot[0] / (params.L_0 * s3)
        q_new = np.array([q[0], q[1], q3])
        v = swing_S(q3, params) @ np.array([qdot[0], qdot[1], q3dot])
        p_new = mass_matrix(target, q_new, params) @ v
        post = HybridState(
            phase=target, q=q_new, p=p_new, c1=leading, t_phase=0.0, t_lo=t,
        )
    elif target is Phase.SINGLE_SUPPORT_KNEE:
        q3 = math.atan2(q[1], q[0] - trailing)
        q4 = params.L_0
        s3, c3 = math.sin(q3), math.cos(q3)
        # Both foot velocity components vanish: leg-frame decomposition of
        # the hip velocity gives the angular and telescopic rates.
        q3dot = (c3 * qdot[1] - s3 * qdot[0]) / q4
        q4dot = c3 * qdot[0] + s3 * qdot[1]
        q_new = np.array([q[0], q[1], q3, q4])
        qdot_new = np.array([qdot[0], qdot[1], q3dot, q4dot])
        p_new = mass_matrix(target, q_new, params) @ qdot_new
        post = HybridState(
            phase=target, q=q_new, p=p_new, c1=leading, t_phase=0.0, t_lo=t,
        )
    else:
        raise StateError(f"invalid lift-off target {target}")
    post.validate(params)
    return TransitionEvent(EventKind.LIFTOFF, t, state, post, 0.0)
