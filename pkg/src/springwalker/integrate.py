"""Adaptive integration of the closed-loop hybrid dynamics.

One `integrate_step` advances a single phase until its first guard
crossing (or a time budget); `run_gait` chains segments across the
transition maps for a requested number of footfalls.  Control inputs are
evaluated inside every integrator stage, so feedback is continuous-time
rather than sample-and-hold.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .dynamics import _knee_mass, phase_terms
from .params import IntegratorConfig, WalkerParams
from .state import KNEE_MIN_LENGTH, ControlInput, HybridState, Model, Phase
from .transitions import (
    EventKind,
    GaitFault,
    TransitionEvent,
    apply_liftoff,
    apply_touchdown,
)

FALL_HEIGHT_FRACTION = 0.1  # of L_0; below this hip height the walker has fallen


class IntegrationError(RuntimeError):
    """Integration failed (step-size underflow or non-finite state)."""

    def __init__(self, message: str, last_state: HybridState | None = None):
        super().__init__(message)
        self.last_state = last_state


class RunOutcome(enum.Enum):
    COMPLETED = "completed"
    FELL = "fell"
    BACKWARD = "backward"
    FAULT = "fault"


@dataclass(frozen=True)
class TraceSample:
    t: float
    state: HybridState
    u: ControlInput
    K: float
    V: float
    H: float
    h: np.ndarray       # error functions h1..h4; zeros where undefined
    power: float        # collocated input power <u|y>


@dataclass
class SimTrace:
    samples: list[TraceSample] = field(default_factory=list)
    events: list[TransitionEvent] = field(default_factory=list)
    outcome: RunOutcome = RunOutcome.COMPLETED
    detail: str = ""

    def touchdown_times(self) -> list[float]:
        return [e.t for e in self.events if e.kind is EventKind.TOUCHDOWN]

    def column(self, name: str) -> np.ndarray:
        """Per-sample scalar column; state coordinates are NaN-padded to 4."""
        if name == "t":
            return np.array([s.t for s in self.samples])
        if name in ("K", "V", "H", "power"):
            return np.array([getattr(s, name) for s in self.samples])
        if name.startswith("h"):
            i = int(name[1:]) - 1
            return np.array([s.h[i] for s in self.samples])
        if name.startswith("q") or name.startswith("p"):
            i = int(name[1:]) - 1
            vec = name[0]
            return np.array(
                [
                    getattr(s.state, vec)[i] if i < s.state.phase.dim else math.nan
                    for s in self.samples
                ]
            )
        if name in ("u1", "u2", "tau", "tau2"):
            return np.array(
                [
                    getattr(s.u, name) if getattr(s.u, name) is not None else math.nan
                    for s in self.samples
                ]
            )
        if name == "clamped":
            return np.array([float(s.u.clamped) for s in self.samples])
        raise KeyError(name)


class PassiveController:
    """Zero-input controller: reduces every model to its passive dynamics."""

    model = Model.SLIP

    def control(self, state: HybridState, t: float, terms=None) -> ControlInput:
        return ControlInput.zero(state.phase)

    def errors(self, state: HybridState, t: float) -> np.ndarray:
        return np.zeros(4)

    def start(self, state: HybridState, t: float) -> None:
        pass

    def on_event(self, event: TransitionEvent) -> None:
        pass


@dataclass(frozen=True)
class SegmentEnd:
    """Why a segment stopped: a guard name, or None for budget exhaustion."""

    reason: str | None
    t: float
    state: HybridState


def _make_events(phase: Phase, c1: float, c2: float | None, params: WalkerParams,
                 armed: bool) -> list:
    """Guard functions over the flat state vector y = (q, p) for scipy.

    `armed` selects the sub-stage of a feet-model single-support segment:
    before the swing foot passes the hip only the arming guard is active,
    afterwards the touchdown guard is.
    """
    L0 = params.L_0
    mh = params.m_h
    evs = []

    def add(fn, name, direction):
        fn.terminal = True
        fn.direction = direction
        fn.guard_name = name
        evs.append(fn)

    def fall(t, y):
        return y[1] - FALL_HEIGHT_FRACTION * L0

    add(fall, "fall", -1)

    if phase is Phase.DOUBLE_SUPPORT:
        trailing = min(c1, c2)
        leading = max(c1, c2)

        def backward(t, y):
            return y[2] / mh

        def liftoff(t, y):
            return L0 - math.hypot(y[0] - trailing, y[1])

        def leading_liftoff(t, y):
            return L0 - math.hypot(y[0] - leading, y[1])

        add(backward, "backward", -1)
        add(liftoff, "liftoff", -1)
        add(leading_liftoff, "leading_liftoff", -1)
        return evs

    def stance_extension(t, y):
        return L0 - math.hypot(y[0] - c1, y[1])

    add(stance_extension, "stance_extension", -1)

    if phase is Phase.SINGLE_SUPPORT_VSLIP:
        def backward(t, y):
            return y[2] / mh

        def touchdown(t, y):
            return y[1] - params.touchdown_height

        add(backward, "backward", -1)
        add(touchdown, "touchdown", -1)
        return evs

    if phase is Phase.SINGLE_SUPPORT_SWING:
        mt = params.m_h + params.m_f
        d = params.d_com
        J = params.J_com

        def backward(t, y):
            return y[3] / mt - d * math.sin(y[2]) * y[5] / J

        add(backward, "backward", -1)
        if not armed:
            def arm(t, y):
                return y[2] - 0.5 * math.pi

            add(arm, "arm", +1)
        else:
            def touchdown(t, y):
                return y[1] - L0 * math.sin(y[2])

            add(touchdown, "touchdown", -1)
        return evs

    # telescopic swing leg
    def backward(t, y):
        M = _knee_mass(y[:4], params)
        return float(np.linalg.solve(M, y[4:])[0])

    def degenerate(t, y):
        return y[3] - KNEE_MIN_LENGTH

    add(backward, "backward", -1)
    add(degenerate, "degenerate", -1)
    if not armed:
        def arm(t, y):
            return y[2] - 0.5 * math.pi

        add(arm, "arm", +1)
    else:
        def touchdown(t, y):
            return y[1] - y[3] * math.sin(y[2])

        add(touchdown, "touchdown", -1)
    return evs


def _state_at(phase: Phase, y: np.ndarray, c1: float, c2: float | None,
              t_phase: float, t_lo: float) -> HybridState:
    n = phase.dim
    return HybridState(
        phase=phase, q=y[:n], p=y[n:], c1=c1, c2=c2, t_phase=t_phase, t_lo=t_lo
    )


def _sample(trace_samples: list, t: float, state: HybridState, controller,
            params: WalkerParams) -> None:
    terms = phase_terms(state, params)
    u = controller.control(state, t, terms)
    power = float(u.as_vector(state.phase) @ terms.y)
    h = controller.errors(state, t)
    trace_samples.append(
        TraceSample(
            t=t, state=state, u=u, K=terms.K, V=terms.V, H=terms.K + terms.V,
            h=h, power=power,
        )
    )


def integrate_step(
    state: HybridState,
    controller,
    params: WalkerParams,
    config: IntegratorConfig,
    t0: float = 0.0,
    *,
    samples: list | None = None,
    include_start: bool = True,
) -> tuple[list[TraceSample], SegmentEnd]:
    """Advance one phase until its first guard crossing or the time budget.

    Returns the trace samples of the segment and a SegmentEnd naming the
    guard that fired (None if the budget ran out).  The returned end
    state is the localized pre-transition state.
    """
    out = samples if samples is not None else []
    phase = state.phase
    c1, c2, t_lo = state.c1, state.c2, state.t_lo
    y = np.concatenate([state.q, state.p])
    t = t0
    t_end = t0 + config.segment_budget

    if include_start:
        _sample(out, t, state, controller, params)

    def rhs(tt, yy):
        st = _state_at(phase, yy, c1, c2, tt - t0, t_lo)
        terms = phase_terms(st, params)
        u = controller.control(st, tt, terms)
        pdot = terms.pdot_drift + terms.B @ u.as_vector(phase)
        return np.concatenate([terms.qdot, pdot])

    needs_arming = phase in (Phase.SINGLE_SUPPORT_SWING, Phase.SINGLE_SUPPORT_KNEE)
    armed = not needs_arming
    while True:
        events = _make_events(phase, c1, c2, params, armed=armed)
        try:
            sol = solve_ivp(
                rhs, (t, t_end), y, method="RK45",
                rtol=config.rel_tol, atol=config.abs_tol,
                max_step=config.max_step, events=events, dense_output=True,
            )
        except (ValueError, FloatingPointError) as exc:
            last = _state_at(phase, y, c1, c2, t - t0, t_lo)
            raise IntegrationError(f"integration failed in {phase.name}: {exc}", last)
        if sol.status == -1:
            last = _state_at(phase, y, c1, c2, t - t0, t_lo)
            raise IntegrationError(f"step-size underflow in {phase.name}: {sol.message}", last)

        fired = [
            (te[0], events[i].guard_name)
            for i, te in enumerate(sol.t_events)
            if len(te) > 0
        ]
        t_stop = sol.t[-1]
        # Sample the dense output on the global grid, excluding endpoints.
        dt = config.output_dt
        k0 = math.floor(t / dt) + 1
        grid = [k * dt for k in range(k0, math.floor(t_stop / dt) + 1)
                if t < k * dt < t_stop]
        for tg in grid:
            st = _state_at(phase, sol.sol(tg), c1, c2, tg - t0, t_lo)
            _sample(out, tg, st, controller, params)

        end_state = _state_at(phase, sol.y[:, -1], c1, c2, t_stop - t0, t_lo)
        if not fired:  # budget exhausted
            _sample(out, t_stop, end_state, controller, params)
            return out, SegmentEnd(None, t_stop, end_state)

        # Earliest root wins; exact ties favor terminal (non-transition) guards.
        priority = {"fall": 0, "backward": 1, "leading_liftoff": 2,
                    "stance_extension": 2, "degenerate": 2,
                    "touchdown": 3, "liftoff": 3, "arm": 4}
        t_first = min(te for te, _ in fired)
        simultaneous = [name for te, name in fired if te - t_first < config.event_tol]
        name = min(simultaneous, key=priority.__getitem__)
        if name == "arm":
            armed = True
            t = t_first
            y = sol.sol(t_first)
            continue
        _sample(out, t_first, end_state, controller, params)
        return out, SegmentEnd(name, t_first, end_state)


def run_gait(
    initial: HybridState,
    controller,
    params: WalkerParams,
    config: IntegratorConfig,
    n_steps: int,
) -> SimTrace:
    """Chain closed-loop segments for `n_steps` footfalls.

    Terminal guards (fall, backward motion, nominal-gait violations) end
    the run with a typed outcome rather than an exception.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    trace = SimTrace()
    state = initial
    state.validate(params)
    t = 0.0
    controller.start(state, t)
    footfalls = 0
    ss_phase = controller.model.ss_phase

    while footfalls < n_steps:
        _, end = integrate_step(
            state, controller, params, config, t,
            samples=trace.samples, include_start=(t == 0.0),
        )
        t = end.t
        if end.reason is None:
            trace.outcome = RunOutcome.FAULT
            trace.detail = f"no transition within {config.segment_budget} s in {state.phase.name}"
            return trace
        if end.reason == "fall":
            trace.events.append(TransitionEvent(EventKind.FALL, t, end.state, end.state))
            trace.outcome = RunOutcome.FELL
            trace.detail = "hip height fell below the fall threshold"
            return trace
        if end.reason == "backward":
            trace.events.append(
                TransitionEvent(EventKind.BACKWARD_MOTION, t, end.state, end.state)
            )
            trace.outcome = RunOutcome.BACKWARD
            trace.detail = "forward velocity reached zero"
            return trace
        if end.reason in ("leading_liftoff", "stance_extension", "degenerate"):
            trace.outcome = RunOutcome.FAULT
            trace.detail = f"nominal-gait violation: {end.reason}"
            return trace
        try:
            if end.reason == "touchdown":
                event = apply_touchdown(end.state, params, t)
                footfalls += 1
            elif end.reason == "liftoff":
                event = apply_liftoff(end.state, params, ss_phase, t)
            else:
                raise GaitFault(f"unknown guard {end.reason}")
        except GaitFault as exc:
            trace.outcome = RunOutcome.FAULT
            trace.detail = str(exc)
            return trace
        event.post_state.validate(params)
        trace.events.append(event)
        controller.on_event(event)
        state = event.post_state

    # Short epilogue past the final footfall so the last event is also
    # bracketed by a sample of the new phase.
    try:
        epilogue_cfg = dataclasses.replace(
            config, segment_budget=1.5 * config.output_dt
        )
        integrate_step(state, controller, params, epilogue_cfg, t,
                       samples=trace.samples, include_start=False)
    except IntegrationError:
        pass
    trace.outcome = RunOutcome.COMPLETED
    return trace
