"""Stride statistics, energy audits and cost of transport."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .integrate import SimTrace
from .params import WalkerParams
from .state import Phase
from .transitions import EventKind

DEFAULT_DISCARD_STRIDES = 5


class InsufficientDataError(RuntimeError):
    """The trace is too short for the requested statistic."""


@dataclass(frozen=True)
class GaitMetrics:
    mean_velocity: float            # m/s over the steady window
    cost_of_transport: float        # dimensionless
    stride_period: float            # s
    duty_factor: float              # double-support fraction of the stride
    energy_min: float               # J
    energy_max: float               # J
    energy_mean: float              # J
    dissipated_impact_energy: float  # J per stride
    total_mass: float               # kg, as used in the cost of transport
    n_strides: int                  # strides in the steady window


def total_mass(trace: SimTrace, params: WalkerParams) -> float:
    """Walker mass: hip only for massless legs, plus both feet otherwise."""
    has_feet = any(
        s.state.phase in (Phase.SINGLE_SUPPORT_SWING, Phase.SINGLE_SUPPORT_KNEE)
        for s in trace.samples
    )
    return params.m_h + (2.0 * params.m_f if has_feet else 0.0)


def _steady_window(trace: SimTrace, discard_strides: int) -> tuple[int, int, list[float]]:
    """Sample-index window covering the touchdown-aligned steady strides."""
    td = trace.touchdown_times()
    if len(td) < discard_strides + 1:
        raise InsufficientDataError(
            f"need more than {discard_strides} strides, trace has {len(td)}"
        )
    t = np.array([s.t for s in trace.samples])
    boundaries = td[discard_strides:]
    i0 = int(np.searchsorted(t, boundaries[0]))
    i1 = int(np.searchsorted(t, boundaries[-1]))
    if not (math.isclose(t[i0], boundaries[0]) and math.isclose(t[i1], boundaries[-1])):
        raise InsufficientDataError("stride boundaries missing from the trace samples")
    return i0, i1, boundaries


def cost_of_transport(
    trace: SimTrace,
    params: WalkerParams,
    discard_strides: int = DEFAULT_DISCARD_STRIDES,
) -> float:
    """Absolute actuator power integrated per weight and distance.

    The integral runs over an integer number of steady strides (touchdown
    to touchdown, transients discarded).
    """
    i0, i1, _ = _steady_window(trace, discard_strides)
    if i1 <= i0:
        raise InsufficientDataError("steady window contains no full stride")
    t = np.array([s.t for s in trace.samples[i0:i1 + 1]])
    p_abs = np.abs([s.power for s in trace.samples[i0:i1 + 1]])
    work = float(np.trapezoid(p_abs, t))
    dx = trace.samples[i1].state.q[0] - trace.samples[i0].state.q[0]
    if dx <= 0.0:
        raise InsufficientDataError(f"no forward progress over the window (dx={dx:.4f})")
    return work / (total_mass(trace, params) * params.g_0 * dx)


def gait_metrics(
    trace: SimTrace,
    params: WalkerParams,
    discard_strides: int = DEFAULT_DISCARD_STRIDES,
) -> GaitMetrics:
    """Steady-state stride statistics of a completed run."""
    td_all = trace.touchdown_times()
    if len(td_all) < 3:
        raise InsufficientDataError(f"need at least 3 strides, got {len(td_all)}")
    i0, i1, boundaries = _steady_window(trace, discard_strides)
    n_strides = len(boundaries) - 1
    if n_strides < 1:
        raise InsufficientDataError("steady window contains no full stride")
    t0, t1 = boundaries[0], boundaries[-1]
    dx = trace.samples[i1].state.q[0] - trace.samples[i0].state.q[0]
    dt = t1 - t0

    # Double-support fraction: lift-off events close the interval each
    # touchdown opens.
    ds_time = 0.0
    for ev in trace.events:
        if ev.kind is EventKind.TOUCHDOWN and t0 <= ev.t < t1:
            lo = [e.t for e in trace.events
                  if e.kind is EventKind.LIFTOFF and e.t > ev.t]
            if lo:
                ds_time += min(lo) - ev.t
    H = np.array([s.H for s in trace.samples[i0:i1 + 1]])
    impacts = [
        e.energy_dissipated for e in trace.events
        if e.kind is EventKind.TOUCHDOWN and t0 < e.t <= t1
    ]
    return GaitMetrics(
        mean_velocity=float(dx / dt),
        cost_of_transport=float(cost_of_transport(trace, params, discard_strides)),
        stride_period=float(dt / n_strides),
        duty_factor=float(ds_time / dt),
        energy_min=float(H.min()),
        energy_max=float(H.max()),
        energy_mean=float(H.mean()),
        dissipated_impact_energy=float(sum(impacts) / len(impacts)) if impacts else 0.0,
        total_mass=float(total_mass(trace, params)),
        n_strides=n_strides,
    )


def segment_energy_audit(trace: SimTrace) -> list[tuple[float, float, float]]:
    """Per-phase-segment (H_end - H_start, integral of <u|y>, H_mean).

    The discrete power balance should close these to within a small
    multiple of the sampling quadrature error; impacts sit exactly at
    segment boundaries and so never enter a segment integral.
    """
    t = np.array([s.t for s in trace.samples])
    out = []
    boundaries = [e.t for e in trace.events
                  if e.kind in (EventKind.TOUCHDOWN, EventKind.LIFTOFF)]
    # The sample taken exactly at an event time belongs to the segment the
    # event ended, so each segment spans the half-open window (a, b].
    edges = [t[0] - 1e-12, *boundaries, t[-1]]
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        i0 = int(np.searchsorted(t, a, side="right"))
        i1 = int(np.searchsorted(t, b, side="right")) - 1
        if i1 - i0 < 1:
            continue
        seg = trace.samples[i0:i1 + 1]
        work = float(np.trapezoid([s.power for s in seg], t[i0:i1 + 1]))
        dH = seg[-1].H - seg[0].H
        out.append((dH, work, float(np.mean([s.H for s in seg]))))
    return out
