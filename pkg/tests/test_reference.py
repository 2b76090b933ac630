"""Limit-cycle finder, Fourier fit and per-step reference polynomials."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from springwalker.params import WalkerParams
from springwalker.reference import (
    FitResidualError,
    NoGaitError,
    find_limit_cycle,
    fit_reference,
    make_retraction_reference,
    make_swing_reference,
    params_hash,
    reference_from_json,
    reference_to_json,
    stride_map,
    stride_samples,
)


def test_limit_cycle_residual_and_velocity(limit_cycle):
    assert limit_cycle.residual < 1e-8
    assert limit_cycle.mean_velocity == pytest.approx(1.18, abs=1e-3)
    assert limit_cycle.t_ss + limit_cycle.t_ds == pytest.approx(
        limit_cycle.period, abs=1e-9
    )
    assert limit_cycle.qd1 > 0.0
    assert limit_cycle.qd2 < 0.0


def test_limit_cycle_rerun_is_identical(limit_cycle, params):
    again = find_limit_cycle(
        params,
        initial_guess=(limit_cycle.vlo_height, limit_cycle.vlo_speed),
        target_velocity=1.18,
    )
    assert abs(again.qd1 - limit_cycle.qd1) < 1e-10
    assert abs(again.qd2 - limit_cycle.qd2) < 1e-10
    assert abs(again.chi - limit_cycle.chi) < 1e-10
    assert abs(again.period - limit_cycle.period) < 1e-10


def test_limit_cycle_perturbation_scales(limit_cycle, params):
    # The return map is a fixed point: a tiny perturbation must change the
    # residual only by the same order.
    (a, b, c), _, _, _ = stride_map(
        limit_cycle.qd1 + 1e-9, limit_cycle.qd2, limit_cycle.chi, params
    )
    res = math.sqrt(
        (a - limit_cycle.qd1 - 1e-9) ** 2
        + (b - limit_cycle.qd2) ** 2
        + (c - limit_cycle.chi) ** 2
    )
    assert res < 1e-7


def test_energy_constant_along_cycle(limit_cycle, params):
    from springwalker.integrate import PassiveController, run_gait
    from springwalker.params import IntegratorConfig

    tr = run_gait(
        limit_cycle.section_state(params), PassiveController(), params,
        IntegratorConfig(), n_steps=1,
    )
    H = tr.column("H")
    assert np.max(np.abs(H - limit_cycle.energy)) / limit_cycle.energy < 1e-6


def test_shallow_attack_angle_fails_typed(params):
    import dataclasses

    bad = dataclasses.replace(params, alpha_0=math.radians(5.0))
    with pytest.raises(NoGaitError):
        find_limit_cycle(bad)


def test_fit_residuals_within_bound(gait_reference):
    assert gait_reference.residual_q2 < 1e-4
    assert gait_reference.residual_qd1 < 1e-4


def test_fit_refuses_and_reports_needed_harmonics(limit_cycle, params):
    with pytest.raises(FitResidualError) as exc:
        fit_reference(limit_cycle, params, n_harmonics=4)
    assert exc.value.harmonics_needed is not None
    assert exc.value.harmonics_needed > 4


def test_zero_harmonics_fit_is_stride_mean(limit_cycle, params):
    ref = fit_reference(limit_cycle, params, n_harmonics=0, max_residual=None)
    q1, q2, qd1 = stride_samples(limit_cycle, params)
    assert ref.q2_series.value(0.1) == pytest.approx(float(np.mean(q2)), rel=1e-6)
    assert ref.qd1_series.value(0.1) == pytest.approx(float(np.mean(qd1)), rel=1e-6)


def test_reference_forward_speed_positive_everywhere(gait_reference):
    xs = np.linspace(0.0, gait_reference.stride_length, 1000)
    vals = [gait_reference.qd1_series.value(x) for x in xs]
    assert min(vals) > 0.0


def test_fourier_derivatives_match_finite_differences(gait_reference):
    s = gait_reference.q2_series
    h = 1e-5
    for x in np.linspace(0.0, gait_reference.stride_length, 13):
        d1_fd = (s.value(x + h) - s.value(x - h)) / (2.0 * h)
        d2_fd = (s.value(x + h) - 2.0 * s.value(x) + s.value(x - h)) / (h * h)
        assert s.d1(x) == pytest.approx(d1_fd, rel=1e-6, abs=1e-8)
        assert s.d2(x) == pytest.approx(d2_fd, rel=1e-5, abs=1e-5)


def test_fourier_periodicity(gait_reference):
    s = gait_reference.q2_series
    L = gait_reference.stride_length
    for x in [0.0, 0.3, 0.61]:
        assert s.value(x) == pytest.approx(s.value(x + L), abs=1e-12)


def test_swing_reference_constant_when_at_target(params):
    ref = make_swing_reference(math.pi - params.alpha_0, 0.0, 0.4, params.alpha_0)
    for t in [0.0, 0.13, 0.4, 1.0]:
        assert ref.value(t) == pytest.approx(math.pi - params.alpha_0, abs=1e-14)
        assert ref.d1(t) == 0.0


@settings(max_examples=60, deadline=None)
@given(
    q3_lo=st.floats(0.3, 2.2),
    t_lo=st.floats(0.0, 10.0),
    t_swing=st.floats(0.05, 2.0),
)
def test_swing_reference_boundary_conditions(q3_lo, t_lo, t_swing):
    alpha = math.radians(62.5)
    ref = make_swing_reference(q3_lo, t_lo, t_swing, alpha)
    assert ref.value(t_lo) == pytest.approx(q3_lo, abs=1e-12)
    assert ref.d1(t_lo) == 0.0
    assert ref.d2(t_lo) == 0.0
    # t_lo + t_swing may not be representable exactly; probe within an ulp.
    end = t_lo + t_swing
    assert ref.value(end) == pytest.approx(math.pi - alpha, rel=1e-9)
    assert ref.d1(end) == pytest.approx(0.0, abs=1e-9)
    assert ref.d2(end) == pytest.approx(0.0, abs=1e-8)
    # clamped after the swing ends
    assert ref.value(end + 1.0) == pytest.approx(math.pi - alpha, rel=1e-12)
    assert ref.d1(end + 1.0) == 0.0


def test_swing_reference_midpoint(params):
    # Rest-to-rest minimum jerk passes through the midpoint of the
    # endpoints at half time.
    alpha = params.alpha_0
    ref = make_swing_reference(alpha, 0.0, 0.8, alpha)
    assert ref.value(0.4) == pytest.approx(math.pi / 2, rel=1e-12)


def test_retraction_reference_conditions(params):
    ref = make_retraction_reference(params.L_0, 1.0, 0.5, params)
    assert ref.value(1.0) == pytest.approx(params.L_0)
    assert ref.value(1.25) == pytest.approx(params.L_0 - params.delta_retract)
    assert ref.value(1.5) == pytest.approx(params.L_0)
    assert ref.value(2.3) == params.L_0  # clamped
    assert ref.value(1.25) == pytest.approx(0.925)


def test_retraction_zero_depth_is_constant():
    p = WalkerParams(delta_retract=0.0)
    ref = make_retraction_reference(p.L_0, 0.0, 0.5, p)
    for t in np.linspace(0.0, 0.8, 9):
        assert ref.value(t) == pytest.approx(p.L_0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(q4_lo=st.floats(0.85, 1.0), t_swing=st.floats(0.1, 1.5))
def test_retraction_reference_immediate_liftoff_acceleration(q4_lo, t_swing):
    # Shortening must start immediately: the length rate at lift-off is
    # negative whenever a retraction depth is requested.
    p = WalkerParams()
    ref = make_retraction_reference(q4_lo, 0.0, t_swing, p)
    assert ref.value(0.0) == pytest.approx(q4_lo, abs=1e-12)
    assert ref.value(t_swing / 2) == pytest.approx(p.L_0 - p.delta_retract, rel=1e-12)
    assert ref.value(t_swing) == pytest.approx(p.L_0, rel=1e-12)
    if q4_lo >= p.L_0 - p.delta_retract:
        assert ref.d1(1e-9) < 0.0


def test_serialization_round_trip(limit_cycle, gait_reference, params):
    text = reference_to_json(params, limit_cycle, gait_reference)
    stored, cycle, ref = reference_from_json(text, params)
    assert stored == params
    assert cycle == limit_cycle
    assert ref.q2_series == gait_reference.q2_series
    assert ref.qd1_series == gait_reference.qd1_series
    assert ref.t_swing == gait_reference.t_swing
    # byte determinism
    assert text == reference_to_json(params, limit_cycle, gait_reference)


def test_serialization_rejects_mismatched_params(limit_cycle, gait_reference, params):
    import dataclasses

    text = reference_to_json(params, limit_cycle, gait_reference)
    other = dataclasses.replace(params, m_h=14.0)
    with pytest.raises(ValueError):
        reference_from_json(text, other)
    assert params_hash(other) != params_hash(params)
