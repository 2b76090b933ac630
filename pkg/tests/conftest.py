"""Shared fixtures and random-state generators."""

from __future__ import annotations

import math

import numpy as np
import pytest

from springwalker.params import ControlGains, WalkerParams
from springwalker.state import HybridState, Phase


@pytest.fixture(scope="session")
def params() -> WalkerParams:
    return WalkerParams()


@pytest.fixture(scope="session")
def gains() -> ControlGains:
    return ControlGains()


@pytest.fixture(scope="session")
def limit_cycle(params):
    from springwalker.reference import find_limit_cycle

    return find_limit_cycle(params, target_velocity=1.18)


@pytest.fixture(scope="session")
def gait_reference(limit_cycle, params):
    from springwalker.reference import fit_reference

    return fit_reference(limit_cycle, params)


def random_state(phase: Phase, params: WalkerParams, rng: np.random.Generator) -> HybridState:
    """A random dynamically sensible state of the given phase.

    Stance legs are kept compressed (0.80..0.98 rest length) so the
    configurations stay inside the controllable region the gait visits.
    """
    L0 = params.L_0
    if phase is Phase.DOUBLE_SUPPORT:
        q2 = rng.uniform(0.75, 0.92) * L0
        off1 = rng.uniform(0.05, 0.45)
        off2 = rng.uniform(0.05, 0.45)
        q = np.array([0.0, q2])
        p = params.m_h * rng.uniform([-0.5, -1.0], [1.8, 1.0])
        return HybridState(phase, q, p, c1=-off1, c2=off2)
    if phase is Phase.SINGLE_SUPPORT_VSLIP:
        L1 = rng.uniform(0.80, 0.98) * L0
        ang = rng.uniform(math.radians(50), math.radians(130))
        q = np.array([L1 * math.cos(ang), L1 * math.sin(ang)])
        p = params.m_h * rng.uniform([-0.5, -1.0], [1.8, 1.0])
        return HybridState(phase, q, p, c1=0.0)
    if phase is Phase.SINGLE_SUPPORT_SWING:
        L1 = rng.uniform(0.80, 0.98) * L0
        ang = rng.uniform(math.radians(50), math.radians(130))
        q3 = rng.uniform(0.3, math.pi - 0.3)
        q = np.array([L1 * math.cos(ang), L1 * math.sin(ang), q3])
        qdot = rng.uniform([-0.5, -1.0, -3.0], [1.8, 1.0, 3.0])
        from springwalker.dynamics import mass_matrix, swing_S

        p = mass_matrix(phase, q, params) @ (swing_S(q3, params) @ qdot)
        return HybridState(phase, q, p, c1=0.0)
    if phase is Phase.SINGLE_SUPPORT_KNEE:
        L1 = rng.uniform(0.80, 0.98) * L0
        ang = rng.uniform(math.radians(50), math.radians(130))
        q3 = rng.uniform(0.3, math.pi - 0.3)
        q4 = rng.uniform(0.85, 1.0) * L0
        q = np.array([L1 * math.cos(ang), L1 * math.sin(ang), q3, q4])
        qdot = rng.uniform([-0.5, -1.0, -3.0, -0.8], [1.8, 1.0, 3.0, 0.8])
        from springwalker.dynamics import mass_matrix

        p = mass_matrix(phase, q, params) @ qdot
        return HybridState(phase, q, p, c1=0.0)
    raise ValueError(phase)


ALL_PHASES = [
    Phase.DOUBLE_SUPPORT,
    Phase.SINGLE_SUPPORT_VSLIP,
    Phase.SINGLE_SUPPORT_SWING,
    Phase.SINGLE_SUPPORT_KNEE,
]
