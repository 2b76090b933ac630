"""Energies, mass matrices and port-Hamiltonian vector fields.

All phases share the state convention x = (q, p) with q the hip position
(plus swing-leg coordinates where present) and p the conjugate momenta.
The drift and input fields are returned both as full state-space vectors
(`vector_fields`) and as the acceleration-level pieces the controller
needs (`phase_terms`):

    qdot = T(q) p
    qddot = a(q, p) + Gq(q) u

Partial derivatives are hand-derived closed forms; the tests check every
one of them against finite differences.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .params import WalkerParams
from .state import (
    KNEE_MIN_LENGTH,
    ControlInput,
    HybridState,
    Phase,
    StateError,
    VectorFieldBundle,
)


class DegenerateStateError(StateError):
    """Raised when a configuration makes the dynamics singular."""


def leg_length(q: np.ndarray, c: float) -> float:
    """Euclidean distance from the hip at (q1, q2) to a contact at (c, 0)."""
    return math.hypot(q[0] - c, q[1])


def _spring_gradient(q1: float, q2: float, c: float, L_0: float) -> tuple[float, float, float]:
    """Gradient of -(L_0 - L)^2 / 2 w.r.t. (q1, q2), plus the leg length.

    This is the per-unit-stiffness generalized force of one leg spring; the
    same column enters the input matrix and (scaled by k_0) the drift.
    """
    dx = q1 - c
    L = math.hypot(dx, q2)
    s = (L_0 - L) / L
    return s * dx, s * q2, L


class PhaseTerms(NamedTuple):
    """Per-state dynamics pieces shared by the integrator and controller."""

    qdot: np.ndarray        # T(q) p
    pdot_drift: np.ndarray  # momentum drift (zero input)
    accel: np.ndarray       # drift acceleration a(q, p)
    B: np.ndarray           # momentum-space input matrix
    Gq: np.ndarray          # acceleration-space input matrix T(q) B
    y: np.ndarray           # collocated output B^T dH/dp
    K: float
    V: float


def swing_S(q3: float, params: WalkerParams) -> np.ndarray:
    """Jacobian mapping qdot to the swing-leg body velocity, v = S(q) qdot."""
    d = params.d_com
    return np.array(
        [
            [1.0, 0.0, d * math.sin(q3)],
            [0.0, 1.0, -d * math.cos(q3)],
            [0.0, 0.0, 1.0],
        ]
    )


def swing_com_map(q: np.ndarray, params: WalkerParams) -> np.ndarray:
    """Coordinate map whose Jacobian is S(q): swing-leg CoM position and angle."""
    d = params.d_com
    return np.array(
        [q[0] - d * math.cos(q[2]), q[1] - d * math.sin(q[2]), q[2]]
    )


def swing_momentum_shear(q: np.ndarray, p: np.ndarray, params: WalkerParams) -> np.ndarray:
    """Matrix d(S^T p)/dq entering the interconnection correction.

    Its only nonzero entry sits on the diagonal, so the skew part
    W^T - W vanishes identically for this model; the drift therefore
    carries no correction term.  A test asserts this cancellation.
    """
    d = params.d_com
    W = np.zeros((3, 3))
    W[2, 2] = d * (math.cos(q[2]) * p[0] + math.sin(q[2]) * p[1])
    return W


def knee_foot_map(q: np.ndarray) -> np.ndarray:
    """Map z1 = q to z2 = (hip, swing-foot position)."""
    q1, q2, q3, q4 = q
    return np.array([q1, q2, q1 - q4 * math.cos(q3), q2 - q4 * math.sin(q3)])


def knee_Z(q: np.ndarray) -> np.ndarray:
    """Jacobian of `knee_foot_map`; singular only at q4 = 0."""
    s3, c3 = math.sin(q[2]), math.cos(q[2])
    q4 = q[3]
    return np.array(
        [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [1.0, 0.0, q4 * s3, -c3],
            [0.0, 1.0, -q4 * c3, -s3],
        ]
    )


def mass_matrix(phase: Phase, q: np.ndarray, params: WalkerParams) -> np.ndarray:
    """Symmetric positive-definite mass matrix of the phase."""
    if phase in (Phase.DOUBLE_SUPPORT, Phase.SINGLE_SUPPORT_VSLIP):
        return np.diag([params.m_h, params.m_h])
    if phase is Phase.SINGLE_SUPPORT_SWING:
        mt = params.m_h + params.m_f
        return np.diag([mt, mt, params.J_com])
    if phase is Phase.SINGLE_SUPPORT_KNEE:
        if q[3] < KNEE_MIN_LENGTH:
            raise DegenerateStateError(
                f"knee mass matrix near-singular at leg length {q[3]:.4f}"
            )
        return _knee_mass(q, params)
    raise ValueError(phase)


def _knee_mass(q: np.ndarray, params: WalkerParams) -> np.ndarray:
    # Z^T diag(m_h, m_h, m_f, m_f) Z written out; hip and foot point masses.
    mt = params.m_h + params.m_f
    mf = params.m_f
    s3, c3 = math.sin(q[2]), math.cos(q[2])
    q4 = q[3]
    return np.array(
        [
            [mt, 0.0, mf * q4 * s3, -mf * c3],
            [0.0, mt, -mf * q4 * c3, -mf * s3],
            [mf * q4 * s3, -mf * q4 * c3, mf * q4 * q4, 0.0],
            [-mf * c3, -mf * s3, 0.0, mf],
        ]
    )


def _ds_terms(q, p, c1, c2, params: WalkerParams) -> PhaseTerms:
    mh = params.m_h
    b1x, b1y, L1 = _spring_gradient(q[0], q[1], c1, params.L_0)
    b2x, b2y, L2 = _spring_gradient(q[0], q[1], c2, params.L_0)
    k0 = params.k_0
    pdot = np.array(
        [
            k0 * (b1x + b2x),
            k0 * (b1y + b2y) - mh * params.g_0,
        ]
    )
    qdot = p / mh
    B = np.array([[b1x, b2x], [b1y, b2y]])
    e1 = params.L_0 - L1
    e2 = params.L_0 - L2
    V = mh * params.g_0 * q[1] + 0.5 * k0 * (e1 * e1 + e2 * e2)
    K = 0.5 * (p[0] * p[0] + p[1] * p[1]) / mh
    y = B.T @ qdot
    return PhaseTerms(qdot, pdot, pdot / mh, B, B / mh, y, K, V)


def _ss_vslip_terms(q, p, c1, params: WalkerParams) -> PhaseTerms:
    # The absent swing leg is held at rest length: no spring term at all.
    mh = params.m_h
    b1x, b1y, L1 = _spring_gradient(q[0], q[1], c1, params.L_0)
    k0 = params.k_0
    pdot = np.array([k0 * b1x, k0 * b1y - mh * params.g_0])
    qdot = p / mh
    B = np.array([[b1x], [b1y]])
    e1 = params.L_0 - L1
    V = mh * params.g_0 * q[1] + 0.5 * k0 * e1 * e1
    K = 0.5 * (p[0] * p[0] + p[1] * p[1]) / mh
    y = B.T @ qdot
    return PhaseTerms(qdot, pdot, pdot / mh, B, B / mh, y, K, V)


def _ss_swing_terms(q, p, c1, params: WalkerParams) -> PhaseTerms:
    mt = params.m_h + params.m_f
    d = params.d_com
    J = params.J_com
    g0 = params.g_0
    k0 = params.k_0
    s3, c3 = math.sin(q[2]), math.cos(q[2])

    b1x, b1y, L1 = _spring_gradient(q[0], q[1], c1, params.L_0)

    v = np.array([p[0] / mt, p[1] / mt, p[2] / J])
    qdot = np.array([v[0] - d * s3 * v[2], v[1] + d * c3 * v[2], v[2]])

    dVdq = np.array([-k0 * b1x, mt * g0 - k0 * b1y, -mt * g0 * d * c3])
    # pdot = -S^{-T} dV/dq; the interconnection correction is identically
    # zero for this S (see swing_momentum_shear).
    pdot = np.array(
        [
            k0 * b1x,
            k0 * b1y - mt * g0,
            -(-d * s3 * dVdq[0] + d * c3 * dVdq[1] + dVdq[2]),
        ]
    )
    # B = S^{-T} B0 with B0 rows (spring gradient; hip torque on q3).
    B = np.array(
        [
            [b1x, 0.0],
            [b1y, 0.0],
            [-d * s3 * b1x + d * c3 * b1y, 1.0],
        ]
    )
    # qddot = d(S^{-1})/dt v + S^{-1} M^{-1} pdot
    w = qdot[2]
    vdot = np.array([pdot[0] / mt, pdot[1] / mt, pdot[2] / J])
    accel = np.array(
        [
            -d * c3 * v[2] * w + vdot[0] - d * s3 * vdot[2],
            -d * s3 * v[2] * w + vdot[1] + d * c3 * vdot[2],
            vdot[2],
        ]
    )
    # Gq = S^{-1} M^{-1} B
    Bm = B / np.array([[mt], [mt], [J]])
    Gq = np.array(
        [
            Bm[0] - d * s3 * Bm[2],
            Bm[1] + d * c3 * Bm[2],
            Bm[2],
        ]
    )
    e1 = params.L_0 - L1
    V = mt * g0 * (q[1] - d * s3) + 0.5 * k0 * e1 * e1
    K = 0.5 * (p[0] * v[0] + p[1] * v[1] + p[2] * v[2])
    # dH/dp is the body velocity v, not qdot; B^T v reduces to the spring
    # rate paired with u1 and the plain swing rate paired with tau.
    y = np.array([b1x * qdot[0] + b1y * qdot[1], qdot[2]])
    return PhaseTerms(qdot, pdot, accel, B, Gq, y, K, V)


def _knee_dM(q, params: WalkerParams) -> tuple[np.ndarray, np.ndarray]:
    """Partial derivatives of the knee mass matrix w.r.t. q3 and q4."""
    mf = params.m_f
    s3, c3 = math.sin(q[2]), math.cos(q[2])
    q4 = q[3]
    dM3 = np.zeros((4, 4))
    dM3[0, 2] = dM3[2, 0] = mf * q4 * c3
    dM3[0, 3] = dM3[3, 0] = mf * s3
    dM3[1, 2] = dM3[2, 1] = mf * q4 * s3
    dM3[1, 3] = dM3[3, 1] = -mf * c3
    dM4 = np.zeros((4, 4))
    dM4[0, 2] = dM4[2, 0] = mf * s3
    dM4[1, 2] = dM4[2, 1] = -mf * c3
    dM4[2, 2] = 2.0 * mf * q4
    return dM3, dM4


def _ss_knee_terms(q, p, c1, params: WalkerParams) -> PhaseTerms:
    # Half the declared guard: integrator stages may probe slightly past
    # the degeneracy event before it is localized.
    if q[3] < 0.5 * KNEE_MIN_LENGTH:
        raise DegenerateStateError(
            f"knee dynamics degenerate at leg length {q[3]:.4f}"
        )
    mh, mf = params.m_h, params.m_f
    g0, k0 = params.g_0, params.k_0
    s3, c3 = math.sin(q[2]), math.cos(q[2])

    b1x, b1y, L1 = _spring_gradient(q[0], q[1], c1, params.L_0)
    M = _knee_mass(q, params)
    B = np.array(
        [
            [b1x, 0.0, 0.0],
            [b1y, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ]
    )
    qdot = np.linalg.solve(M, p)
    dM3, dM4 = _knee_dM(q, params)
    dKdq = np.array(
        [
            0.0,
            0.0,
            -0.5 * qdot @ dM3 @ qdot,
            -0.5 * qdot @ dM4 @ qdot,
        ]
    )
    dVdq = np.array(
        [
            -k0 * b1x,
            (mh + mf) * g0 - k0 * b1y,
            -mf * g0 * q[3] * c3,
            -mf * g0 * s3,
        ]
    )
    pdot = -(dKdq + dVdq)
    Mdot = dM3 * qdot[2] + dM4 * qdot[3]
    # One factorization serves the drift acceleration and the input map.
    rhs = np.column_stack([pdot - Mdot @ qdot, B])
    sol = np.linalg.solve(M, rhs)
    accel = sol[:, 0]
    Gq = sol[:, 1:]
    e1 = params.L_0 - L1
    V = mh * g0 * q[1] + mf * g0 * (q[1] - q[3] * s3) + 0.5 * k0 * e1 * e1
    K = 0.5 * float(p @ qdot)
    y = B.T @ qdot
    return PhaseTerms(qdot, pdot, accel, B, Gq, y, K, V)


def phase_terms(state: HybridState, params: WalkerParams) -> PhaseTerms:
    """Evaluate the dynamics pieces of the state's phase."""
    q, p = state.q, state.p
    if state.phase is Phase.DOUBLE_SUPPORT:
        return _ds_terms(q, p, state.c1, state.c2, params)
    if state.phase is Phase.SINGLE_SUPPORT_VSLIP:
        return _ss_vslip_terms(q, p, state.c1, params)
    if state.phase is Phase.SINGLE_SUPPORT_SWING:
        return _ss_swing_terms(q, p, state.c1, params)
    if state.phase is Phase.SINGLE_SUPPORT_KNEE:
        return _ss_knee_terms(q, p, state.c1, params)
    raise ValueError(state.phase)


def energies(state: HybridState, params: WalkerParams) -> tuple[float, float, float]:
    """Kinetic, potential and total energy of the state."""
    t = phase_terms(state, params)
    return t.K, t.V, t.K + t.V


def vector_fields(state: HybridState, params: WalkerParams) -> VectorFieldBundle:
    """Drift f, input fields g_i, energies and collocated output at a state."""
    t = phase_terms(state, params)
    n = state.phase.dim
    f = np.concatenate([t.qdot, t.pdot_drift])
    g = [np.concatenate([np.zeros(n), t.B[:, i]]) for i in range(t.B.shape[1])]
    M = mass_matrix(state.phase, state.q, params)
    return VectorFieldBundle(f=f, g=g, K=t.K, V=t.V, H=t.K + t.V, y=t.y, B=t.B, M=M)


def closed_loop_rhs(state: HybridState, u: ControlInput, params: WalkerParams) -> np.ndarray:
    """State derivative (qdot, pdot) under the given control input."""
    t = phase_terms(state, params)
    pdot = t.pdot_drift + t.B @ u.as_vector(state.phase)
    return np.concatenate([t.qdot, pdot])
