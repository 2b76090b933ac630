"""Hybrid state, phase tags, and control-input containers."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .params import WalkerParams

# Below this hip-to-foot distance the telescopic knee is declared degenerate:
# the single-support mass matrix loses rank as the foot collapses onto the hip.
KNEE_MIN_LENGTH = 0.05


class StateError(ValueError):
    """Raised when a state violates the invariants of its phase."""


class Phase(enum.Enum):
    """Contact phase; the single-support variant is fixed by the model family."""

    DOUBLE_SUPPORT = "ds"
    SINGLE_SUPPORT_VSLIP = "ss_vslip"
    SINGLE_SUPPORT_SWING = "ss_swing"
    SINGLE_SUPPORT_KNEE = "ss_knee"

    @property
    def dim(self) -> int:
        return _PHASE_DIM[self]

    @property
    def is_single_support(self) -> bool:
        return self is not Phase.DOUBLE_SUPPORT


_PHASE_DIM = {
    Phase.DOUBLE_SUPPORT: 2,
    Phase.SINGLE_SUPPORT_VSLIP: 2,
    Phase.SINGLE_SUPPORT_SWING: 3,
    Phase.SINGLE_SUPPORT_KNEE: 4,
}


class Model(enum.Enum):
    """Model family selecting the single-support dynamics and controller."""

    SLIP = "slip"      # passive: zero control input
    VSLIP = "vslip"    # massless legs, controlled stiffness
    SWING = "swing"    # feet masses, rigid swing leg
    KNEE = "knee"      # feet masses, telescopic (retractable) swing leg

    @property
    def ss_phase(self) -> Phase:
        if self in (Model.SLIP, Model.VSLIP):
            return Phase.SINGLE_SUPPORT_VSLIP
        if self is Model.SWING:
            return Phase.SINGLE_SUPPORT_SWING
        return Phase.SINGLE_SUPPORT_KNEE

    @property
    def has_feet(self) -> bool:
        return self in (Model.SWING, Model.KNEE)


@dataclass(frozen=True)
class HybridState:
    """Configuration/momentum pair plus contact bookkeeping for one phase.

    q and p have the phase's dimension (2, 3 or 4).  c1 is the stance
    contact; during double support c2 is the newly planted (leading)
    contact and c1 the trailing one.  t_phase is the time since the last
    transition, t_lo the absolute time of the last lift-off.
    """

    phase: Phase
    q: np.ndarray
    p: np.ndarray
    c1: float
    c2: float | None = None
    t_phase: float = 0.0
    t_lo: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))

    def validate(self, params: WalkerParams) -> None:
        """Check the phase invariants; raise StateError on violation."""
        n = self.phase.dim
        if self.q.shape != (n,) or self.p.shape != (n,):
            raise StateError(
                f"{self.phase.name} expects dim {n}, got q{self.q.shape} p{self.p.shape}"
            )
        if self.q[1] <= 0.0:
            raise StateError(f"hip height must be positive, got {self.q[1]}")
        if self.phase is Phase.DOUBLE_SUPPORT:
            if self.c2 is None:
                raise StateError("double support requires both contacts")
            if self.c1 == self.c2:
                raise StateError("double-support contacts must be distinct")
        else:
            if self.c2 is not None:
                raise StateError("single support carries only the stance contact")
        if self.phase is Phase.SINGLE_SUPPORT_SWING:
            if not 0.0 <= self.q[2] < math.pi:
                raise StateError(f"swing angle must lie in [0, pi), got {self.q[2]}")
        if self.phase is Phase.SINGLE_SUPPORT_KNEE:
            if not 0.0 <= self.q[2] < math.pi:
                raise StateError(f"swing angle must lie in [0, pi), got {self.q[2]}")
            if not 0.0 < self.q[3] <= params.L_0 * (1.0 + 1e-9):
                raise StateError(f"swing-leg length must lie in (0, L_0], got {self.q[3]}")
            if self.q[3] < KNEE_MIN_LENGTH:
                raise StateError(f"swing-leg length {self.q[3]} below degeneracy guard")

    def with_qp(self, q: np.ndarray, p: np.ndarray, t_phase: float | None = None) -> "HybridState":
        out = replace(self, q=np.asarray(q, float), p=np.asarray(p, float))
        if t_phase is not None:
            out = replace(out, t_phase=t_phase)
        return out


@dataclass(frozen=True)
class ControlInput:
    """Control values for one phase; inputs a phase lacks stay None.

    u1/u2 modulate leg stiffness (N/m), tau is the swing hip torque (N m)
    and tau2 the telescopic knee force (N).  `clamped` flags whether any
    stiffness input hit its saturation bound.
    """

    u1: float | None = None
    u2: float | None = None
    tau: float | None = None
    tau2: float | None = None
    clamped: bool = False

    def as_vector(self, phase: Phase) -> np.ndarray:
        """Inputs ordered as the phase's input fields expect them."""
        if phase is Phase.DOUBLE_SUPPORT:
            return np.array([self.u1 or 0.0, self.u2 or 0.0])
        if phase is Phase.SINGLE_SUPPORT_VSLIP:
            return np.array([self.u1 or 0.0])
        if phase is Phase.SINGLE_SUPPORT_SWING:
            return np.array([self.u1 or 0.0, self.tau or 0.0])
        return np.array([self.u1 or 0.0, self.tau or 0.0, self.tau2 or 0.0])

    @staticmethod
    def zero(phase: Phase) -> "ControlInput":
        if phase is Phase.DOUBLE_SUPPORT:
            return ControlInput(u1=0.0, u2=0.0)
        if phase is Phase.SINGLE_SUPPORT_VSLIP:
            return ControlInput(u1=0.0)
        if phase is Phase.SINGLE_SUPPORT_SWING:
            return ControlInput(u1=0.0, tau=0.0)
        return ControlInput(u1=0.0, tau=0.0, tau2=0.0)


@dataclass(frozen=True)
class VectorFieldBundle:
    """Drift/input vector fields and energies evaluated at one state."""

    f: np.ndarray          # drift, dim 2n
    g: list[np.ndarray]    # input fields, each dim 2n
    K: float               # kinetic energy (J)
    V: float               # potential energy (J)
    H: float               # total energy (J)
    y: np.ndarray          # collocated output, one entry per input
    B: np.ndarray          # momentum-space input matrix, n x m
    M: np.ndarray          # mass matrix, n x n
