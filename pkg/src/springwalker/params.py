"""Parameter dataclasses and nominal values for the walker models."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields


class ParamError(ValueError):
    """Raised when a parameter set violates its invariants."""


@dataclass(frozen=True)
class WalkerParams:
    """Physical parameters shared by all model variants.

    Defaults are the nominal desk-scale walker: 15 kg hip, 1 m legs with
    2 kN/m nominal stiffness bounded in [0, 10 kN/m], 62.5 deg angle of
    attack, 2.5 kg feet and 7.5 cm swing-leg retraction.
    """

    m_h: float = 15.0          # hip mass (kg)
    m_f: float = 2.5           # foot mass (kg); 0 recovers the massless-leg model
    L_0: float = 1.0           # spring rest length (m)
    alpha_0: float = math.radians(62.5)  # angle of attack (rad)
    k_0: float = 2000.0        # nominal leg stiffness (N/m)
    k_min: float = 0.0         # lower stiffness bound (N/m)
    k_max: float = 10000.0     # upper stiffness bound (N/m)
    g_0: float = 9.81          # gravitational acceleration (m/s^2)
    L_e: float = 0.01          # phase-transition margin (m)
    delta_retract: float = 0.075  # mid-swing leg retraction (m)

    def __post_init__(self):
        if self.m_h <= 0.0:
            raise ParamError(f"hip mass must be positive, got {self.m_h}")
        if self.m_f < 0.0:
            raise ParamError(f"foot mass must be nonnegative, got {self.m_f}")
        if self.L_0 <= 0.0:
            raise ParamError(f"rest length must be positive, got {self.L_0}")
        if not 0.0 < self.alpha_0 < math.pi / 2:
            raise ParamError(f"angle of attack must lie in (0, pi/2), got {self.alpha_0}")
        if not 0.0 <= self.k_min < self.k_0 < self.k_max:
            raise ParamError(
                f"stiffness bounds must satisfy 0 <= k_min < k_0 < k_max, "
                f"got k_min={self.k_min}, k_0={self.k_0}, k_max={self.k_max}"
            )
        if not math.isfinite(self.k_max):
            raise ParamError("k_max must be finite")
        if self.g_0 <= 0.0:
            raise ParamError(f"gravity must be positive, got {self.g_0}")
        if not 0.0 < self.L_e < self.L_0:
            raise ParamError(f"transition margin must lie in (0, L_0), got {self.L_e}")
        if not 0.0 <= self.delta_retract < self.L_0:
            raise ParamError(
                f"retraction must lie in [0, L_0), got {self.delta_retract}"
            )

    @property
    def d_com(self) -> float:
        """Distance from the hip to the swing-leg center of mass (m)."""
        return self.m_f * self.L_0 / (self.m_h + self.m_f)

    @property
    def J_com(self) -> float:
        """Swing-leg moment of inertia about its center of mass (kg m^2)."""
        d = self.d_com
        return self.m_h * d * d + self.m_f * (self.L_0 - d) ** 2

    @property
    def touchdown_height(self) -> float:
        """Hip height at which the massless swing leg touches down (m)."""
        return self.L_0 * math.sin(self.alpha_0)


@dataclass(frozen=True)
class ControlGains:
    """Feedback gains for the stiffness and swing-leg controllers.

    The swing torque and knee force are unbounded by default; tau_max
    saturates both when set finite.
    """

    kappa_p: float = 350.0   # hip-height error, proportional
    kappa_d: float = 40.0    # hip-height error, derivative
    kappa_v: float = 15.0    # forward-speed error (double support only)
    kappa_a: float = 1000.0  # swing-angle error, proportional
    kappa_w: float = 40.0    # swing-angle error, derivative
    kappa_l: float = 1000.0  # leg-length error, proportional
    kappa_n: float = 40.0    # leg-length error, derivative
    tau_max: float = math.inf  # bound on |tau|, |tau2| (N m / N)

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v <= 0.0:
                raise ParamError(f"gain {f.name} must be positive, got {v}")


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and sampling intervals for the hybrid integrator."""

    rel_tol: float = 1e-9
    abs_tol: float = 1e-9
    max_step: float = 0.05      # s
    event_tol: float = 1e-10    # s, event localization budget
    output_dt: float = 1e-3     # s, trace sampling interval
    segment_budget: float = 5.0  # s, abort if a single phase exceeds this

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v <= 0.0:
                raise ParamError(f"integrator setting {f.name} must be positive, got {v}")


TABLE_PARAMS = WalkerParams()
TABLE_GAINS = ControlGains()
