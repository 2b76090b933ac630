"""Passive limit cycle search and reference-gait construction.

The reference gait is a periodic curve (q2*, q1dot*) parameterized by the
horizontal hip position q1, fitted as finite Fourier series to one stride
of the passive walker's limit cycle.  Swing-leg angle and length
references are per-step polynomials in time, rebuilt at every lift-off.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .dynamics import energies, phase_terms as _terms
from .integrate import IntegratorConfig, PassiveController, RunOutcome, run_gait
from .params import WalkerParams
from .state import HybridState, Phase
from .transitions import EventKind


class NoGaitError(RuntimeError):
    """The limit-cycle search could not produce a walking gait."""

    def __init__(self, message: str, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class FitResidualError(RuntimeError):
    """The Fourier fit misses the requested residual bound."""

    def __init__(self, message: str, harmonics_needed: int | None = None):
        super().__init__(message)
        self.harmonics_needed = harmonics_needed


@dataclass(frozen=True)
class FourierSeries1d:
    """Finite Fourier series in the phase angle 2*pi*(x - anchor)/period."""

    anchor: float
    period: float
    mean: float
    cos: tuple[float, ...]
    sin: tuple[float, ...]

    def _theta(self, x: float) -> float:
        return 2.0 * math.pi * (x - self.anchor) / self.period

    def value(self, x: float) -> float:
        th = self._theta(x)
        k = np.arange(1, len(self.cos) + 1)
        return self.mean + float(
            np.dot(self.cos, np.cos(k * th)) + np.dot(self.sin, np.sin(k * th))
        )

    def d1(self, x: float) -> float:
        th = self._theta(x)
        k = np.arange(1, len(self.cos) + 1)
        w = 2.0 * math.pi / self.period
        return float(
            w * (np.dot(np.asarray(self.sin) * k, np.cos(k * th))
                 - np.dot(np.asarray(self.cos) * k, np.sin(k * th)))
        )

    def d2(self, x: float) -> float:
        th = self._theta(x)
        k = np.arange(1, len(self.cos) + 1)
        w = 2.0 * math.pi / self.period
        return float(
            -w * w * (np.dot(np.asarray(self.cos) * k * k, np.cos(k * th))
                      + np.dot(np.asarray(self.sin) * k * k, np.sin(k * th)))
        )

    @staticmethod
    def fit(x: np.ndarray, values: np.ndarray, anchor: float, period: float,
            n_harmonics: int) -> "FourierSeries1d":
        th = 2.0 * math.pi * (x - anchor) / period
        cols = [np.ones_like(th)]
        for k in range(1, n_harmonics + 1):
            cols.append(np.cos(k * th))
            cols.append(np.sin(k * th))
        A = np.column_stack(cols)
        coeff, *_ = np.linalg.lstsq(A, values, rcond=None)
        return FourierSeries1d(
            anchor=anchor,
            period=period,
            mean=float(coeff[0]),
            cos=tuple(float(c) for c in coeff[1::2]),
            sin=tuple(float(c) for c in coeff[2::2]),
        )


@dataclass(frozen=True)
class LimitCycle:
    """Periodic passive gait, anchored at the touchdown section."""

    q2: float            # hip height at touchdown (= L_0 sin alpha_0)
    qd1: float           # forward hip velocity at touchdown (m/s)
    qd2: float           # vertical hip velocity at touchdown (m/s)
    chi: float           # hip-to-trailing-contact distance at touchdown (m)
    period: float        # stride period T (s)
    t_ds: float          # double-support duration (s)
    t_ss: float          # single-support duration (s)
    stride_length: float  # horizontal progress per stride (m)
    energy: float        # conserved total energy H* (J)
    residual: float      # return-map displacement at the section
    vlo_height: float    # hip height at the symmetric mid-stance point (m)
    vlo_speed: float     # forward speed at the symmetric mid-stance point (m/s)

    @property
    def mean_velocity(self) -> float:
        return self.stride_length / self.period

    def section_state(self, params: WalkerParams) -> HybridState:
        """Double-support state at the touchdown section (q1 = 0)."""
        return HybridState(
            phase=Phase.DOUBLE_SUPPORT,
            q=np.array([0.0, self.q2]),
            p=params.m_h * np.array([self.qd1, self.qd2]),
            c1=-self.chi,
            c2=params.L_0 * math.cos(params.alpha_0),
        )


@dataclass(frozen=True)
class SwingReference:
    """Minimum-jerk swing-angle trajectory for one step.

    Quintic from (angle at lift-off, zero rate, zero acceleration) to the
    touchdown-ready angle with zero end rate and acceleration; held at the
    end value once the swing time has elapsed.
    """

    a: tuple[float, float, float, float, float, float]
    t_lo: float
    t_swing: float

    def _tau(self, t: float) -> float:
        return min(max(t - self.t_lo, 0.0), self.t_swing)

    def value(self, t: float) -> float:
        tau = self._tau(t)
        a = self.a
        return a[0] + tau * (a[1] + tau * (a[2] + tau * (a[3] + tau * (a[4] + tau * a[5]))))

    def d1(self, t: float) -> float:
        tau = t - self.t_lo
        if tau <= 0.0 or tau >= self.t_swing:
            return 0.0
        a = self.a
        return a[1] + tau * (2 * a[2] + tau * (3 * a[3] + tau * (4 * a[4] + tau * 5 * a[5])))

    def d2(self, t: float) -> float:
        tau = t - self.t_lo
        if tau <= 0.0 or tau >= self.t_swing:
            return 0.0
        a = self.a
        return 2 * a[2] + tau * (6 * a[3] + tau * (12 * a[4] + tau * 20 * a[5]))


def make_swing_reference(q3_at_lo: float, t_lo: float, t_swing: float,
                         alpha_0: float) -> SwingReference:
    """Quintic swing reference ending at the touchdown-ready angle pi - alpha_0."""
    if t_swing <= 0.0:
        raise ValueError("swing time must be positive")
    delta = (math.pi - alpha_0) - q3_at_lo
    T = t_swing
    a = (q3_at_lo, 0.0, 0.0, 10.0 * delta / T**3, -15.0 * delta / T**4, 6.0 * delta / T**5)
    return SwingReference(a=a, t_lo=t_lo, t_swing=t_swing)


@dataclass(frozen=True)
class RetractionReference:
    """Quadratic swing-leg length trajectory for one step.

    Passes through the length at lift-off, the retracted length at
    mid-swing, and the rest length at the end of the swing; held at the
    rest length afterwards.
    """

    b: tuple[float, float, float]
    t_lo: float
    t_swing: float
    rest_length: float

    def value(self, t: float) -> float:
        tau = t - self.t_lo
        if tau >= self.t_swing:
            return self.rest_length
        tau = max(tau, 0.0)
        return self.b[0] + tau * (self.b[1] + tau * self.b[2])

    def d1(self, t: float) -> float:
        tau = t - self.t_lo
        if tau <= 0.0 or tau >= self.t_swing:
            return 0.0
        return self.b[1] + 2.0 * self.b[2] * tau

    def d2(self, t: float) -> float:
        tau = t - self.t_lo
        if tau <= 0.0 or tau >= self.t_swing:
            return 0.0
        return 2.0 * self.b[2]


def make_retraction_reference(q4_at_lo: float, t_lo: float, t_swing: float,
                              params: WalkerParams) -> RetractionReference:
    """Quadratic through lift-off length, mid-swing retraction, rest length."""
    if t_swing <= 0.0:
        raise ValueError("swing time must be positive")
    if q4_at_lo > params.L_0 * (1.0 + 1e-9):
        raise ValueError("swing-leg length above rest length at lift-off")
    T = t_swing
    L0 = params.L_0
    mid = L0 - params.delta_retract
    b1 = (4.0 * mid - 3.0 * q4_at_lo - L0) / T
    b2 = (2.0 * q4_at_lo + 2.0 * L0 - 4.0 * mid) / (T * T)
    return RetractionReference(
        b=(q4_at_lo, b1, b2), t_lo=t_lo, t_swing=t_swing, rest_length=L0
    )


@dataclass(frozen=True)
class ReferenceGait:
    """Fourier-parameterized hip reference plus the nominal swing time."""

    q2_series: FourierSeries1d
    qd1_series: FourierSeries1d
    stride_length: float
    t_swing: float
    residual_q2: float
    residual_qd1: float


# ---------------------------------------------------------------------------
# Limit-cycle shooting

_MAP_CONFIG = IntegratorConfig(
    rel_tol=1e-12, abs_tol=1e-12, max_step=0.05, output_dt=100.0
)


def stride_map(qd1: float, qd2: float, chi: float, params: WalkerParams):
    """One passive stride from the touchdown section.

    Returns the next section coordinates (qd1', qd2', chi'), the stride
    period, the lift-off time and the horizontal progress.  Used to verify
    that a found cycle really is a fixed point of the return map.
    """
    section = HybridState(
        phase=Phase.DOUBLE_SUPPORT,
        q=np.array([0.0, params.touchdown_height]),
        p=params.m_h * np.array([qd1, qd2]),
        c1=-chi,
        c2=params.L_0 * math.cos(params.alpha_0),
    )
    trace = run_gait(section, PassiveController(), params, _MAP_CONFIG, n_steps=1)
    if trace.outcome is not RunOutcome.COMPLETED:
        raise NoGaitError(
            f"stride failed ({trace.outcome.value}: {trace.detail}) "
            f"from (qd1={qd1:.6f}, qd2={qd2:.6f}, chi={chi:.6f})",
            last_iterate=(qd1, qd2, chi),
        )
    td = next(e for e in trace.events if e.kind is EventKind.TOUCHDOWN)
    lo = next(e for e in trace.events if e.kind is EventKind.LIFTOFF)
    post = td.post_state
    qd1_n, qd2_n = post.p / params.m_h
    chi_n = post.q[0] - post.c1
    return (qd1_n, qd2_n, chi_n), td.t, lo.t, post.q[0]


def _half_stride(q2_mid: float, qd1_mid: float, params: WalkerParams) -> dict:
    """Integrate half a stride from the symmetric mid-stance point.

    The walker starts with the hip exactly above the stance foot and zero
    vertical velocity, runs through touchdown into double support, and
    stops when the hip crosses the midpoint between the contacts.  For a
    symmetric gait the vertical velocity vanishes there.
    """
    mh, L0 = params.m_h, params.L_0
    h_td = params.touchdown_height
    fall_h = 0.1 * L0

    def ss_rhs(t, y):
        st = HybridState(Phase.SINGLE_SUPPORT_VSLIP, y[:2], y[2:], c1=0.0)
        tm = _terms(st, params)
        return np.concatenate([tm.qdot, tm.pdot_drift])

    def touchdown(t, y):
        return y[1] - h_td

    touchdown.terminal, touchdown.direction = True, -1

    def fall(t, y):
        return y[1] - fall_h

    fall.terminal, fall.direction = True, -1

    y0 = np.array([0.0, q2_mid, mh * qd1_mid, 0.0])
    sol = solve_ivp(ss_rhs, (0.0, 5.0), y0, method="RK45", rtol=1e-12, atol=1e-12,
                    events=[touchdown, fall])
    if len(sol.t_events[0]) == 0:
        raise NoGaitError(
            f"no touchdown from mid-stance (q2={q2_mid:.4f}, qd1={qd1_mid:.4f})",
            last_iterate=(q2_mid, qd1_mid),
        )
    t_td = float(sol.t_events[0][0])
    y_td = sol.y_events[0][0]
    c2 = y_td[0] + L0 * math.cos(params.alpha_0)

    def ds_rhs(t, y):
        st = HybridState(Phase.DOUBLE_SUPPORT, y[:2], y[2:], c1=0.0, c2=c2)
        tm = _terms(st, params)
        return np.concatenate([tm.qdot, tm.pdot_drift])

    def midpoint(t, y):
        return y[0] - 0.5 * c2

    midpoint.terminal, midpoint.direction = True, +1

    def trailing_liftoff(t, y):
        return L0 - math.hypot(y[0], y[1])

    trailing_liftoff.terminal, trailing_liftoff.direction = True, -1

    sol2 = solve_ivp(ds_rhs, (t_td, t_td + 5.0), y_td, method="RK45",
                     rtol=1e-12, atol=1e-12, events=[midpoint, trailing_liftoff, fall])
    if len(sol2.t_events[0]) == 0:
        raise NoGaitError(
            f"no symmetric double-support midpoint from (q2={q2_mid:.4f}, "
            f"qd1={qd1_mid:.4f})",
            last_iterate=(q2_mid, qd1_mid),
        )
    t_mid = float(sol2.t_events[0][0])
    y_mid = sol2.y_events[0][0]
    return dict(
        t_td=t_td, y_td=y_td, c2=c2, t_mid=t_mid, y_mid=y_mid,
        qd2_mid=y_mid[3] / mh, velocity=(0.5 * c2) / t_mid,
    )


def find_limit_cycle(
    params: WalkerParams,
    initial_guess: tuple[float, float] = (0.96, 1.05),
    target_velocity: float | None = None,
    tol: float = 1e-11,
    max_iter: int = 50,
) -> LimitCycle:
    """Shoot for a symmetric passive walking cycle.

    Shoots half a stride from the symmetric mid-stance point (hip above
    the stance foot, zero vertical velocity: `initial_guess` is the hip
    height and forward speed there).  Symmetry closes the orbit when the
    vertical velocity also vanishes at the double-support midpoint, which
    leaves the one-parameter energy family free; with no target velocity
    the mid-stance height stays pinned at the guess, otherwise both
    unknowns are solved so the cycle's mean velocity hits the target.

    The returned cycle is anchored at the touchdown section and its
    residual is verified on the full stride-to-stride return map.
    """
    if params.touchdown_height <= 0.12 * params.L_0:
        raise NoGaitError(
            "angle of attack too shallow: touchdown height is at the fall threshold"
        )

    s = np.array(initial_guess, dtype=float)

    def residual(sv: np.ndarray) -> np.ndarray:
        r = _half_stride(sv[0], sv[1], params)
        if target_velocity is None:
            return np.array([r["qd2_mid"]])
        return np.array([r["qd2_mid"], r["velocity"] - target_velocity])

    def step_unknowns(sv: np.ndarray, delta: np.ndarray) -> np.ndarray:
        if target_velocity is None:
            return np.array([sv[0], sv[1] - delta[0]])
        return sv - delta

    fs = residual(s)
    for _ in range(max_iter):
        if np.linalg.norm(fs, np.inf) < tol:
            break
        m = len(fs)
        J = np.empty((m, m))
        h = 1e-7
        for j in range(m):
            dp, dm = s.copy(), s.copy()
            idx = j + 1 if target_velocity is None else j
            dp[idx] += h
            dm[idx] -= h
            J[:, j] = (residual(dp) - residual(dm)) / (2.0 * h)
        try:
            delta = np.linalg.solve(J, fs)
        except np.linalg.LinAlgError as exc:
            raise NoGaitError(f"singular shooting Jacobian: {exc}", tuple(s))
        alpha = 1.0
        for _ in range(10):
            s_new = step_unknowns(s, alpha * delta)
            try:
                fs_new = residual(s_new)
            except NoGaitError:
                alpha *= 0.5
                continue
            if np.linalg.norm(fs_new) < np.linalg.norm(fs) or alpha < 1e-3:
                break
            alpha *= 0.5
        else:
            raise NoGaitError("shooting line search stalled", tuple(s))
        s, fs = s_new, fs_new
    else:
        raise NoGaitError(
            f"no convergence in {max_iter} iterations "
            f"(residual {np.linalg.norm(fs):.3e})",
            last_iterate=tuple(s),
        )

    r = _half_stride(s[0], s[1], params)
    mh = params.m_h
    qd1_td = r["y_td"][2] / mh
    qd2_td = r["y_td"][3] / mh
    chi = float(r["y_td"][0])
    (qd1_n, qd2_n, chi_n), _, _, _ = stride_map(qd1_td, qd2_td, chi, params)
    map_residual = math.sqrt(
        (qd1_n - qd1_td) ** 2 + (qd2_n - qd2_td) ** 2 + (chi_n - chi) ** 2
    )
    section = HybridState(
        phase=Phase.DOUBLE_SUPPORT,
        q=np.array([0.0, params.touchdown_height]),
        p=mh * np.array([qd1_td, qd2_td]),
        c1=-chi,
        c2=params.L_0 * math.cos(params.alpha_0),
    )
    _, _, H = energies(section, params)
    return LimitCycle(
        q2=params.touchdown_height,
        qd1=float(qd1_td),
        qd2=float(qd2_td),
        chi=chi,
        period=2.0 * r["t_mid"],
        t_ds=2.0 * (r["t_mid"] - r["t_td"]),
        t_ss=2.0 * r["t_td"],
        stride_length=float(r["c2"]),
        energy=H,
        residual=map_residual,
        vlo_height=float(s[0]),
        vlo_speed=float(s[1]),
    )


# ---------------------------------------------------------------------------
# Reference fitting

def stride_samples(cycle: LimitCycle, params: WalkerParams, n: int = 2000):
    """Dense (q1, q2, q1dot) samples over one stride of the passive cycle."""
    config = IntegratorConfig(
        rel_tol=1e-12, abs_tol=1e-12, max_step=0.05,
        output_dt=cycle.period / n,
    )
    trace = run_gait(cycle.section_state(params), PassiveController(), params,
                     config, n_steps=1)
    if trace.outcome is not RunOutcome.COMPLETED:
        raise NoGaitError(f"stride re-simulation failed: {trace.detail}")
    q1 = trace.column("q1")
    q2 = trace.column("q2")
    qd1 = trace.column("p1") / params.m_h
    return q1, q2, qd1


def fit_reference(
    cycle: LimitCycle,
    params: WalkerParams,
    n_harmonics: int = 25,
    max_residual: float | None = 1e-4,
) -> ReferenceGait:
    """Least-squares Fourier fit of (q2*, q1dot*) over one stride.

    Raises FitResidualError (reporting the harmonic count that would
    suffice) if the fit misses `max_residual`; pass None to skip the check.
    """
    q1, q2, qd1 = stride_samples(cycle, params)
    if np.min(qd1) <= 0.0:
        raise NoGaitError("cycle has non-positive forward velocity; cannot parameterize")
    anchor = float(q1[0])
    period = cycle.stride_length

    def build(n: int) -> tuple[FourierSeries1d, FourierSeries1d, float, float]:
        sq2 = FourierSeries1d.fit(q1, q2, anchor, period, n)
        sqd1 = FourierSeries1d.fit(q1, qd1, anchor, period, n)
        r2 = float(np.max(np.abs([sq2.value(x) for x in q1] - q2)))
        rd1 = float(np.max(np.abs([sqd1.value(x) for x in q1] - qd1)))
        return sq2, sqd1, r2, rd1

    sq2, sqd1, r2, rd1 = build(n_harmonics)
    if max_residual is not None and max(r2, rd1) > max_residual:
        needed = None
        for n in range(n_harmonics + 1, 65):
            _, _, a, b = build(n)
            if max(a, b) <= max_residual:
                needed = n
                break
        raise FitResidualError(
            f"fit residual {max(r2, rd1):.3e} exceeds {max_residual:.1e} "
            f"with {n_harmonics} harmonics"
            + (f"; {needed} harmonics suffice" if needed else ""),
            harmonics_needed=needed,
        )
    return ReferenceGait(
        q2_series=sq2,
        qd1_series=sqd1,
        stride_length=period,
        t_swing=cycle.t_ss,
        residual_q2=r2,
        residual_qd1=rd1,
    )


# ---------------------------------------------------------------------------
# Serialization

FORMAT_NAME = "springwalker-gait-reference"
FORMAT_VERSION = 1


def params_hash(params: WalkerParams) -> str:
    payload = json.dumps(asdict(params), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


def reference_to_json(params: WalkerParams, cycle: LimitCycle,
                      ref: ReferenceGait) -> str:
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "params_hash": params_hash(params),
        "params": asdict(params),
        "limit_cycle": asdict(cycle),
        "reference": {
            "stride_length": ref.stride_length,
            "t_swing": ref.t_swing,
            "residual_q2": ref.residual_q2,
            "residual_qd1": ref.residual_qd1,
            "q2_series": asdict(ref.q2_series),
            "qd1_series": asdict(ref.qd1_series),
        },
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def reference_from_json(text: str, params: WalkerParams | None = None
                        ) -> tuple[WalkerParams, LimitCycle, ReferenceGait]:
    doc = json.loads(text)
    if doc.get("format") != FORMAT_NAME:
        raise ValueError(f"not a gait-reference file: {doc.get('format')!r}")
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported gait-reference version {doc.get('version')!r}")
    stored = WalkerParams(**doc["params"])
    if params is not None and params_hash(params) != doc["params_hash"]:
        raise ValueError("gait-reference file was built for different walker parameters")
    cycle = LimitCycle(**doc["limit_cycle"])
    r = doc["reference"]

    def series(d) -> FourierSeries1d:
        return FourierSeries1d(
            anchor=d["anchor"], period=d["period"], mean=d["mean"],
            cos=tuple(d["cos"]), sin=tuple(d["sin"]),
        )

    ref = ReferenceGait(
        q2_series=series(r["q2_series"]),
        qd1_series=series(r["qd1_series"]),
        stride_length=r["stride_length"],
        t_swing=r["t_swing"],
        residual_q2=r["residual_q2"],
        residual_qd1=r["residual_qd1"],
    )
    return stored, cycle, ref
