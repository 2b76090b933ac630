"""Command-line interface: find-cycle, walk and compare.

Scenario configs are flat dotted-key text files (`walker.m_h = 15.0`)
with `#` comments; every key has a nominal default, so an empty config
reproduces the nominal desk-scale scenario.  Exit codes: 0 success,
2 gait failure, 3 non-convergence, 4 config error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .control import GaitController
from .integrate import PassiveController, RunOutcome, SimTrace, run_gait
from .metrics import GaitMetrics, InsufficientDataError, gait_metrics
from .params import ControlGains, IntegratorConfig, ParamError, WalkerParams
from .reference import (
    FitResidualError,
    LimitCycle,
    NoGaitError,
    ReferenceGait,
    find_limit_cycle,
    fit_reference,
    reference_from_json,
    reference_to_json,
)
from .state import HybridState, Model, Phase

logger = logging.getLogger("springwalker")

EXIT_OK = 0
EXIT_GAIT_FAILURE = 2
EXIT_NO_CONVERGENCE = 3
EXIT_CONFIG = 4


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulation scenario: model, parameters, run length, outputs."""

    model: Model = Model.VSLIP
    walker: WalkerParams = field(default_factory=WalkerParams)
    gains: ControlGains = field(default_factory=ControlGains)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    n_steps: int = 20
    target_velocity: float = 1.18
    n_harmonics: int = 25
    seed: int = 0
    perturb_scale: float = 0.0  # N s, applied to the initial hip momentum
    # Initial condition: the limit-cycle touchdown state, or an explicit
    # double-support state from the initial.* keys.
    initial_mode: str = "from-limit-cycle"
    initial_q1: float = 0.0
    initial_q2: float = 0.0
    initial_qd1: float = 0.0
    initial_qd2: float = 0.0
    initial_c1: float = 0.0
    initial_c2: float = 0.0

    def validate(self) -> None:
        if self.n_steps < 1:
            raise ConfigError("run.n_steps must be at least 1")
        if self.n_harmonics < 0:
            raise ConfigError("reference.n_harmonics must be nonnegative")
        if self.perturb_scale < 0.0:
            raise ConfigError("run.perturb_scale must be nonnegative")
        if self.model in (Model.SWING, Model.KNEE) and self.walker.m_f <= 0.0:
            raise ConfigError(f"model {self.model.value} requires positive foot mass")
        if self.initial_mode not in ("from-limit-cycle", "explicit"):
            raise ConfigError(
                f"run.initial must be 'from-limit-cycle' or 'explicit', "
                f"got {self.initial_mode!r}"
            )
        if self.initial_mode == "explicit":
            if self.initial_q2 <= 0.0:
                raise ConfigError("initial.q2 must be positive")
            if not self.initial_c1 < self.initial_q1 < self.initial_c2:
                raise ConfigError(
                    "explicit initial state must start in double support "
                    "with initial.c1 < initial.q1 < initial.c2"
                )


# -- flat dotted-key config format ------------------------------------------

_SECTIONS = {
    "walker": (WalkerParams, "walker"),
    "gains": (ControlGains, "gains"),
    "integrator": (IntegratorConfig, "integrator"),
}

_RUN_KEYS = {
    "run.model": ("model", str),
    "run.n_steps": ("n_steps", int),
    "run.seed": ("seed", int),
    "run.perturb_scale": ("perturb_scale", float),
    "run.initial": ("initial_mode", str),
    "initial.q1": ("initial_q1", float),
    "initial.q2": ("initial_q2", float),
    "initial.qd1": ("initial_qd1", float),
    "initial.qd2": ("initial_qd2", float),
    "initial.c1": ("initial_c1", float),
    "initial.c2": ("initial_c2", float),
    "reference.target_velocity": ("target_velocity", float),
    "reference.n_harmonics": ("n_harmonics", int),
}


def parse_config_text(text: str) -> ScenarioConfig:
    """Parse the flat `section.key = value` format into a ScenarioConfig."""
    sections: dict[str, dict[str, float]] = {"walker": {}, "gains": {}, "integrator": {}}
    top: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in _RUN_KEYS:
            attr, conv = _RUN_KEYS[key]
            try:
                top[attr] = conv(value)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for {key}: {exc}")
            continue
        if "." not in key:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        section, name = key.split(".", 1)
        if section not in sections:
            raise ConfigError(f"line {lineno}: unknown section {section!r}")
        cls = _SECTIONS[section][0]
        if name not in {f.name for f in dataclasses.fields(cls)}:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            sections[section][name] = float(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}")
    try:
        cfg = ScenarioConfig(
            walker=WalkerParams(**sections["walker"]),
            gains=ControlGains(**sections["gains"]),
            integrator=IntegratorConfig(**sections["integrator"]),
            **(
                {**top, "model": Model(top["model"])}
                if "model" in top
                else top
            ),
        )
    except (ParamError, ValueError) as exc:
        raise ConfigError(str(exc))
    cfg.validate()
    return cfg


def config_to_text(cfg: ScenarioConfig) -> str:
    """Serialize a ScenarioConfig back to the flat dotted-key format."""
    lines = [
        "# springwalker scenario",
        f"run.model = {cfg.model.value}",
        f"run.n_steps = {cfg.n_steps}",
        f"run.seed = {cfg.seed}",
        f"run.perturb_scale = {cfg.perturb_scale!r}",
        f"run.initial = {cfg.initial_mode}",
        f"initial.q1 = {cfg.initial_q1!r}",
        f"initial.q2 = {cfg.initial_q2!r}",
        f"initial.qd1 = {cfg.initial_qd1!r}",
        f"initial.qd2 = {cfg.initial_qd2!r}",
        f"initial.c1 = {cfg.initial_c1!r}",
        f"initial.c2 = {cfg.initial_c2!r}",
        f"reference.target_velocity = {cfg.target_velocity!r}",
        f"reference.n_harmonics = {cfg.n_harmonics}",
    ]
    for section, (cls, attr) in _SECTIONS.items():
        obj = getattr(cfg, attr)
        for f in dataclasses.fields(cls):
            lines.append(f"{section}.{f.name} = {getattr(obj, f.name)!r}")
    return "\n".join(lines) + "\n"


def load_config(path: str | os.PathLike | None) -> ScenarioConfig:
    if path is None:
        return ScenarioConfig()
    return parse_config_text(Path(path).read_text())


# -- trace serialization -----------------------------------------------------

CSV_COLUMNS = [
    "t", "phase", "q1", "q2", "q3", "q4", "p1", "p2", "p3", "p4",
    "u1", "u2", "tau1", "tau2", "h1", "h2", "h3", "h4", "K", "V", "H",
    "clamped",
]


def _fmt(x: float | None) -> str:
    # repr keeps the shortest round-trip decimal form (17 significant
    # digits where needed), which keeps downstream plotting bit-stable.
    return "" if x is None else repr(float(x))


def trace_to_csv(trace: SimTrace) -> str:
    rows = [",".join(CSV_COLUMNS)]
    for s in trace.samples:
        n = s.state.phase.dim
        q = [s.state.q[i] if i < n else None for i in range(4)]
        p = [s.state.p[i] if i < n else None for i in range(4)]
        row = [
            _fmt(s.t), s.state.phase.value,
            *(_fmt(v) for v in q), *(_fmt(v) for v in p),
            _fmt(s.u.u1), _fmt(s.u.u2), _fmt(s.u.tau), _fmt(s.u.tau2),
            *(_fmt(v) for v in s.h),
            _fmt(s.K), _fmt(s.V), _fmt(s.H),
            "1" if s.u.clamped else "0",
        ]
        rows.append(",".join(row))
    return "\n".join(rows) + "\n"


def events_to_csv(trace: SimTrace) -> str:
    rows = ["kind,t,phase_from,phase_to,energy_dissipated"]
    for e in trace.events:
        rows.append(
            f"{e.kind.value},{_fmt(e.t)},{e.pre_state.phase.value},"
            f"{e.post_state.phase.value},{_fmt(e.energy_dissipated)}"
        )
    return "\n".join(rows) + "\n"


def metrics_to_text(model: Model, metrics: GaitMetrics, outcome: RunOutcome) -> str:
    lines = [
        f"model = {model.value}",
        f"outcome = {outcome.value}",
        f"mean_velocity = {metrics.mean_velocity!r}",
        f"cost_of_transport = {metrics.cost_of_transport!r}",
        f"stride_period = {metrics.stride_period!r}",
        f"duty_factor = {metrics.duty_factor!r}",
        f"energy_min = {metrics.energy_min!r}",
        f"energy_max = {metrics.energy_max!r}",
        f"energy_mean = {metrics.energy_mean!r}",
        f"dissipated_impact_energy = {metrics.dissipated_impact_energy!r}",
        f"total_mass = {metrics.total_mass!r}",
        f"n_strides = {metrics.n_strides}",
    ]
    return "\n".join(lines) + "\n"


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


# -- commands ----------------------------------------------------------------

def build_reference(cfg: ScenarioConfig) -> tuple[LimitCycle, ReferenceGait]:
    cycle = find_limit_cycle(cfg.walker, target_velocity=cfg.target_velocity)
    ref = fit_reference(cycle, cfg.walker, n_harmonics=cfg.n_harmonics)
    return cycle, ref


def initial_state(cfg: ScenarioConfig, cycle: LimitCycle) -> HybridState:
    if cfg.initial_mode == "explicit":
        state = HybridState(
            phase=Phase.DOUBLE_SUPPORT,
            q=np.array([cfg.initial_q1, cfg.initial_q2]),
            p=cfg.walker.m_h * np.array([cfg.initial_qd1, cfg.initial_qd2]),
            c1=cfg.initial_c1,
            c2=cfg.initial_c2,
        )
    else:
        state = cycle.section_state(cfg.walker)
    if cfg.perturb_scale > 0.0:
        rng = np.random.default_rng(cfg.seed)
        p = state.p + rng.normal(0.0, cfg.perturb_scale, size=2)
        state = HybridState(
            phase=state.phase, q=state.q, p=p, c1=state.c1, c2=state.c2
        )
    return state


def make_controller(cfg: ScenarioConfig, ref: ReferenceGait):
    if cfg.model is Model.SLIP:
        return PassiveController()
    return GaitController(cfg.model, ref, cfg.gains, cfg.walker)


def cmd_find_cycle(args) -> int:
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        cycle, ref = build_reference(cfg)
    except NoGaitError as exc:
        print(f"no gait found: {exc}", file=sys.stderr)
        if exc.last_iterate is not None:
            print(f"last iterate: {exc.last_iterate}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except FitResidualError as exc:
        print(f"reference fit failed: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    path = out_dir / "gait_reference.json"
    _atomic_write(path, reference_to_json(cfg.walker, cycle, ref))
    print(f"residual = {cycle.residual:.3e}")
    print(f"period = {cycle.period:.6f} s")
    print(f"stride = {cycle.stride_length:.6f} m")
    print(f"velocity = {cycle.mean_velocity:.6f} m/s")
    print(f"wrote {path}")
    return EXIT_OK


def run_scenario(cfg: ScenarioConfig, cycle: LimitCycle, ref: ReferenceGait,
                 out_dir: Path, label: str | None = None):
    """Run one closed-loop scenario and write its trace, events and metrics."""
    label = label or cfg.model.value
    controller = make_controller(cfg, ref)
    trace = run_gait(initial_state(cfg, cycle), controller, cfg.walker,
                     cfg.integrator, cfg.n_steps)
    out_dir.mkdir(parents=True, exist_ok=True)
    _atomic_write(out_dir / f"{label}_trace.csv", trace_to_csv(trace))
    _atomic_write(out_dir / f"{label}_events.csv", events_to_csv(trace))
    metrics = None
    if trace.outcome is RunOutcome.COMPLETED:
        # Short runs keep at least two strides in the steady window.
        discard = min(5, max(0, cfg.n_steps - 2))
        try:
            metrics = gait_metrics(trace, cfg.walker, discard_strides=discard)
            _atomic_write(out_dir / f"{label}_metrics.txt",
                          metrics_to_text(cfg.model, metrics, trace.outcome))
        except InsufficientDataError as exc:
            logger.warning("metrics unavailable for %s: %s", label, exc)
    return trace, metrics


def _load_or_build_reference(cfg: ScenarioConfig, ref_path: str | None,
                             out_dir: Path) -> tuple[LimitCycle, ReferenceGait]:
    if ref_path is not None:
        _, cycle, ref = reference_from_json(Path(ref_path).read_text(), cfg.walker)
        return cycle, ref
    cached = out_dir / "gait_reference.json"
    if cached.exists():
        try:
            _, cycle, ref = reference_from_json(cached.read_text(), cfg.walker)
            return cycle, ref
        except ValueError:
            logger.info("cached reference incompatible; rebuilding")
    cycle, ref = build_reference(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    _atomic_write(cached, reference_to_json(cfg.walker, cycle, ref))
    return cycle, ref


def cmd_walk(args) -> int:
    try:
        cfg = load_config(args.config)
        if args.model:
            cfg = dataclasses.replace(cfg, model=Model(args.model))
        if args.steps:
            cfg = dataclasses.replace(cfg, n_steps=args.steps)
        cfg.validate()
    except (ConfigError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.out_dir)
    try:
        cycle, ref = _load_or_build_reference(cfg, args.reference, out_dir)
    except (NoGaitError, FitResidualError) as exc:
        print(f"reference construction failed: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    trace, metrics = run_scenario(cfg, cycle, ref, out_dir)
    if trace.outcome is not RunOutcome.COMPLETED:
        print(f"gait failure: {trace.outcome.value}: {trace.detail}", file=sys.stderr)
        return EXIT_GAIT_FAILURE
    print(f"completed {cfg.n_steps} steps")
    if metrics is not None:
        print(f"mean_velocity = {metrics.mean_velocity:.4f} m/s")
        print(f"cost_of_transport = {metrics.cost_of_transport:.6f}")
    return EXIT_OK


def _compare_one(payload):
    cfg_text, model_name, out_dir_s, ref_json = payload
    cfg = dataclasses.replace(parse_config_text(cfg_text), model=Model(model_name))
    _, cycle, ref = reference_from_json(ref_json, cfg.walker)
    trace, metrics = run_scenario(cfg, cycle, ref, Path(out_dir_s))
    return model_name, trace.outcome.value, trace.detail, metrics


def cmd_compare(args) -> int:
    try:
        cfg = load_config(args.config)
        models = [Model(m.strip()) for m in args.models.split(",") if m.strip()]
        if len(models) < 2:
            raise ConfigError("compare needs at least two models")
        if args.steps:
            cfg = dataclasses.replace(cfg, n_steps=args.steps)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.out_dir)
    try:
        cycle, ref = _load_or_build_reference(cfg, args.reference, out_dir)
    except (NoGaitError, FitResidualError) as exc:
        print(f"reference construction failed: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    ref_json = reference_to_json(cfg.walker, cycle, ref)
    cfg_text = config_to_text(cfg)
    payloads = [(cfg_text, m.value, str(out_dir), ref_json) for m in models]
    results = []
    max_workers = min(len(payloads), os.cpu_count() or 1)
    with concurrent.futures.ProcessPoolExecutor(max_workers=max_workers) as ex:
        for res in ex.map(_compare_one, payloads):
            results.append(res)

    header = f"{'model':8s} {'outcome':10s} {'v [m/s]':>9s} {'CoT':>10s} {'duty':>6s} {'H_mean [J]':>11s}"
    print(header)
    print("-" * len(header))
    table_rows = ["model,outcome,mean_velocity,cost_of_transport,duty_factor,energy_mean"]
    failed = False
    for name, outcome, detail, metrics in results:
        if metrics is None:
            failed = True
            print(f"{name:8s} {outcome:10s} {'-':>9s} {'-':>10s} {'-':>6s} {'-':>11s}  ({detail})")
            table_rows.append(f"{name},{outcome},,,,")
        else:
            print(
                f"{name:8s} {outcome:10s} {metrics.mean_velocity:9.4f} "
                f"{metrics.cost_of_transport:10.6f} {metrics.duty_factor:6.3f} "
                f"{metrics.energy_mean:11.3f}"
            )
            table_rows.append(
                f"{name},{outcome},{metrics.mean_velocity!r},"
                f"{metrics.cost_of_transport!r},{metrics.duty_factor!r},"
                f"{metrics.energy_mean!r}"
            )
    _atomic_write(out_dir / "comparison.csv", "\n".join(table_rows) + "\n")
    return EXIT_GAIT_FAILURE if failed else EXIT_OK


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("SPRINGWALKER_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = argparse.ArgumentParser(
        prog="springwalker",
        description="Compliant bipedal walker simulation and stiffness control",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_find = sub.add_parser("find-cycle", help="find the passive limit cycle and fit the gait reference")
    p_find.add_argument("--config", default=None, help="scenario config file")
    p_find.add_argument("--out-dir", default=".", help="output directory")
    p_find.set_defaults(func=cmd_find_cycle)

    p_walk = sub.add_parser("walk", help="run one closed-loop scenario")
    p_walk.add_argument("--config", default=None)
    p_walk.add_argument("--out-dir", default=".")
    p_walk.add_argument("--model", default=None, choices=[m.value for m in Model])
    p_walk.add_argument("--steps", type=int, default=None)
    p_walk.add_argument("--reference", default=None, help="gait reference JSON file")
    p_walk.set_defaults(func=cmd_walk)

    p_cmp = sub.add_parser("compare", help="run several models against one reference")
    p_cmp.add_argument("--config", default=None)
    p_cmp.add_argument("--out-dir", default=".")
    p_cmp.add_argument("--models", default="vslip,swing,knee")
    p_cmp.add_argument("--steps", type=int, default=None)
    p_cmp.add_argument("--reference", default=None)
    p_cmp.set_defaults(func=cmd_compare)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
