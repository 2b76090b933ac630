#!/usr/bin/env python3
"""Sweep the reference-cycle speed and report the resulting steady gaits.

Shows how the feet-model steady velocities and costs of transport scale
with the passive cycle the controller tracks.

Usage:
    python scripts/sweep_reference_speed.py [v_min v_max n]
"""

import sys

import numpy as np

from springwalker.control import GaitController
from springwalker.integrate import IntegratorConfig, RunOutcome, run_gait
from springwalker.metrics import gait_metrics
from springwalker.params import ControlGains, WalkerParams
from springwalker.reference import NoGaitError, find_limit_cycle, fit_reference
from springwalker.state import Model


def main() -> int:
    v_min, v_max, n = 1.10, 1.26, 5
    if len(sys.argv) == 4:
        v_min, v_max = float(sys.argv[1]), float(sys.argv[2])
        n = int(sys.argv[3])
    params = WalkerParams()
    gains = ControlGains()
    config = IntegratorConfig()
    print(f"{'v_ref':>6s} {'T_ss':>7s}  {'v_swing':>8s} {'C_swing':>8s}  {'v_knee':>8s} {'C_knee':>8s}")
    for v_ref in np.linspace(v_min, v_max, n):
        try:
            cycle = find_limit_cycle(params, target_velocity=float(v_ref))
            ref = fit_reference(cycle, params, n_harmonics=32)
        except NoGaitError as exc:
            print(f"{v_ref:6.3f}  no cycle: {exc}")
            continue
        row = [f"{v_ref:6.3f} {cycle.t_ss:7.4f} "]
        for model in (Model.SWING, Model.KNEE):
            ctl = GaitController(model, ref, gains, params)
            tr = run_gait(cycle.section_state(params), ctl, params, config, n_steps=14)
            if tr.outcome is RunOutcome.COMPLETED:
                m = gait_metrics(tr, params)
                row.append(f"{m.mean_velocity:8.4f} {m.cost_of_transport:8.4f} ")
            else:
                row.append(f"{tr.outcome.value:>17s} ")
        print(" ".join(row))
    return 0


if __name__ == "__main__":
    sys.exit(main())
