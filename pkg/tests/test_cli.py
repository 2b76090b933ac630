"""CLI behavior: config format, exit codes, output files, determinism."""

from __future__ import annotations

import math

import pytest

from springwalker.cli import (
    EXIT_CONFIG,
    EXIT_GAIT_FAILURE,
    EXIT_NO_CONVERGENCE,
    EXIT_OK,
    ConfigError,
    ScenarioConfig,
    config_to_text,
    main,
    parse_config_text,
)


@pytest.fixture(scope="module")
def ref_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["find-cycle", "--out-dir", str(d)]) == EXIT_OK
    return d


def test_config_round_trip_identity():
    cfg = ScenarioConfig()
    text = config_to_text(cfg)
    assert parse_config_text(text) == cfg
    # and once more through the serializer: full fixed point
    assert config_to_text(parse_config_text(text)) == text


def test_config_comments_and_overrides():
    cfg = parse_config_text(
        """
        # comment line
        run.model = knee   # trailing comment
        walker.m_f = 3.0
        gains.kappa_p = 400
        run.n_steps = 7
        """
    )
    assert cfg.model.value == "knee"
    assert cfg.walker.m_f == 3.0
    assert cfg.gains.kappa_p == 400.0
    assert cfg.n_steps == 7


@pytest.mark.parametrize("text", [
    "walker.unknown = 1.0",
    "nonsense line",
    "bad.section = 2",
    "walker.m_h = not-a-number",
    "walker.m_h = -5",          # violates the parameter invariant
    "run.n_steps = 0",
])
def test_config_rejects_bad_input(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_find_cycle_writes_deterministic_file(ref_dir, tmp_path):
    first = (ref_dir / "gait_reference.json").read_bytes()
    assert main(["find-cycle", "--out-dir", str(tmp_path)]) == EXIT_OK
    second = (tmp_path / "gait_reference.json").read_bytes()
    assert first == second


def test_find_cycle_absurd_angle_exits_nonconvergent(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(f"walker.alpha_0 = {math.radians(5.0)}\n")
    assert main(["find-cycle", "--config", str(cfg), "--out-dir", str(tmp_path)]) \
        == EXIT_NO_CONVERGENCE


def test_bad_config_exits_config_error(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("walker.m_h = -1\n")
    assert main(["walk", "--config", str(cfg), "--out-dir", str(tmp_path)]) == EXIT_CONFIG


def test_walk_passive_writes_zero_inputs(ref_dir):
    rc = main([
        "walk", "--model", "slip", "--steps", "6", "--out-dir", str(ref_dir),
        "--reference", str(ref_dir / "gait_reference.json"),
    ])
    assert rc == EXIT_OK
    lines = (ref_dir / "slip_trace.csv").read_text().splitlines()
    header = lines[0].split(",")
    iu1, iu2 = header.index("u1"), header.index("u2")
    for row in lines[1:]:
        cells = row.split(",")
        assert float(cells[iu1]) == 0.0
        assert cells[iu2] == "" or float(cells[iu2]) == 0.0
    events = (ref_dir / "slip_events.csv").read_text().splitlines()
    assert events[0] == "kind,t,phase_from,phase_to,energy_dissipated"
    assert len(events) == 1 + 12  # liftoff + touchdown per step
    metrics = (ref_dir / "slip_metrics.txt").read_text()
    assert "cost_of_transport = 0.0" in metrics


def test_walk_rejects_mismatched_reference(ref_dir, tmp_path):
    cfg = tmp_path / "other.cfg"
    cfg.write_text("walker.m_h = 14.0\n")
    rc = main([
        "walk", "--config", str(cfg), "--model", "slip", "--steps", "3",
        "--out-dir", str(tmp_path),
        "--reference", str(ref_dir / "gait_reference.json"),
    ])
    assert rc == EXIT_CONFIG


def test_walk_gait_failure_exit_code(ref_dir, tmp_path):
    # A huge initial momentum perturbation makes the walker fall; partial
    # outputs are still written and the exit code is distinct.
    cfg = tmp_path / "perturbed.cfg"
    cfg.write_text("run.perturb_scale = 60.0\nrun.seed = 3\n")
    rc = main([
        "walk", "--config", str(cfg), "--model", "slip", "--steps", "8",
        "--out-dir", str(tmp_path),
        "--reference", str(ref_dir / "gait_reference.json"),
    ])
    assert rc == EXIT_GAIT_FAILURE
    assert (tmp_path / "slip_trace.csv").exists()


def test_walk_determinism_short(ref_dir, tmp_path_factory):
    ref = str(ref_dir / "gait_reference.json")
    outs = []
    for name in ("d1", "d2"):
        d = tmp_path_factory.mktemp(name)
        rc = main(["walk", "--model", "vslip", "--steps", "4",
                   "--out-dir", str(d), "--reference", ref])
        assert rc == EXIT_OK
        outs.append((d / "vslip_trace.csv").read_bytes())
    assert outs[0] == outs[1]


def test_compare_reports_partial_failures(ref_dir, tmp_path, capsys):
    # A push the passive walker cannot survive, while the controlled
    # stiffness rejects it: the failed scenario is marked, the other is
    # still reported, and the exit code flags the failure.
    cfg = tmp_path / "push.cfg"
    cfg.write_text("run.perturb_scale = 10.0\nrun.seed = 3\n")
    rc = main([
        "compare", "--config", str(cfg), "--models", "slip,vslip",
        "--steps", "8", "--out-dir", str(tmp_path),
        "--reference", str(ref_dir / "gait_reference.json"),
    ])
    assert rc == EXIT_GAIT_FAILURE
    table = (tmp_path / "comparison.csv").read_text().splitlines()
    rows = {r.split(",")[0]: r for r in table[1:]}
    assert rows["slip"].split(",")[1] != "completed"
    assert rows["vslip"].split(",")[1] == "completed"
    assert rows["vslip"].count(",") >= 5 and rows["vslip"].split(",")[2] != ""


def test_compare_table(ref_dir, tmp_path, capsys):
    rc = main([
        "compare", "--models", "slip,vslip", "--steps", "7",
        "--out-dir", str(tmp_path),
        "--reference", str(ref_dir / "gait_reference.json"),
    ])
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    assert "slip" in out and "vslip" in out
    table = (tmp_path / "comparison.csv").read_text().splitlines()
    assert table[0].startswith("model,outcome,mean_velocity")
    assert len(table) == 3


def test_walk_explicit_initial_state(ref_dir, tmp_path):
    # An explicit double-support start near the limit-cycle section walks
    # just like the from-limit-cycle default.
    cfg = tmp_path / "explicit.cfg"
    cfg.write_text(
        "run.initial = explicit\n"
        "initial.q1 = 0.0\n"
        "initial.q2 = 0.8870108331782217\n"
        "initial.qd1 = 1.262095621147907\n"
        "initial.qd2 = -0.5367651099154235\n"
        "initial.c1 = -0.22635114122369882\n"
        "initial.c2 = 0.4617486132350339\n"
    )
    rc = main([
        "walk", "--config", str(cfg), "--model", "vslip", "--steps", "5",
        "--out-dir", str(tmp_path),
        "--reference", str(ref_dir / "gait_reference.json"),
    ])
    assert rc == EXIT_OK


def test_explicit_initial_state_validated(tmp_path):
    cfg = tmp_path / "bad_initial.cfg"
    cfg.write_text("run.initial = explicit\ninitial.q2 = -1\n")
    assert main(["walk", "--config", str(cfg), "--out-dir", str(tmp_path)]) \
        == EXIT_CONFIG
