"""Smoke tests for the python bindings: thin checks that the main operations
are reachable and agree with the documented file formats."""

import json
import os
import subprocess

import pytest

import lmforge


def test_flow_key_symmetry():
    conn = {
        "src_ip": "10.0.0.2",
        "src_port": 445,
        "dst_ip": "10.0.0.1",
        "dst_port": 50000,
        "proto": "tcp",
    }
    rev = {
        "src_ip": conn["dst_ip"],
        "src_port": conn["dst_port"],
        "dst_ip": conn["src_ip"],
        "dst_port": conn["src_port"],
        "proto": "tcp",
    }
    key = lmforge.canonicalize_flow_key(conn)
    assert key == lmforge.canonicalize_flow_key(rev)
    assert (key["ip_a"], key["port_a"]) <= (key["ip_b"], key["port_b"])


def test_validate_attack_input_reports_duplicates():
    step = {
        "pid": 100,
        "t_s": 10,
        "t_e": 20,
        "scenario": "s",
        "version": "v1",
        "trial": 1,
        "step": 1,
        "success": True,
        "ttps": [],
    }
    ok = lmforge.validate_attack_input([{"host": "h", "steps": [step]}])
    assert ok == []
    dup = lmforge.validate_attack_input([{"host": "h", "steps": [step, step]}])
    assert len(dup) == 1
    assert dup[0]["kind"] == "duplicate-step-identity"


def test_schedule_set_is_deterministic():
    cfg = lmforge.default_config()
    employees = cfg["employees"][:2]
    a = lmforge.build_schedule_set(cfg["scheduler"], employees, "2024-10-10", 3)
    b = lmforge.build_schedule_set(cfg["scheduler"], employees, "2024-10-10", 3)
    assert a == b
    assert len(a) == 2 * 3


def test_pipeline_forest_and_labels(tmp_path):
    cfg = lmforge.default_config()
    cfg["seed"] = 5
    cfg["num_days"] = 2
    cfg["employees"] = cfg["employees"][:3]
    cfg["attack_plan"] = [
        {"scenario": "Passing the Hash", "version": "v1", "trial": 1, "day_offset": 1, "time": "10:30"}
    ]
    out = tmp_path / "run"
    manifest = lmforge.run_pipeline(cfg, str(out))
    assert manifest["counts"]["events"] > 0
    assert manifest["counts"]["malicious_events"] > 0

    events = str(out / "events.jsonl")
    attack_input = json.loads((out / "attack_input.json").read_text())
    built = lmforge.build_forest(events, attack_input, 30000)
    assert len(built["forest"]) == len(
        [s for host in attack_input for s in host["steps"]]
    )
    labels = lmforge.label_system_logs(events, built["forest"])
    file_labels = [
        json.loads(line)
        for line in (out / "labels.jsonl").read_text().splitlines()
        if line
    ]
    assert labels == file_labels

    pcaps = sorted((out / "pcap").glob("*.pcap"))
    assert pcaps
    parsed = lmforge.parse_pcap(pcaps[0].read_bytes())
    assert parsed["link_type"] == 1
    assert parsed["packets"]
    assert any(p["five_tuple"] for p in parsed["packets"])


def _cli():
    cli = os.environ.get("LMFORGE_CLI")
    if not cli:
        pytest.skip("LMFORGE_CLI not set")
    return cli


SMALL_CONFIG = {
    "seed": 11,
    "num_days": 1,
    "attack_plan": [
        {"scenario": "Golden Ticket", "version": "v1", "trial": 1, "day_offset": 0, "time": "11:00"}
    ],
}


def test_cli_round_trip(tmp_path):
    cli = _cli()
    out = tmp_path / "cli_run"
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(SMALL_CONFIG))
    result = subprocess.run(
        [cli, "pipeline", "--config", str(cfg_path), "--out", str(out)],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0, result.stderr
    manifest = json.loads(result.stdout)
    assert manifest["seed"] == 11
    assert (out / "labels.jsonl").exists()


def test_cli_stages_match_pipeline(tmp_path):
    cli = _cli()
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(SMALL_CONFIG))

    staged = tmp_path / "staged"
    for sub in ["schedule", "emit", "merge", "forest", "label-sys", "label-net", "label-pcap", "report"]:
        result = subprocess.run(
            [cli, sub, "--config", str(cfg_path), "--out", str(staged)],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 0, f"{sub}: {result.stderr}"

    piped = tmp_path / "piped"
    subprocess.run(
        [cli, "pipeline", "--config", str(cfg_path), "--out", str(piped)],
        capture_output=True,
        check=True,
    )
    for artifact in [
        "schedules.json",
        "events.jsonl",
        "attack_input.json",
        "forest.json",
        "labels.jsonl",
        "labels_net.jsonl",
        "flows.json",
        "packet_labels.jsonl",
        "report/daily_steps.csv",
    ]:
        assert (staged / artifact).read_bytes() == (piped / artifact).read_bytes(), artifact


def test_cli_exit_codes(tmp_path):
    cli = _cli()
    # usage error
    usage = subprocess.run([cli, "definitely-not-a-subcommand"], capture_output=True)
    assert usage.returncode == 1
    assert subprocess.run([cli, "--help"], capture_output=True).returncode == 0
    # data error: label-sys without its inputs
    data = subprocess.run(
        [cli, "label-sys", "--out", str(tmp_path / "nothing_here")], capture_output=True
    )
    assert data.returncode == 2


def test_cli_seed_sources(tmp_path):
    cli = _cli()
    env = dict(os.environ, LMFORGE_SEED="31337")
    out = tmp_path / "env_seeded"
    result = subprocess.run(
        [cli, "schedule", "--out", str(out)], capture_output=True, env=env, text=True
    )
    assert result.returncode == 0, result.stderr
    out2 = tmp_path / "flag_seeded"
    subprocess.run(
        [cli, "schedule", "--out", str(out2), "--seed", "31337"], capture_output=True, env=env, check=True
    )
    assert (out / "schedules.json").read_bytes() == (out2 / "schedules.json").read_bytes()
