import json
import subprocess
import sys

import pytest

from oracles import brute_force_stable
from rematch.cli import main, run_seeds
from rematch.scenario import BUILTIN_NAMES, builtin


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv, "--format", "json")
    return code, json.loads(out)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_validate_builtins(capsys, name):
    code, out, _ = run(capsys, "validate", name)
    assert code == 0 and "valid" in out


def test_validate_monotone_violation_exits_one(capsys, tmp_path):
    data = {
        "schema_version": "1", "name": "broken",
        "players": {"men": ["m1"], "women": ["w1", "w2"]},
        "characteristics": ["a", "b"],
        "preferences": {
            "m1": {"base": ["w1", "w2"], "a": ["w1", "w2"], "b": ["w1", "w2"], "a+b": ["w2", "w1"]},
            "w1": ["m1"], "w2": ["m1"],
        },
        "initial": {"matching": "-"},
    }
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(data))
    code, out, err = run(capsys, "validate", str(path))
    assert code == 1
    assert "m1" in out + err


def test_missing_file_exits_two(capsys, tmp_path):
    code, _, err = run(capsys, "validate", str(tmp_path / "nope.json"))
    assert code == 2 and "nope.json" in err


def test_usage_error_exits_two(capsys):
    code, _, _ = run(capsys, "simulate", "example4", "--epsilon", "1.5")
    assert code == 2


def test_check_example3_names_missing_common_belief(capsys):
    code, out, _ = run(capsys, "check", "example3")
    assert code == 0
    assert "stable=true" in out and "self-confirming=true" in out
    assert "lacks pairwise common belief" in out


def test_check_example6_flirt_witness(capsys):
    code, data = run_json(capsys, "check", "example6")
    assert code == 0
    assert data["stable"] and data["self_confirming"] and not data["flirt_proof"]
    _, out, _ = run(capsys, "check", "example6")
    assert "w2->m1 raises c" in out


def test_check_explicit_outcome(capsys):
    code, out, _ = run(capsys, "check", "example4", "--matching", "m1:w2,m2:w1", "--awareness", "m1:c|m2:c|w1:c|w2:c")
    assert code == 0
    for flag in ("stable", "absorbing", "self-confirming", "flirt-proof"):
        assert f"{flag}=true" in out


def test_check_bad_matching_exits_two(capsys):
    code, _, _ = run(capsys, "check", "example4", "--matching", "m1:m2")
    assert code == 2


def test_simulate_example4_p(capsys):
    code, out, _ = run(capsys, "simulate", "example4", "--process", "p", "--seed", "1")
    assert code == 0 and "(mu2, omega2)" in out


def test_simulate_example6_q(capsys):
    code, data = run_json(capsys, "simulate", "example6", "--process", "q", "--seed", "1")
    assert code == 0 and data["converged"]
    e6 = builtin("example6")
    assert data["terminal"]["matching"] == e6.matchings["mu2"].label(e6.men)


def test_simulate_example2_cycle_exits_one(capsys):
    code, out, _ = run(capsys, "simulate", "example2", "--process", "classic", "--policy", "mutual-optimal")
    assert code == 1
    assert "period 8" in out


def test_simulate_writes_trace(capsys, tmp_path):
    path = tmp_path / "t.jsonl"
    code, _, _ = run(capsys, "simulate", "example4", "--seed", "7", "--trace", str(path))
    assert code == 0
    lines = [json.loads(line) for line in path.read_text().splitlines()]
    assert lines[0]["kind"] == "header" and lines[0]["seed"] == 7
    assert lines[-1]["kind"] == "terminal"


def test_enumerate_example5(capsys):
    code, data = run_json(capsys, "enumerate", "example5")
    assert code == 0
    assert data["count"] == 2
    assert sorted(o["name"] for o in data["outcomes"]) == ["(mu0, omega1)", "(mu2, omega2)"]


def test_enumerate_no_rules_full_awareness_gives_classic_stable(capsys, tmp_path):
    e = builtin("example1").to_dict()
    e["name"] = "knuth_aware"
    path = tmp_path / "k.json"
    path.write_text(json.dumps(e))
    code, data = run_json(capsys, "enumerate", str(path))
    assert code == 0
    k = builtin("example1")
    market = k.market()
    expected = brute_force_stable(k.men, k.women, {i: market.prefs[i] for i in k.players})
    assert {o["matching"] for o in data["outcomes"]} == {mu.label(k.men) for mu in expected}


def test_enumerate_bound_exceeded_exits_one(capsys):
    code, _, err = run(capsys, "enumerate", "example8", "--states", "full", "--bound", "1000")
    assert code == 1 and "bound" in err


def test_montecarlo_example2_always_stable(capsys):
    code, data = run_json(capsys, "montecarlo", "example2", "--runs", "100")
    assert code == 0
    assert data["converged"] == 100


def test_montecarlo_high_epsilon(capsys):
    code, data = run_json(capsys, "montecarlo", "example2", "--runs", "50", "--epsilon", "0.99")
    assert code == 0 and data["converged"] == 50


def test_welfare_example8_all_categories(capsys):
    code, data = run_json(capsys, "welfare", "example8", "--player", "m1", "--player", "w1", "--runs", "300")
    assert code == 0
    for player in ("m1", "w1"):
        assert all(v > 0 for v in data["players"][player]["welfare"].values()), player


def test_welfare_stable_start_is_all_same(capsys, tmp_path):
    data = {
        "schema_version": "1", "name": "settled",
        "players": {"men": ["m1", "m2"], "women": ["w1", "w2"]}, "characteristics": [],
        "preferences": {"m1": ["w1", "w2"], "m2": ["w2", "w1"], "w1": ["m1", "m2"], "w2": ["m2", "m1"]},
        "initial": {"matching": "m1:w1,m2:w2"},
    }
    path = tmp_path / "settled.json"
    path.write_text(json.dumps(data))
    code, out = run_json(capsys, "welfare", str(path), "--player", "m1", "--runs", "20")
    assert code == 0
    assert out["players"]["m1"]["welfare"] == {"better": 0, "same": 20, "worse": 0}


def test_export_writes_dot(capsys, tmp_path):
    path = tmp_path / "k.dot"
    code, out, _ = run(capsys, "export", "example1", "--process", "classic", "-o", str(path))
    assert code == 0 and "edges" in out
    assert path.read_text().startswith("digraph")


def test_run_seeds_are_reproducible():
    assert run_seeds(3, 5) == run_seeds(3, 5)
    assert run_seeds(3, 4) == [3, 4, 5, 6]


def test_help_lists_flags():
    out = subprocess.run([sys.executable, "-m", "rematch", "simulate", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for flag in ("--process", "--policy", "--epsilon", "--seed", "--max-steps", "--trace", "--format"):
        assert flag in out.stdout


@pytest.mark.parametrize("argv", [
    ("example4", "--seed", "7"),
    ("example6", "--process", "q", "--seed", "3"),
    ("example2", "--process", "classic", "--seed", "2"),
    ("example2", "--process", "classic", "--policy", "mutual-optimal"),
    ("example2", "--max-steps", "3"),
])
def test_reproduce_matches_recorded_trace(capsys, tmp_path, argv):
    path = tmp_path / "t.jsonl"
    run(capsys, "simulate", *argv, "--trace", str(path))
    code, out, _ = run(capsys, "reproduce", argv[0], str(path))
    assert code == 0 and "exactly" in out


def test_reproduce_detects_tampering(capsys, tmp_path):
    path = tmp_path / "t.jsonl"
    run(capsys, "simulate", "example4", "--seed", "7", "--trace", str(path))
    lines = path.read_text().splitlines()
    record = json.loads(lines[2])
    record["rng_draw"] = 0.5
    lines[2] = json.dumps(record)
    path.write_text("\n".join(lines) + "\n")
    code, data = run_json(capsys, "reproduce", "example4", str(path))
    assert code == 1 and data["first_difference"] == 2


def test_reproduce_rejects_other_scenario(capsys, tmp_path):
    path = tmp_path / "t.jsonl"
    run(capsys, "simulate", "example4", "--trace", str(path))
    code, _, err = run(capsys, "reproduce", "example3", str(path))
    assert code == 2 and "different scenario" in err
