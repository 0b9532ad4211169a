"""Tests for keyleak.cli"""
import json

import pytest

import keyleak.bounds
from keyleak.cli import EXIT_INPUT_ERROR, EXIT_OK, EXIT_VIOLATION, main
from keyleak.models import BoundResult


def test_construct_then_analyze(tmp_path, capsys):
    path = str(tmp_path / "kpa.json")
    assert main(["construct", "kpa", "--n", "6", "--m", "3", "--out", path]) == EXIT_OK
    assert main(["analyze", path]) == EXIT_OK
    dossier = json.loads(capsys.readouterr().out)
    assert dossier["n"] == 6
    assert dossier["p1"] == 0.125
    assert dossier["mixture_feasible_at_delta"] is False


def test_construct_markdown(capsys):
    assert main(["construct", "spiked", "--n", "4", "--l", "2", "--markdown"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("# spiked distribution")


def test_bound_command(capsys):
    assert main(["bound", "individual_guarantee", "epsilon=1e-44"]) == EXIT_OK
    result = json.loads(capsys.readouterr().out)
    assert result["value"] == pytest.approx(2e-22)


def test_bound_with_list_and_fraction(capsys):
    assert main(["bound", "multi_segment_bound", "segment_lens=3,5", "delta=1/100"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["value"] == pytest.approx(2.0 ** -8 + 0.01)


def test_bound_input_errors():
    assert main(["bound", "fano_ber_bound", "n=1", "epsilon=0.5"]) == EXIT_INPUT_ERROR
    assert main(["bound", "markov_tail", "mean=1"]) == EXIT_INPUT_ERROR
    assert main(["bound", "markov_tail", "mean"]) == EXIT_INPUT_ERROR


def test_verify_passes(capsys):
    argv = ["verify", "--sweep", "triangle", "--sweep", "per_bit_fallacy", "--instances", "10", "--bits", "4"]
    assert main(argv) == EXIT_OK
    reports = json.loads(capsys.readouterr().out)
    assert [r["bound_name"] for r in reports] == ["triangle", "per_bit_fallacy"]
    assert reports[1]["violation_count"] > 0


def test_verify_is_deterministic(capsys):
    argv = ["verify", "--sweep", "pinsker", "--instances", "8", "--bits", "4", "--seed", "3"]
    main(argv)
    first = capsys.readouterr().out
    main(argv)
    assert capsys.readouterr().out == first


def test_verify_reports_violation(monkeypatch, capsys):
    monkeypatch.setattr(
        keyleak.bounds, "subset_leak_bound", lambda subset_len, delta: BoundResult(formula="subset_leak", value=0.0)
    )
    assert main(["verify", "--sweep", "subset_leak", "--instances", "3", "--bits", "3"]) == EXIT_VIOLATION


def test_simulate_otp(capsys):
    assert main(["simulate", "otp", "--message", "1010", "--key", "0110"]) == EXIT_OK
    outputs = json.loads(capsys.readouterr().out)["outputs"]
    assert outputs == {"ciphertext": "1100", "decrypted": "1010"}


def test_simulate_lfsr(capsys):
    assert main(["simulate", "lfsr", "--seed-bits", "4", "--length", "8"]) == EXIT_OK
    outputs = json.loads(capsys.readouterr().out)["outputs"]
    assert outputs["period"] == 15
    assert outputs["keystream"].startswith("1000")


def test_simulate_mac_with_spiked_key(capsys):
    assert main(["simulate", "mac", "--block-bits", "3", "--blocks", "1", "--spike", "2"]) == EXIT_OK
    outputs = json.loads(capsys.readouterr().out)["outputs"]
    assert outputs["epsilon"] == pytest.approx(1 / 8)
    assert outputs["average_success"] <= outputs["average_cap"] + 1e-9


def test_simulate_otp_needs_key():
    assert main(["simulate", "otp", "--message", "1010"]) == EXIT_INPUT_ERROR


def test_report_table_csv(capsys):
    assert main(["report", "--format", "csv"]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 1 + 12


def test_report_required_d(capsys):
    argv = ["report", "--mode", "required-d", "--target", "1e-15", "--blocks", "1e7"]
    assert main(argv) == EXIT_OK
    results = json.loads(capsys.readouterr().out)
    assert results[0]["d"] == pytest.approx(2.5e-45)


def test_report_uses_config_params_sets(tmp_path, capsys):
    path = tmp_path / "params.env"
    path.write_text("lab.d_level=1e-10\nlab.key_rate=1e6\n", encoding="utf-8")
    assert main(["report", "--mode", "projection", "--config", str(path)]) == EXIT_OK
    projections = json.loads(capsys.readouterr().out)
    assert [p["params_name"] for p in projections] == ["lab"]


def test_bad_config_file_is_input_error(tmp_path):
    path = tmp_path / "bad.env"
    path.write_text("colour=blue\n", encoding="utf-8")
    assert main(["report", "--config", str(path)]) == EXIT_INPUT_ERROR


def test_malformed_distribution_file(write_json):
    path = write_json("broken.json", '{"n": 2,\n "atoms": [')
    assert main(["analyze", path]) == EXIT_INPUT_ERROR


def test_missing_distribution_file(tmp_path):
    assert main(["analyze", str(tmp_path / "nope.json")]) == EXIT_INPUT_ERROR


def test_no_command_prints_help(capsys):
    assert main([]) == EXIT_INPUT_ERROR


@pytest.mark.parametrize("command,expected", [
    ("construct", ["kpa", "saturating", "ber-search"]),
    ("bound", ["subset_leak_bound", "* guessing_success", "per_bit_fallacy"]),
    ("verify", ["soundness sweeps:", "refutation sweeps:", "lhl", "mixture_reading"]),
    ("simulate", ["otp", "toeplitz", "lfsr", "mac"]),
    ("report", ["table", "statement-f", "required-d"]),
    ("analyze", ["dossier"]),
])
def test_every_command_documents_what_it_covers(command, expected, capsys):
    with pytest.raises(SystemExit) as info:
        main([command, "--help"])
    assert info.value.code == 0
    text = capsys.readouterr().out
    for item in expected:
        assert item in text


def test_bound_reads_distribution_file(tmp_path, capsys):
    path = str(tmp_path / "uniform.json")
    assert main(["construct", "uniform", "--n", "3", "--out", path]) == EXIT_OK
    assert main(["bound", "guessing_success", "trials=2", "--distribution", path]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["value"] == pytest.approx(0.25)


def test_bound_without_distribution_parameter_rejects_file(tmp_path):
    path = str(tmp_path / "uniform.json")
    assert main(["construct", "uniform", "--n", "3", "--out", path]) == EXIT_OK
    assert main(["bound", "subset_leak_bound", "subset_len=1", "delta=0", "--distribution", path]) == EXIT_INPUT_ERROR


def test_config_subset_budget_reaches_sweeps(tmp_path, capsys):
    path = tmp_path / "budget.env"
    path.write_text("subset_budget=3\n", encoding="utf-8")
    argv = ["verify", "--sweep", "subset_leak", "--instances", "3", "--bits", "3", "--config", str(path)]
    assert main(argv) == EXIT_OK
    report = json.loads(capsys.readouterr().out)[0]
    assert report["complete"] is False
    assert report["instances_checked"] == 9


def test_bad_log_level_is_input_error():
    assert main(["report", "--log-level", "chatty"]) == EXIT_INPUT_ERROR
