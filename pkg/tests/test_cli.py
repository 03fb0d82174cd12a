from __future__ import annotations

import json

import pytest

from conftest import corpus_app
from apex.cli import main, read_sequence
from apex.gui_model import export_model, parse_model
from apex.runtime import apply_sequence


@pytest.fixture(scope="module")
def fig1_out(tmp_path_factory):
    out = tmp_path_factory.mktemp("fig1")
    assert main(["explore", "fig1", "--out", str(out)]) == 0
    return out


def test_artifacts_exist_and_revalidate(fig1_out):
    names = {p.name for p in fig1_out.iterdir()}
    assert {"model.json", "model.dot", "report.json", "coverage.csv", "coverage.png", "sequences"} <= names
    text = (fig1_out / "model.json").read_text()
    model = parse_model(text)
    assert export_model(model) == text
    report = json.loads((fig1_out / "report.json").read_text())
    assert report["schema"] == "report.v1" and report["app"] == "fig1"
    assert report["states"] == len(model.states) and report["transitions"] == len(model.transitions)
    app = corpus_app("fig1")
    for seq in sorted((fig1_out / "sequences").iterdir()):
        header = seq.read_text().splitlines()[0]
        dst = header.rsplit("-> ", 1)[1]
        res = apply_sequence(app, read_sequence(seq.read_text()))
        assert res.layout.pairs() == model.states[dst].pairs


def test_replay_round_trip(fig1_out, capsys):
    seq = sorted((fig1_out / "sequences").iterdir())[-1]
    assert main(["replay", "fig1", str(seq)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("final layout ") and "coverage" in out


def test_replay_disabled_event_exits_one(tmp_path, capsys):
    p = tmp_path / "bad.txt"
    p.write_text("launch A1\ntap nowhere\ntap e1\n")
    assert main(["replay", "fig1", str(p)]) == 1
    assert "event 1" in capsys.readouterr().out


def test_bad_app_exits_two(tmp_path, capsys):
    p = tmp_path / "bad.mapp"
    p.write_text("APP x\nMANIFEST\nmain Missing\nEND\n")
    assert main(["explore", str(p)]) == 2
    assert "main activity" in capsys.readouterr().err
    assert main(["explore", str(tmp_path / "absent.mapp")]) == 2


def test_target_report_lists_each_target(tmp_path):
    assert main(["target", "dragon", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert len(report["targets"]) == 5 and all(t["hit"] for t in report["targets"])
    assert report["max_witness_length"] == 6
    for t in report["targets"]:
        sig, idx = t["target"].rsplit(":", 1)
        assert (tmp_path / "sequences" / f"target-{sig}-{idx}.txt").is_file()


def test_target_without_targets_exits_two(tmp_path):
    assert main(["target", "fig1", "--out", str(tmp_path)]) == 2


def test_explicit_targets_file(tmp_path):
    t = tmp_path / "t.targets"
    t.write_text("A1.onClick:8\n")
    assert main(["target", "fig1", "--targets", str(t), "--out", str(tmp_path / "o")]) == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["targets"][0]["target"] == "A1.onClick:8" and report["targets"][0]["hit"]
    t.write_text("A1.nothing:0\n")
    assert main(["target", "fig1", "--targets", str(t)]) == 2


def test_baseline_and_parse(tmp_path, capsys):
    assert main(["baseline", "login", "--max-events", "50", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["events_applied"] == 50
    assert (tmp_path / "coverage.png").is_file()
    capsys.readouterr()
    assert main(["parse", "fig1"]) == 0
    assert capsys.readouterr().out.startswith("APP fig1")


def test_list(capsys):
    assert main(["list"]) == 0
    assert capsys.readouterr().out.split() == ["dragon", "fig1", "login", "notes", "sensor"]
