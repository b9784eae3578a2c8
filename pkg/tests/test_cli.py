import csv
import json
import subprocess
import sys

import pytest

from stressfreq.cli import run
from stressfreq.events import emit
from stressfreq.synth import SynthSpec, generate

FAST = ["--days", "40"]


def last_json(text):
    return json.loads(text.strip().splitlines()[-1])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_budget_boundary(capsys):
    assert run(["budget", "--eta", "2.5", "--omega", "12", "--alpha", "1", "--k", "30"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "rho = 1.0"
    doc = last_json(out)
    assert doc["solved"] == "rho" and doc["budget"]["rho"] == 1.0 and doc["violations"] == []


def test_budget_manifest(tmp_path, capsys):
    m = tmp_path / "m.json"
    assert run(["budget", "--rho", "0.2", "--eta", "2.5", "--omega", "12", "--alpha", "1", "--manifest", str(m)]) == 0
    assert json.loads(m.read_text())["config"]["k"] == pytest.approx(6.0)


def test_budget_infeasible(capsys):
    assert run(["budget", "--eta", "2.5", "--omega", "12", "--alpha", "1", "--k", "31"]) == 5
    err = capsys.readouterr().err.strip()
    assert len(err.splitlines()) == 1
    assert json.loads(err)["error"] == "infeasible_budget"


def test_budget_wrong_number_of_flags(capsys):
    assert run(["budget", "--eta", "2.5", "--omega", "12"]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "usage"


def test_unknown_flag_and_subcommand(capsys):
    assert run(["budget", "--bogus", "1"]) == 2
    assert run(["frobnicate"]) == 2
    lines = capsys.readouterr().err.strip().splitlines()
    assert all(json.loads(line)["exit"] == 2 for line in lines)


def test_missing_file(tmp_path, capsys):
    assert run(["simulate", "--input", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "p.csv")]) == 3
    assert json.loads(capsys.readouterr().err)["error"] == "missing_file"


def test_schema_violation(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("participant_id,time_of_day_min,likelihood,responded,category\np,500,1,true,Commute\n")
    assert run(["simulate", "--input", str(bad), "--out", str(tmp_path / "p.csv")]) == 4
    msg = json.loads(capsys.readouterr().err)
    assert msg["error"] == "schema" and "line 2" in msg["message"]


def test_fit_halving_dataset(tmp_path, capsys):
    pts = tmp_path / "points.csv"
    rows = ["k,category,base_efficiency,fatigue_scale,stressors_per_day,n_prompts,n_responses"]
    rows += [f"{k},ALL,,,{y},," for k, y in [(1, 2), (2, 3), (3, 3.5), (4, 3.75)]]
    pts.write_text("\n".join(rows) + "\n")
    out = tmp_path / "report.csv"
    assert run(["fit", "--input", str(pts), "--out", str(out), "--plot-data", str(tmp_path / "plot.csv")]) == 0
    row = read_csv(out)[0]
    assert row["category"] == "All Stressors"
    assert float(row["S"]) == pytest.approx(4.0, rel=1e-9)
    assert float(row["a"]) == pytest.approx(0.6931, abs=1e-4)
    structured = json.loads(out.with_suffix(".json").read_text())
    assert structured["rows"][0]["converged"] is True
    plot = read_csv(tmp_path / "plot.csv")
    assert float(plot[0]["y_model"]) == pytest.approx(2.0, rel=1e-9)
    assert (tmp_path / "report.csv.manifest.json").exists()


def test_synth_simulate_fit_report_chain(tmp_path, capsys):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"n_participants": 5, "events_per_participant": 100}))
    events = tmp_path / "events.csv"
    points = tmp_path / "points.json"
    report = tmp_path / "report.csv"
    merged = tmp_path / "merged.json"
    observed = tmp_path / "observed.csv"
    observed.write_text('category,observed_per_day\nALL,1.62\n"Health, Fatigue, or Pain",0.1\n')
    assert run(["synth", "--spec", str(spec), "--seed", "3", "--out", str(events)]) == 0
    assert run(["simulate", "--input", str(events), "--out", str(points), "--format", "json", *FAST, "--k-values", "1,2,3,5,8,12"]) == 0
    doc = json.loads(points.read_text())
    assert {r["category"] for r in doc["points"]} >= {"ALL", "Work"}
    assert run(["fit", "--input", str(points), "--out", str(report)]) == 0
    assert run(["report", "--fit", str(report), "--observed", str(observed), "--out", str(merged), "--format", "json"]) == 0
    rows = {r["category"]: r for r in json.loads(merged.read_text())["rows"]}
    assert rows["All Stressors"]["weekly_observed"] == pytest.approx(18.9)
    assert rows["Health, Fatigue, or Pain"]["weekly_observed"] == pytest.approx(0.1 * 12 / 7.2 * 7)
    assert rows["Work"]["weekly_observed"] is None
    assert rows["Work"]["weekly_model"] == pytest.approx(7 * rows["Work"]["S"])
    for path in (events, points, report, merged):
        assert path.with_name(path.name + ".manifest.json").exists()


def test_simulate_infeasible_k(tmp_path, capsys):
    events = tmp_path / "events.csv"
    emit(generate(SynthSpec(n_participants=2, events_per_participant=40)), events)
    assert run(["simulate", "--input", str(events), "--out", str(tmp_path / "p.csv"), "--k-values", "31"]) == 5
    assert json.loads(capsys.readouterr().err)["error"] == "infeasible_k"


def test_baseline_policy(tmp_path, capsys):
    events = tmp_path / "events.csv"
    emit(generate(SynthSpec(n_participants=2, events_per_participant=40)), events)
    out = tmp_path / "p.csv"
    assert run(["simulate", "--input", str(events), "--out", str(out), "--policy", "moods-baseline", *FAST]) == 0
    rows = read_csv(out)
    assert len(rows) == 13 and float(rows[0]["k"]) > 6


def _pipeline(tmp_path, name, *extra):
    out = tmp_path / name
    assert run(["pipeline", "--synth-default", "--seed", "42", "--out-dir", str(out), *FAST, *extra]) == 0
    return out


def test_pipeline_deterministic(tmp_path, capsys):
    a = _pipeline(tmp_path, "a")
    b = _pipeline(tmp_path, "b")
    for name in ("events.csv", "points.csv", "report.csv", "report.json", "plot_data.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    rows = read_csv(a / "report.csv")
    assert len(rows) == 13
    assert rows[-1]["category"] == "All Stressors" and rows[-2]["category"] == "Other"
    manifest = json.loads((a / "manifest.json").read_text())
    assert manifest["subcommand"] == "pipeline" and manifest["seed"] == 42
    assert manifest["config"]["k_values"] == list(range(1, 31))
    assert manifest["version"] and "duration_s" in manifest


def test_manifest_replay(tmp_path, capsys, monkeypatch):
    a = _pipeline(tmp_path, "a", "--format", "json")
    argv = json.loads((a / "manifest.json").read_text())["argv"]
    before = {p.name: p.read_bytes() for p in a.iterdir() if p.name != "manifest.json"}
    monkeypatch.chdir(tmp_path)
    assert run(argv) == 0
    after = {p.name: p.read_bytes() for p in a.iterdir() if p.name != "manifest.json"}
    assert before == after
    assert set(before) == {"events.json", "points.json", "report.json", "plot_data.json"}


def test_pipeline_on_supplied_event_table(tmp_path, capsys):
    events = tmp_path / "moods.csv"
    emit(generate(SynthSpec(seed=8)), events)
    out = tmp_path / "run"
    assert run(["pipeline", "--input", str(events), "--out-dir", str(out), "--days", "200"]) == 0
    rows = read_csv(out / "report.csv")
    assert len(rows) == 13
    assert all(r["note"] == "" and r["converged"] == "true" for r in rows)


def test_sparse_category_is_annotated_not_fatal(tmp_path, capsys):
    events = tmp_path / "sparse.csv"
    emit(generate(SynthSpec(n_participants=6, seed=8)), events)
    out = tmp_path / "run"
    assert run(["pipeline", "--input", str(events), "--out-dir", str(out), *FAST]) == 0
    rows = read_csv(out / "report.csv")
    assert len(rows) == 13 and all(r["S"] != "" for r in rows)
    flagged = [r for r in rows if r["converged"] == "false"]
    assert all(r["note"] and r["weekly_model"] == "" for r in flagged)
    assert rows[-1]["category"] == "All Stressors" and rows[-1]["converged"] == "true"


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "stressfreq", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "pipeline" in proc.stdout and "Exit codes" in proc.stdout
