import gzip
import json
import subprocess
import sys

import pytest

from rovmeasure import datasets
from rovmeasure.cli import dispatch


def write_snapshot(path, snap):
    path.write_text("".join(e.to_json() + "\n" for e in snap))


def write_roas(path, roas):
    with open(path, "w", newline="") as fh:
        roas.to_csv(fh)


@pytest.fixture
def sixty_files(tmp_path):
    snap, roas, _ = datasets.sixty_vp()
    rib, vrps = tmp_path / "sixty.jsonl", tmp_path / "sixty.csv"
    write_snapshot(rib, snap)
    write_roas(vrps, roas)
    return rib, vrps


def test_no_arguments_is_usage_error(capsys):
    assert dispatch([]) == 1


def test_unknown_flag_is_usage_error(worked_files, tmp_path):
    rib, vrps = worked_files
    assert dispatch(["infer", "--rib", str(rib), "--vrps", str(vrps), "--out", str(tmp_path / "o"),
                     "--bogus"]) == 1


def test_missing_input_is_data_error(tmp_path):
    assert dispatch(["infer", "--rib", str(tmp_path / "nope.jsonl"), "--vrps", str(tmp_path / "x"),
                     "--out", str(tmp_path / "o.json")]) == 2


def test_malformed_rib_is_data_error(tmp_path, worked_files):
    _, vrps = worked_files
    rib = tmp_path / "bad.jsonl"
    rib.write_text("not json\n" * 5)
    assert dispatch(["infer", "--rib", str(rib), "--vrps", str(vrps), "--out", str(tmp_path / "o")]) == 2
    assert not (tmp_path / "o").exists()


def test_validate_single_route(worked_files, capsys):
    _, vrps = worked_files
    assert dispatch(["validate", "--vrps", str(vrps), "--prefix", "10.1.1.0/24", "--origin", "65001"]) == 0
    out = json.loads(capsys.readouterr().out)
    (row,) = out["results"]
    assert row["state"] == "invalid" and row["witness"] is None
    assert dispatch(["validate", "--vrps", str(vrps), "--prefix", "10.1.0.0/16", "--origin", "AS65001"]) == 0
    (row,) = json.loads(capsys.readouterr().out)["results"]
    assert row["state"] == "valid" and "65001" in row["witness"]
    assert dispatch(["validate", "--vrps", str(vrps), "--prefix", "10.1.1.0/24"]) == 1


def test_infer_worked_example(worked_files, tmp_path):
    rib, vrps = worked_files
    out = tmp_path / "infer.json"
    assert dispatch(["infer", "--rib", str(rib), "--vrps", str(vrps), "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["candidates"] == {"65003": [65001], "65005": [65001]}
    assert rep["non_enforcing"] == [65002, 65004]
    assert rep["schema_version"] == 1
    man = json.loads((tmp_path / "infer.json.manifest.json").read_text())
    assert man["manifest_id"] == rep["manifest_id"]
    assert set(man["input_digests"]) == {"rib", "vrps"}


def test_infer_vp_subset_and_gzip(tmp_path, sixty_files):
    rib, vrps = sixty_files
    gz = tmp_path / "sixty.jsonl.gz"
    with gzip.open(gz, "wb") as fh:
        fh.write(rib.read_bytes())
    full, sub = tmp_path / "full.json", tmp_path / "sub.json"
    assert dispatch(["infer", "--rib", str(gz), "--vrps", str(vrps), "--out", str(full)]) == 0
    assert json.loads(full.read_text())["enforcing"] == [datasets.SIXTY_Z]
    assert dispatch(["infer", "--rib", str(gz), "--vrps", str(vrps), "--out", str(sub),
                     "--vps", "64600,64601,64602"]) == 0
    assert json.loads(sub.read_text())["enforcing"] == [datasets.SIXTY_X, datasets.SIXTY_Z]


def test_unknown_vp_is_data_error(worked_files, tmp_path):
    rib, vrps = worked_files
    assert dispatch(["infer", "--rib", str(rib), "--vrps", str(vrps), "--vps", "12345",
                     "--out", str(tmp_path / "o")]) == 2


def test_data_dir_env(worked_files, tmp_path, monkeypatch):
    rib, vrps = worked_files
    monkeypatch.setenv("ROVMEASURE_DATA_DIR", str(tmp_path))
    monkeypatch.chdir(tmp_path.parent)
    out = tmp_path / "o.json"
    assert dispatch(["infer", "--rib", rib.name, "--vrps", vrps.name, "--out", str(out)]) == 0


def test_sample_csv(sixty_files, tmp_path):
    rib, vrps = sixty_files
    out = tmp_path / "s.csv"
    assert dispatch(["sample", "--rib", str(rib), "--vrps", str(vrps), "--n", "10", "--k", "20",
                     "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("schema_version,sample,seed") and lines[0].endswith(",manifest_id")
    assert len(lines) == 21
    assert dispatch(["sample", "--rib", str(rib), "--vrps", str(vrps), "--n", "61",
                     "--out", str(out)]) == 2


def test_visibility_coverage_divergence(tmp_path):
    sc_dir = tmp_path / "snaps"
    assert dispatch(["simulate", "--scenario", "d", "--out-snapshots", str(sc_dir)]) == 0
    rib, vrps = sc_dir / "snapshot_t1.jsonl", sc_dir / "vrps.csv"
    for cmd in ("visibility", "coverage", "divergence"):
        out = tmp_path / f"{cmd}.csv"
        assert dispatch([cmd, "--rib", str(rib), "--vrps", str(vrps), "--out", str(out)]) == 0
    rows = (tmp_path / "divergence.csv").read_text().splitlines()
    assert rows[1].split(",")[:3] == ["1", "1", "9"]


def test_simulate_then_infer(tmp_path):
    d = tmp_path / "sim"
    assert dispatch(["simulate", "--scenario", "traffic_engineering", "--at", "0", "--at", "1",
                     "--out-snapshots", str(d)]) == 0
    assert {p.name for p in d.iterdir()} >= {"snapshot_t0.jsonl", "snapshot_t1.jsonl", "vrps.csv",
                                             "scenario.json", "manifest.json"}
    out = tmp_path / "inf.json"
    assert dispatch(["infer", "--rib", str(d / "snapshot_t1.jsonl"), "--vrps", str(d / "vrps.csv"),
                     "--out", str(out)]) == 0
    assert json.loads(out.read_text())["enforcing"] == [64901]


def test_unknown_scenario_is_data_error(tmp_path):
    assert dispatch(["simulate", "--scenario", "nope", "--out-snapshots", str(tmp_path)]) == 2


def test_experiment_names_planted_filterer(tmp_path):
    out = tmp_path / "exp.json"
    assert dispatch(["experiment", "--scenario", "a", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert [v["asn"] for v in rep["inference"]["verdicts"]] == [8283]
    assert rep["truth"] == {"8283": "filter_invalid"}


def test_experiment_prefer_valid_default_variant(tmp_path):
    out = tmp_path / "exp.json"
    assert dispatch(["experiment", "--scenario", "e", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["variant"] == "prefer_valid"
    assert [(v["asn"], v["policy"]) for v in rep["inference"]["verdicts"]] == [(64950, "prefer_valid")]


def test_experiment_with_plan_file(tmp_path):
    from rovmeasure.sim import plant_scenario

    plan = plant_scenario("f").plan.to_json()
    p = tmp_path / "plan.json"
    p.write_text(json.dumps(plan))
    out = tmp_path / "exp.json"
    assert dispatch(["experiment", "--scenario", "f", "--plan", str(p), "--variant",
                     "withdraw_reannounce", "--out", str(out)]) == 0
    assert [v["asn"] for v in json.loads(out.read_text())["inference"]["verdicts"]] == [64960]
    plan["extra"] = 1
    p.write_text(json.dumps(plan))
    assert dispatch(["experiment", "--scenario", "f", "--plan", str(p), "--out", str(out)]) == 2


def _run_all(base, rib, vrps, threads):
    base.mkdir()
    common = ["--threads", str(threads)]
    dispatch(["infer", "--rib", rib, "--vrps", vrps, "--out", str(base / "infer.json")] + common)
    dispatch(["sample", "--rib", rib, "--vrps", vrps, "--n", "20", "--k", "50", "--seed", "3",
              "--out", str(base / "sample.csv")] + common)
    dispatch(["experiment", "--scenario", "b", "--out", str(base / "exp.json")] + common)
    dispatch(["simulate", "--scenario", "d", "--seed", "9", "--out-snapshots", str(base / "sim")] + common)
    return {p.relative_to(base): p.read_bytes() for p in sorted(base.rglob("*"))
            if p.is_file() and "manifest" not in p.name}


def test_outputs_are_byte_identical_across_runs_and_threads(tmp_path, sixty_files):
    rib, vrps = map(str, sixty_files)
    a = _run_all(tmp_path / "a", rib, vrps, 1)
    b = _run_all(tmp_path / "b", rib, vrps, 8)
    assert len(a) == 6
    assert a == b


def test_seed_changes_sample_output(tmp_path, sixty_files):
    rib, vrps = map(str, sixty_files)
    outs = []
    for seed in ("1", "2"):
        out = tmp_path / f"s{seed}.csv"
        dispatch(["sample", "--rib", rib, "--vrps", vrps, "--n", "20", "--k", "30", "--seed", seed,
                  "--out", str(out)])
        outs.append(out.read_text())
    assert outs[0] != outs[1]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "rovmeasure", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip().endswith("0.1.0")
    proc = subprocess.run([sys.executable, "-m", "rovmeasure"], capture_output=True, text=True)
    assert proc.returncode == 1
