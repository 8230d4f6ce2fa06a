from __future__ import annotations

import json
import subprocess
import sys

import numpy as np
import pytest

from dvcurate import cli, dvalgebra, genkit, metadata, taskspec

from conftest import DATA_DIR, demo_row, write_jsonl

BIN_CARROT = str(DATA_DIR / "specs" / "valid" / "bin-carrot.mlspec")
WRAPPED_HUE = str(DATA_DIR / "specs" / "valid" / "wrapped-hue.mlspec")
MALFORMED = str(DATA_DIR / "specs" / "malformed" / "m01-unbalanced.mlspec")


def run_cli(capsys, *argv):
    code = cli.run(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def corpus(tmp_path):
    rows = [
        demo_row(rid="d0", lab="lab1", instructions=("pick up the mug",),
                 obj_pos=(0.2, 0.0, 0.02)),
        demo_row(rid="d1", lab="lab1", instructions=("put the pen in the cup",),
                 obj_pos=(0.1, 0.1, 0.02), place_pos=(-0.2, 0.3, 0.05)),
        demo_row(rid="d2", lab="lab2", instructions=("push the plate left",),
                 obj_pos=(-0.1, 0.2, 0.02)),
    ]
    return write_jsonl(tmp_path / "corpus.jsonl", rows)


# ---------------------------------------------------------------------------
# exit codes

def test_usage_errors_exit_2(capsys):
    assert run_cli(capsys)[0] == 2
    assert run_cli(capsys, "no-such-command")[0] == 2
    assert run_cli(capsys, "retrieve", "--corpus", "x.jsonl")[0] == 2
    assert run_cli(capsys, "sample-batches", "--target", "t", "--cotrain", "c")[0] == 2


def test_missing_file_exits_1_with_report(capsys, tmp_path):
    code, _, err = run_cli(capsys, "ingest", str(tmp_path / "nope.jsonl"))
    assert code == 1
    report = json.loads(err)
    assert report["error"] == "FileNotFound"


def test_domain_error_exits_1_with_positions(capsys):
    code, _, err = run_cli(capsys, "spec", "validate", MALFORMED)
    assert code == 1
    report = json.loads(err)
    assert report["error"] == "SpecSyntaxError"
    assert report["line"] >= 1 and report["col"] >= 1


# ---------------------------------------------------------------------------
# spec commands

def test_spec_validate_ok(capsys):
    code, out, _ = run_cli(capsys, "spec", "validate", BIN_CARROT, WRAPPED_HUE)
    assert code == 0
    assert out.splitlines() == [f"ok {BIN_CARROT}", f"ok {WRAPPED_HUE}"]


def test_spec_sample_deterministic_and_in_spec(capsys):
    code, out, _ = run_cli(capsys, "spec", "sample", BIN_CARROT, "--seed", "5", "--count", "3")
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 3
    spec = taskspec.parse_file(BIN_CARROT)
    for line in lines:
        row = json.loads(line)
        assert row["spec_name"] == "bin-carrot"
        assert -0.30 <= row["object_pose"][0] <= -0.10
    code2, out2, _ = run_cli(capsys, "spec", "sample", BIN_CARROT, "--seed", "5", "--count", "3")
    assert out2 == out
    code3, out3, _ = run_cli(capsys, "spec", "sample", BIN_CARROT, "--seed", "6", "--count", "3")
    assert out3 != out


def test_spec_sample_to_file(capsys, tmp_path):
    dest = tmp_path / "instances.jsonl"
    code, out, _ = run_cli(capsys, "spec", "sample", BIN_CARROT,
                           "--seed", "1", "--count", "2", "--out", str(dest))
    assert code == 0 and out == ""
    assert len(dest.read_text().strip().splitlines()) == 2


# ---------------------------------------------------------------------------
# gen commands

def test_gen_instances_text_and_json(capsys):
    code, out, _ = run_cli(capsys, "gen", "instances")
    assert code == 0
    assert "total base=329 crossed=3600" in out
    code, out, _ = run_cli(capsys, "gen", "instances", "--format", "json")
    summary = json.loads(out)
    assert summary["total_base"] == 329
    assert summary["total_crossed"] == 3600
    assert len(summary["labs"]) == 8


def test_gen_instances_custom_roster(capsys):
    code, out, _ = run_cli(capsys, "gen", "instances", "--labs", "3", "--spatial", "10",
                           "--coffee-lab", "1", "--format", "json")
    assert code == 0
    summary = json.loads(out)
    assert summary["total_base"] == 2 * 41 + 42
    assert summary["total_crossed"] == 3 * 5 * 10
    coffee = [lab["lab"] for lab in summary["labs"]
              if any(t["name"] == "make-coffee" for t in lab["templates"])]
    assert coffee == ["lab2"]


def test_gen_texture_writes_raster_and_ppm(capsys, tmp_path):
    out_path = tmp_path / "tex.dvtx"
    ppm_path = tmp_path / "tex.ppm"
    code, out, _ = run_cli(capsys, "gen", "texture", WRAPPED_HUE, "--seed", "9",
                           "--width", "32", "--height", "16",
                           "--which", "table", "--out", str(out_path),
                           "--ppm", str(ppm_path))
    assert code == 0 and "wrote" in out
    raster = genkit.read_raster(out_path)
    assert (raster.width, raster.height) == (32, 16)
    spec = taskspec.parse_file(WRAPPED_HUE)
    rendered = genkit.fractal_texture(spec.table_texture, 32, 16, seed=9)
    assert genkit.raster_within(spec.table_texture, rendered)
    # the file format quantizes to float32; read-back matches that cast exactly
    assert np.array_equal(raster.pixels, rendered.pixels.astype("<f4").astype(np.float64))
    assert ppm_path.read_bytes().startswith(b"P6\n32 16\n255\n")


def test_gen_texture_rejects_jitter_texture(capsys, tmp_path):
    code, _, err = run_cli(capsys, "gen", "texture", BIN_CARROT, "--seed", "1",
                           "--which", "table", "--out", str(tmp_path / "t.dvtx"))
    assert code == 1
    assert "fractal" in json.loads(err)["message"]


def test_gen_synth_end_to_end(capsys, tmp_path, corpus):
    source = metadata.ingest(corpus)[0]
    segments = genkit.decompose(
        source, taskspec.PredicateSequence(
            (taskspec.Primitive("pick"), taskspec.Primitive("place"))))
    anchors = [{"pos": list(map(float, s.anchor_pos)),
                "quat": list(map(float, s.anchor_quat))} for s in segments]
    anchors_path = tmp_path / "anchors.json"
    anchors_path.write_text(json.dumps(anchors))
    out_path = tmp_path / "synth.jsonl"
    code, out, _ = run_cli(capsys, "gen", "synth", "--demos", corpus, "--id", "d0",
                           "--goal", "pick,place", "--anchors", str(anchors_path),
                           "--out", str(out_path), "--new-id", "synth-9")
    assert code == 0
    assert "(120 steps from 2 segments)" in out
    synth = metadata.ingest(out_path)
    assert len(synth) == 1 and synth[0].id == "synth-9"
    assert np.allclose(synth[0].steps.ee_pos, source.steps.ee_pos, atol=1e-6)


def test_gen_synth_unknown_id(capsys, tmp_path, corpus):
    code, _, err = run_cli(capsys, "gen", "synth", "--demos", corpus, "--id", "ghost",
                           "--goal", "pick,place",
                           "--anchors", str(tmp_path / "a.json"),
                           "--out", str(tmp_path / "o.jsonl"))
    assert code == 1
    assert "ghost" in json.loads(err)["message"]


# ---------------------------------------------------------------------------
# corpus commands

def test_ingest_reports_counts(capsys, corpus):
    code, out, _ = run_cli(capsys, "ingest", corpus)
    assert code == 0
    report = json.loads(out)
    assert report == {"records": 3, "labs": {"lab1": 2, "lab2": 1}}


def test_ingest_rejects_bad_corpus(capsys, tmp_path):
    rows = [demo_row(rid="ok")]
    bad = demo_row(rid="bad")
    bad["camera_extrinsics"]["quat"] = [3.0, 0.0, 0.0, 0.0]
    rows.append(bad)
    path = write_jsonl(tmp_path / "bad.jsonl", rows)
    code, _, err = run_cli(capsys, "ingest", path)
    assert code == 1
    report = json.loads(err)
    assert report["error"] == "QuaternionNormError" and report["line"] == 2


def test_annotate_pipeline(capsys, tmp_path, corpus):
    colors = tmp_path / "colors.json"
    colors.write_text(json.dumps({"d0": "scarlet", "d1": "navy", "d2": "olive"}))
    out_path = tmp_path / "annotated.jsonl"
    code, out, _ = run_cli(capsys, "annotate", corpus, "--out", str(out_path),
                           "--color-table", str(colors))
    assert code == 0
    stats = json.loads(out)
    assert stats == {"records": 3, "target_object": 3, "object_position": 3,
                     "object_color": 3, "camera_bin": 3}
    annotated = metadata.ingest(out_path)
    assert [r.annotations.object_color for r in annotated] == ["red", "blue", "green"]
    assert annotated[0].annotations.target_object == "mug"
    assert annotated[0].annotations.camera_bin == "agent-front"


def test_annotate_unknown_color_label_is_loud(capsys, tmp_path, corpus):
    colors = tmp_path / "colors.json"
    colors.write_text(json.dumps({"d0": "grass green", "d1": "navy", "d2": "olive"}))
    code, _, err = run_cli(capsys, "annotate", corpus, "--out", str(tmp_path / "a.jsonl"),
                           "--color-table", str(colors))
    assert code == 1
    assert json.loads(err)["error"] == "UnrecognizedColor"


def test_annotate_with_custom_bin_table(capsys, tmp_path, corpus):
    bins = tmp_path / "bins.json"
    bins.write_text(json.dumps([
        {"label": "everywhere", "theta_center": 45.0, "phi_center": 0.0,
         "theta_width": 90.0, "phi_width": 360.0}]))
    out_path = tmp_path / "annotated.jsonl"
    code, out, _ = run_cli(capsys, "annotate", corpus, "--out", str(out_path),
                           "--bin-table", str(bins))
    assert code == 0
    annotated = metadata.ingest(out_path)
    assert {r.annotations.camera_bin for r in annotated} == {"everywhere"}


def test_profile_text_json_and_save(capsys, tmp_path, corpus):
    code, out, _ = run_cli(capsys, "profile", corpus)
    assert code == 0
    for name in dvalgebra.DV_NAMES:
        assert name in out
    saved = tmp_path / "profile.json"
    code, out, _ = run_cli(capsys, "profile", corpus, "--format", "json",
                           "--out", str(saved))
    assert code == 0
    payload = json.loads(out)
    assert payload["demo_count"] == 3
    assert payload["dvs"]["motion"]["elements"] == ["pick", "place", "push"]
    profile = dvalgebra.load_profile(saved)
    assert profile.demo_count == 3


def test_classify_pair(capsys, tmp_path):
    target_rows = [demo_row(rid=f"t{i}", obj_pos=(0.2, 0.0, 0.02)) for i in range(3)]
    spread_rows = [demo_row(rid=f"c{i}", obj_pos=(0.1 * i - 0.3, 0.05 * i, 0.02))
                   for i in range(8)]
    target = write_jsonl(tmp_path / "target.jsonl", target_rows)
    both = write_jsonl(tmp_path / "both.jsonl", spread_rows + target_rows)
    code, out, _ = run_cli(capsys, "classify", "--target", target, "--cotrain", both,
                           "--dv", "objSpat")
    assert code == 0 and out.strip() == "diverse_aligned"
    code, out, _ = run_cli(capsys, "classify", "--target", target, "--cotrain", both,
                           "--dv", "objSpat", "--format", "json")
    payload = json.loads(out)
    assert payload["case"] == "diverse_aligned"
    assert payload["aligned"] is True
    assert payload["rho"] == 5.0
    assert payload["cotrain_size"] == pytest.approx(9 * 0.02 ** 3)


def test_retrieve_inline_query_and_report(capsys, tmp_path, corpus):
    colors = tmp_path / "colors.json"
    colors.write_text(json.dumps({"d0": "red", "d1": "blue", "d2": "red"}))
    annotated = tmp_path / "annotated.jsonl"
    run_cli(capsys, "annotate", corpus, "--out", str(annotated),
            "--color-table", str(colors))
    code, out, _ = run_cli(capsys, "retrieve", "--corpus", str(annotated),
                           "--query-text", '(query :color "red" :motion pick push)')
    assert code == 0
    assert out.splitlines() == ["d0", "d2"]
    code, out, _ = run_cli(capsys, "retrieve", "--corpus", str(annotated),
                           "--query-text", '(query :color "red" :motion pick push)',
                           "--report")
    report = json.loads(out)
    counts = [s["count"] for s in report["stages"]]
    assert counts == sorted(counts, reverse=True)
    assert report["final_count"] == 2


def test_retrieve_query_file_to_out(capsys, tmp_path, corpus):
    queries = tmp_path / "queries.mlq"
    queries.write_text('(query :campose (:pos 0.64 0.0 0.64))\n(query :motion place)\n')
    dest = tmp_path / "hits.txt"
    code, out, _ = run_cli(capsys, "retrieve", "--corpus", corpus,
                           "--query", str(queries), "--out", str(dest))
    assert code == 0 and out == ""
    assert dest.read_text().splitlines() == ["d0", "d1", "d2", "d1"]


def test_sample_batches_lines_and_stats(capsys, tmp_path):
    target = tmp_path / "target.txt"
    cotrain = tmp_path / "cotrain.txt"
    target.write_text("t0\nt1\n\n")
    cotrain.write_text("c0\nc1\nc2\n")
    code, out, _ = run_cli(capsys, "sample-batches", "--target", str(target),
                           "--cotrain", str(cotrain), "--seed", "42",
                           "--batch", "8", "--n", "3")
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 3
    assert all(len(line.split()) == 8 for line in lines)
    assert set(" ".join(lines).split()) <= {"t0", "t1", "c0", "c1", "c2"}
    code, out2, _ = run_cli(capsys, "sample-batches", "--target", str(target),
                            "--cotrain", str(cotrain), "--seed", "42",
                            "--batch", "8", "--n", "3")
    assert out2 == out
    code, out, _ = run_cli(capsys, "sample-batches", "--target", str(target),
                           "--cotrain", str(cotrain), "--seed", "42",
                           "--batch", "100", "--n", "100", "--stats", "--no-counts")
    stats = json.loads(out)
    assert stats["total_draws"] == 10_000
    assert "draw_counts" not in stats
    assert abs(stats["target_fraction"] - 0.5) <= 3 * (0.25 / 10_000) ** 0.5


def test_sample_batches_empty_pool_error(capsys, tmp_path):
    target = tmp_path / "target.txt"
    cotrain = tmp_path / "cotrain.txt"
    target.write_text("")
    cotrain.write_text("c0\n")
    code, _, err = run_cli(capsys, "sample-batches", "--target", str(target),
                           "--cotrain", str(cotrain), "--seed", "1")
    assert code == 1
    assert json.loads(err)["error"] == "EmptyPoolSelected"


def test_installed_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "dvcurate.cli", "gen", "instances"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "total base=329 crossed=3600" in proc.stdout
