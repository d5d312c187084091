import filecmp
import json
import subprocess
import sys
from pathlib import Path

import pytest

from demis import cli
from demis.frames import load_sequence, write_sequence
from demis.synthetic import synthetic_sequence

VECTOR = "AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H"


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture
def frames_dir(tmp_path):
    d = tmp_path / "frames"
    write_sequence(synthetic_sequence("static", n_frames=5, size=16, obj_size=8), d)
    return d


@pytest.fixture
def pipeline(tmp_path, frames_dir):
    masks, enc = tmp_path / "masks", tmp_path / "enc"
    assert run("segment", "--input", frames_dir, "--out", masks) == 0
    assert run("encrypt", "--input", frames_dir, "--masks", masks, "--out", enc, "--seed", 0) == 0
    return tmp_path


def _same_tree(a: Path, b: Path) -> bool:
    cmp = filecmp.dircmp(a, b)
    stack = [cmp]
    while stack:
        c = stack.pop()
        if c.left_only or c.right_only or c.diff_files or c.funny_files:
            return False
        _, mismatch, errors = filecmp.cmpfiles(c.left, c.right, c.common_files, shallow=False)
        if mismatch or errors:
            return False
        stack.extend(c.subdirs.values())
    return True


def test_cvss_prints_score(capsys):
    assert run("cvss", VECTOR) == 0
    assert capsys.readouterr().out.strip() == "9.8"


def test_cvss_bad_vector(capsys):
    assert run("cvss", "AV:N") == 3
    err = capsys.readouterr().err
    assert err.startswith("error: threat_model:") and err.count("\n") == 1


def test_full_pipeline_roundtrip(pipeline, frames_dir, capsys):
    t = pipeline
    assert sorted(p.name for p in (t / "masks").glob("*.rle"))[0] == "mask_0000.rle"
    assert json.loads((t / "masks" / "run.json").read_text())["method"] == "gmm"
    assert run("decrypt", "--fg", t / "enc/fg.demis", "--bg", t / "enc/bg.demis",
               "--keys", t / "enc/keys.txt", "--out", t / "dec") == 0
    assert load_sequence(t / "dec").frames == load_sequence(frames_dir).frames
    assert run("analyze", "--original", frames_dir, "--attacked", t / "dec", "--out", t / "an") == 0
    rows = (t / "an/metrics.csv").read_text().splitlines()
    assert len(rows) == 6 and all(r.endswith(",1.0000") for r in rows[1:])


def test_attack_then_decrypt_detects_damage(pipeline, frames_dir):
    t = pipeline
    assert run("attack", "--fg", t / "enc/fg.demis", "--attack", "malleability@2",
               "--out", t / "att/fg.demis") == 0
    info = json.loads((t / "att/fg.demis.run.json").read_text())
    assert info["attacks"] and isinstance(info["seed"], int)
    assert run("decrypt", "--fg", t / "att/fg.demis", "--bg", t / "enc/bg.demis",
               "--keys", t / "enc/keys.txt", "--out", t / "dec", "--format", "ppm") == 0
    flags = (t / "dec/flags.csv").read_text().splitlines()
    assert flags[3] == "2,0,1"
    assert run("analyze", "--original", frames_dir, "--attacked", t / "dec", "--frames", "2",
               "--out", t / "an", "--histograms") == 0
    row = (t / "an/metrics.csv").read_text().splitlines()[1].split(",")
    assert row[0] == "2" and float(row[3]) > 0
    assert (t / "an/hist_attacked_r.svg").exists()


def test_attack_seed_is_recorded_and_reproducible(pipeline):
    t = pipeline
    for name in ("a", "b"):
        assert run("attack", "--fg", t / "enc/fg.demis", "--attack", "random_insert:count=3",
                   "--seed", 42, "--out", t / name / "fg.demis") == 0
    assert (t / "a/fg.demis").read_bytes() == (t / "b/fg.demis").read_bytes()
    assert json.loads((t / "a/fg.demis.run.json").read_text())["attacks"] == ["random_insert:count=3,seed=42@all"]


def test_attack_unknown_kind_is_usage_error(pipeline, capsys):
    assert run("attack", "--fg", pipeline / "enc/fg.demis", "--attack", "rot13",
               "--out", pipeline / "x.demis") == 2
    err = capsys.readouterr().err
    assert "usage:" in err and "rot13" in err


def test_missing_input_is_input_error(tmp_path, capsys):
    assert run("segment", "--input", tmp_path / "nope", "--out", tmp_path / "m") == 3
    assert capsys.readouterr().err.startswith("error: frame_store:")


def test_method_background_mismatch(frames_dir, tmp_path, capsys):
    assert run("segment", "--input", frames_dir, "--out", tmp_path / "m",
               "--method", "gmm", "--background", "dynamic") == 3
    assert "roi_segment" in capsys.readouterr().err
    assert run("segment", "--input", frames_dir, "--out", tmp_path / "m",
               "--method", "gmm", "--background", "dynamic", "--override") == 0


def test_corrupt_container(tmp_path, capsys):
    bad = tmp_path / "fg.demis"
    bad.write_bytes(b"NOTADEMISFILE")
    assert run("attack", "--fg", bad, "--attack", "inverse", "--out", tmp_path / "o") == 3
    assert capsys.readouterr().err.startswith("error: selective_crypto:")


def test_argparse_usage_exit():
    assert run("segment") == 2
    assert run("no-such-command") == 2


def test_internal_error_exit(monkeypatch, capsys):
    def boom(*_):
        raise RuntimeError("invariant broken")
    monkeypatch.setattr(cli, "cvss_base_score", boom)
    assert run("cvss", VECTOR) == 4
    assert "internal" in capsys.readouterr().err


def test_config_file_and_flag_precedence(pipeline):
    t = pipeline
    cfg = t / "cfg.json"
    cfg.write_text(json.dumps({"seed": 5}))
    assert run("--config", cfg, "attack", "--fg", t / "enc/fg.demis", "--attack", "inverse",
               "--out", t / "c1.demis") == 0
    assert json.loads((t / "c1.demis.run.json").read_text())["seed"] == 5
    assert run("--config", cfg, "attack", "--fg", t / "enc/fg.demis", "--attack", "inverse",
               "--seed", 9, "--out", t / "c2.demis") == 0
    assert json.loads((t / "c2.demis.run.json").read_text())["seed"] == 9


def test_bad_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("[1, 2]")
    assert run("--config", cfg, "cvss", VECTOR) == 2


def test_adt_command(tmp_path, capsys):
    assert run("adt", "--attacks", "replay_attack") == 0
    assert json.loads(capsys.readouterr().out)["compromised"] is True
    assert run("adt", "--attacks", "replay_attack", "--defenses", "fg_bg_separation",
               "--enumerate", "--out", tmp_path / "adt.json") == 0
    doc = json.loads((tmp_path / "adt.json").read_text())
    assert doc["compromised"] is False and ["inverse_attack", "replay_attack"] in doc["minimal_attack_sets"]
    assert run("adt", "--attacks", "teleport") == 3


def test_report_command(tmp_path, pipeline, frames_dir):
    t = pipeline
    run("adt", "--attacks", "replay_attack", "--out", t / "adt.json")
    run("analyze", "--original", frames_dir, "--attacked", frames_dir, "--out", t / "an")
    assert run("report", "--out", t / "rep", "--adt-result", t / "adt.json",
               "--metrics", t / "an/metrics.csv", "--seed", 3) == 0
    md = (t / "rep/threat_report.md").read_text()
    assert "Seed: 3" in md and "### metrics" in md and "root compromised: yes" in md
    first = (t / "rep/threat_report.json").read_bytes()
    run("report", "--out", t / "rep", "--adt-result", t / "adt.json",
        "--metrics", t / "an/metrics.csv", "--seed", 3)
    assert (t / "rep/threat_report.json").read_bytes() == first


def test_demo_8x8_deterministic(tmp_path):
    for name in ("a", "b"):
        assert run("demo", "--out", tmp_path / name, "--seed", 0, "--size", 8, "--n-frames", 4) == 0
    assert _same_tree(tmp_path / "a", tmp_path / "b")
    header = (tmp_path / "a/table_entropy.csv").read_text().splitlines()[0].split(",")
    assert header[-5:] == ["inverse_attack", "lowercase_attack", "uppercase_attack",
                           "random_attack", "malleability_attack"]
    assert json.loads((tmp_path / "a/run.json").read_text())["seed"] == 0
    assert (tmp_path / "a/synthetic_dynamic/histograms/original_r.svg").read_text().startswith("<svg")


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "demis.cli", "cvss", VECTOR],
                       capture_output=True, text=True, check=False)
    assert r.returncode == 0 and r.stdout.strip() == "9.8"
