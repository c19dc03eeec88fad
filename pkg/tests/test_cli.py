import json
import subprocess
import sys
from pathlib import Path

import pytest

from quadpong.cli import main
from quadpong.genome import loads
from quadpong.metrics import RUN_CSV_HEADER, SWEEP_CSV_HEADER, read_run_csv, read_sweep_csv


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def train(capsys, out_dir, *extra):
    code, out, err = run(capsys, "train", "--population", 20, "--sides", 4, "--seed", 7,
                         "--out", out_dir, *extra)
    assert code == 0, err
    return Path(out.strip().splitlines()[-1])


def test_train_canonical(tmp_path, capsys):
    run_dir = train(capsys, tmp_path)
    assert run_dir.parent == tmp_path and run_dir.name.startswith("run-7-")
    names = sorted(p.name for p in run_dir.iterdir())
    assert names == ["champion-bottom.json", "champion-left.json", "champion-right.json",
                     "champion-top.json", "manifest.json", "stats.csv"]
    stats = read_run_csv(run_dir / "stats.csv")
    assert 1 <= len(stats) <= 100
    assert (run_dir / "stats.csv").read_text().splitlines()[0] == ",".join(RUN_CSV_HEADER)
    for name in names[:4]:
        loads((run_dir / name).read_text())
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["command"] == "train" and manifest["seed"] == 7
    assert manifest["evolution"]["population_size"] == 20
    assert manifest["trainer"]["n_per_side"] == 5


def test_train_indivisible_population(tmp_path, capsys):
    code, _, err = run(capsys, "train", "--population", 5, "--sides", 4, "--out", tmp_path)
    assert code == 2 and "divisible" in err
    assert list(tmp_path.iterdir()) == []


def test_train_stats_byte_identical(tmp_path, capsys):
    a = train(capsys, tmp_path / "a")
    b = train(capsys, tmp_path / "b")
    assert (a / "stats.csv").read_bytes() == (b / "stats.csv").read_bytes()
    for side in ("top", "bottom", "left", "right"):
        assert (a / f"champion-{side}.json").read_bytes() == (b / f"champion-{side}.json").read_bytes()


def test_manifest_reproduces_run(tmp_path, capsys):
    first = train(capsys, tmp_path / "a", "--generations", 8, "--max-steps", 5000)
    code, out, err = run(capsys, "train", "--config", first / "manifest.json", "--out", tmp_path / "b")
    assert code == 0, err
    again = Path(out.strip().splitlines()[-1])
    assert (first / "stats.csv").read_bytes() == (again / "stats.csv").read_bytes()
    assert len(read_run_csv(again / "stats.csv")) <= 8


def test_flags_override_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"trainer": {"max_generations": 2, "seed": 3},
                               "evolution": {"population_size": 8}}))
    code, out, err = run(capsys, "train", "--config", cfg, "--sides", 2, "--seed", 4, "--out", tmp_path)
    assert code == 0, err
    manifest = json.loads((Path(out.strip().splitlines()[-1]) / "manifest.json").read_text())
    assert manifest["seed"] == 4 and manifest["trainer"]["max_generations"] == 2
    assert manifest["trainer"]["n_per_side"] == 4
    assert manifest["env"]["active_sides"] == ["LEFT", "RIGHT"]


@pytest.mark.parametrize("doc", ["{not json", "[1, 2]", '{"bogus": {}}', '{"trainer": {"typo": 1}}'])
def test_bad_config_is_usage_error(tmp_path, capsys, doc):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(doc)
    code, _, _ = run(capsys, "train", "--config", cfg, "--out", tmp_path)
    assert code == 2


def test_runtime_failure_exit_code(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code, _, err = run(capsys, "train", "--generations", 1, "--out", blocker)
    assert code == 3 and "failed" in err


@pytest.mark.parametrize("mode, rows", [("population", 6), ("scenario", 3)])
def test_sweep_rows(tmp_path, capsys, mode, rows):
    code, out, err = run(capsys, "sweep", "--mode", mode, "--seeds", 2, "--generations", 3,
                         "--jobs", 1, "--out", tmp_path)
    assert code == 0, err
    run_dir = Path(out.strip().splitlines()[-1])
    parsed = read_sweep_csv(run_dir / "sweep.csv")
    assert len(parsed) == rows and all(r.seeds_run == 2 for r in parsed)
    assert (run_dir / "sweep.csv").read_text().splitlines()[0] == ",".join(SWEEP_CSV_HEADER)
    assert len(list((run_dir / "runs").glob("*.csv"))) == rows * 2
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["sweep"] == {"mode": mode, "seeds": [0, 1]}


def test_sweep_zero_seeds(tmp_path, capsys):
    code, _, err = run(capsys, "sweep", "--mode", "population", "--seeds", 0, "--out", tmp_path)
    assert code == 2 and "seeds" in err


def test_argparse_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["train", "--sides", "3"])
    assert exc.value.code == 2


def test_replay_empty_dir_lists_missing_sides(tmp_path, capsys):
    code, _, err = run(capsys, "replay", "--champions", tmp_path)
    assert code == 2
    for side in ("TOP", "BOTTOM", "LEFT", "RIGHT"):
        assert f"missing champion for {side}" in err


def test_replay_corrupt_champion(tmp_path, capsys):
    run_dir = train(capsys, tmp_path, "--generations", 1)
    (run_dir / "champion-left.json").write_text("{}")
    code, _, err = run(capsys, "replay", "--champions", run_dir)
    assert code == 2 and "corrupt champion file" in err


def test_replay_summary_and_trace(tmp_path, capsys):
    run_dir = train(capsys, tmp_path, "--generations", 3)
    code, out, _ = run(capsys, "replay", "--champions", run_dir, "--trials", 3, "--max-steps", 2000)
    assert code == 0 and out.startswith("sustained ") and "of 3 trials" in out

    code, out, err = run(capsys, "replay", "--champions", run_dir, "--trials", 2,
                         "--max-steps", 2000, "--trace")
    assert code == 0 and err.startswith("sustained ")
    lines = out.splitlines()
    assert lines
    steps = []
    for line in lines:
        rec = json.loads(line)
        assert set(rec) == {"step", "ball_x", "ball_y", "vx", "vy", "events"}
        assert set(rec["events"]) == {"hits", "misses", "side_breached", "wall_bounce"}
        steps.append(rec["step"])
    assert steps[0] == 1

    trace = tmp_path / "trace.jsonl"
    code, out, _ = run(capsys, "replay", "--champions", run_dir, "--trials", 2,
                       "--max-steps", 2000, "--trace", trace)
    assert code == 0 and out.startswith("sustained ")
    assert trace.read_text().splitlines() == lines


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "quadpong.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "quadpong" in proc.stdout
