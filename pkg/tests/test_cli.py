import json

from edgecache import cli


def test_train_then_eval(tmp_path, capsys):
    out = tmp_path / "run"
    assert cli.main(["train", "--seed", "1", "--out", str(out), "--train-slots", "30",
                     "--eval-slots", "10"]) == 0
    assert (out / "proposed-seed1.csv").exists() and (out / "proposed-seed1.npz").exists()
    cfg = json.loads((out / "proposed-seed1-config.json").read_text())
    assert cfg["train_slots"] == 30
    assert cli.main(["eval", "--seed", "1", "--out", str(tmp_path / "ev"), "--eval-slots", "10",
                     "--checkpoint", str(out / "proposed-seed1.npz")]) == 0
    assert "mean energy" in capsys.readouterr().out


def test_config_file_and_policy(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"train_slots": 5, "eval_slots": 5, "system": {"K": 4}}))
    assert cli.main(["train", "--config", str(path), "--policy", "fifo",
                     "--out", str(tmp_path)]) == 0
    assert (tmp_path / "fifo-seed0.csv").exists()


def test_bad_config_exit_code(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"system": {"nope": 1}}))
    assert cli.main(["train", "--config", str(path), "--out", str(tmp_path)]) == 1
    assert "nope" in capsys.readouterr().err


def test_sweep_command(tmp_path, capsys):
    code = cli.main(["sweep", "--axis", "K", "--grid", "3,4", "--seeds", "0",
                     "--policies", "lru,offload-only", "--train-slots", "5", "--eval-slots", "5",
                     "--workers", "1", "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "sweep-K.csv").exists()


def test_ne_check_reports_three_checks(capsys):
    cli.main(["ne-check", "--instances", "20"])
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 3 and all(l.startswith("[") for l in lines)
