import json
import subprocess
import sys

import pytest

from poweruct.cli import build_config, main, read_config_file
from poweruct.harness import ConfigError


def write_config(tmp_path, text):
    path = tmp_path / "exp.cfg"
    path.write_text(text)
    return str(path)


CONFIG = """
# small Copy run
env = copy-144
algo = power_uct
p = 3
c = 0.25
sims = 128
runs = 4
seed = 3
"""


def test_run_from_config_file(tmp_path, capsys):
    assert main(["run", "--config", write_config(tmp_path, CONFIG)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "env,algo,p,C,gamma,sims,runs,mean,std_dev,std_error,seconds"
    assert lines[1].startswith("copy-144,power_uct,3.0,0.25,1.0,128,4,")
    assert lines[1].endswith(",")


def test_flags_override_file(tmp_path, capsys):
    main(["run", "--config", write_config(tmp_path, CONFIG), "--runs", "2", "--format", "json"])
    record = json.loads(capsys.readouterr().out)[0]
    assert record["runs"] == 2 and record["C"] == 0.25


def test_output_file_and_workers(tmp_path):
    cfg = write_config(tmp_path, CONFIG)
    outs = []
    for workers in ("1", "3"):
        out = tmp_path / f"w{workers}.csv"
        assert main(["run", "--config", cfg, "--workers", workers, "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_grid(tmp_path, capsys):
    cfg = write_config(tmp_path, CONFIG)
    assert main(["grid", "--config", cfg, "--axis", "p=1,3", "--axis", "c=0.25,1"]) == 0
    captured = capsys.readouterr()
    assert len(captured.out.splitlines()) == 5
    assert captured.err.startswith("best:")


def test_increasing_p(tmp_path, capsys):
    assert main(["grid", "--config", write_config(tmp_path, CONFIG), "--increasing-p", "1,2,max"]) == 0
    assert 2 <= len(capsys.readouterr().out.splitlines()) <= 4


def test_plan_once_switch(tmp_path, capsys):
    cfg = write_config(tmp_path, CONFIG)
    main(["run", "--config", cfg, "--no-plan-once", "--sims", "16", "--runs", "1"])
    assert capsys.readouterr().out.count("\n") == 2


@pytest.mark.parametrize("argv", [
    ["run", "--env", "frozenlake", "--algo", "pomcp", "--sims", "4", "--runs", "1"],
    ["run", "--env", "frozenlake", "--algo", "uct", "--sims", "4", "--runs", "0"],
    ["run", "--env", "frozenlake", "--algo", "uct", "--sims", "many", "--runs", "1"],
    ["run", "--env", "frozenlake", "--algo", "uct"],
    ["grid", "--env", "frozenlake", "--algo", "uct", "--sims", "4", "--runs", "1", "--axis", "volume=11"],
    ["checks", "--only", "telepathy"],
])
def test_config_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert "config error" in capsys.readouterr().err


def test_unknown_config_key(tmp_path):
    with pytest.raises(ConfigError, match="unknown key"):
        read_config_file(write_config(tmp_path, "colour = blue\n"))
    with pytest.raises(ConfigError, match="key=value"):
        read_config_file(write_config(tmp_path, "env copy-144\n"))


def test_missing_config_file_exit_3(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.cfg")]) == 3


def test_unwritable_output_exit_3(tmp_path):
    argv = ["run", "--config", write_config(tmp_path, CONFIG), "--runs", "1", "--out", str(tmp_path / "x" / "y.csv")]
    assert main(argv) == 3


def test_build_config_parses_types():
    cfg = build_config({"env": "frozenlake", "algo": "max_uct", "sims": "8", "runs": "2", "p": "inf",
                        "plan-once": "yes"})
    assert cfg.sims == 8 and cfg.p == float("inf") and cfg.plan_once is True


def test_checks_subcommand(tmp_path):
    out = tmp_path / "checks.jsonl"
    assert main(["checks", "--only", "concentration", "--out", str(out)]) == 0
    record = json.loads(out.read_text())
    assert record["check_name"] == "concentration" and record["passed"]


def test_console_entry_point():
    result = subprocess.run([sys.executable, "-m", "poweruct.cli", "--help"], capture_output=True, text=True)
    assert result.returncode == 0 and "checks" in result.stdout
