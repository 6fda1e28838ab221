import json
import subprocess
import sys


def run_cli(args, cwd):
    return subprocess.run(
        [sys.executable, "-m", "oste.cli", *args], cwd=cwd, capture_output=True, text=True
    )


def simulate(tmp_path, n=120, seed=3, censoring=0.3):
    out = tmp_path / "data.csv"
    res = run_cli(
        [
            "simulate", "--n", str(n), "--d", "3", "--informative", "1",
            "--censoring", str(censoring), "--seed", str(seed), "--out", str(out),
        ],
        tmp_path,
    )
    assert res.returncode == 0, res.stderr
    return out, tmp_path / "data.config.json"


def test_simulate_writes_csv_and_config(tmp_path):
    data, config = simulate(tmp_path)
    assert data.exists() and config.exists()
    cfg = json.loads(config.read_text())
    assert cfg["time_col"] == "time"
    assert set(cfg["features"]) == {"x1", "x2", "x3"}
    header = data.read_text().splitlines()[0]
    assert header == "time,status,x1,x2,x3"


def test_run_produces_byte_identical_reports(tmp_path):
    data, config = simulate(tmp_path)
    args = [
        "run", "--data", str(data), "--data-config", str(config),
        "--methods", "oste,rsf", "--runs", "2", "-B", "10", "--seed", "7",
        "--out-json", "report.json", "--out-csv", "report.csv",
    ]
    res1 = run_cli(args, tmp_path)
    assert res1.returncode == 0, res1.stderr
    first = (tmp_path / "report.json").read_bytes()
    res2 = run_cli(args, tmp_path)
    assert res2.returncode == 0
    assert (tmp_path / "report.json").read_bytes() == first
    report = json.loads(first)
    assert set(report["aggregate"]) == {"oste", "rsf"}
    csv_lines = (tmp_path / "report.csv").read_text().strip().splitlines()
    assert csv_lines[0] == "run,method,ibs,c_index,size,wall_clock_s"
    assert len(csv_lines) == 5


def test_sweep_command(tmp_path):
    data, config = simulate(tmp_path, n=100)
    res = run_cli(
        [
            "sweep", "--data", str(data), "--data-config", str(config),
            "--methods", "oste", "--runs", "1", "-B", "10", "--seed", "1",
            "--parameter", "M_fraction", "--values", "0.2,0.5",
            "--out-json", "sweep.json", "--out-csv", "sweep.csv",
        ],
        tmp_path,
    )
    assert res.returncode == 0, res.stderr
    payload = json.loads((tmp_path / "sweep.json").read_text())
    assert [p["value"] for p in payload] == [0.2, 0.5]
    lines = (tmp_path / "sweep.csv").read_text().strip().splitlines()
    assert lines[0].startswith("parameter,value,run,method")


def test_importance_command(tmp_path):
    data, config = simulate(tmp_path, n=150)
    res = run_cli(
        [
            "importance", "--data", str(data), "--data-config", str(config),
            "-B", "20", "--seed", "2", "--out-json", "imp.json", "--out-csv", "imp.csv",
        ],
        tmp_path,
    )
    assert res.returncode == 0, res.stderr
    imp = json.loads((tmp_path / "imp.json").read_text())
    assert set(imp) == {"x1", "x2", "x3"}
    # x1 drives the hazard in the simulation
    assert imp["x1"] == max(imp.values())


def test_failure_emits_machine_readable_record(tmp_path):
    res = run_cli(
        [
            "run", "--data", "missing.csv", "--data-config", "missing.json",
            "--out-json", "r.json",
        ],
        tmp_path,
    )
    assert res.returncode != 0
    record = json.loads(res.stderr.strip().splitlines()[-1])
    assert "error" in record and "message" in record


def test_bad_config_is_distinguished(tmp_path):
    data, _ = simulate(tmp_path)
    bad = tmp_path / "bad.json"
    bad.write_text("{\"time_col\": \"time\"}")
    res = run_cli(
        ["run", "--data", str(data), "--data-config", str(bad), "--out-json", "r.json"],
        tmp_path,
    )
    assert res.returncode == 2
    record = json.loads(res.stderr.strip().splitlines()[-1])
    assert record["error"] == "ConfigError"


def test_workers_env_var(tmp_path, monkeypatch):
    data, config = simulate(tmp_path, n=80)
    res = subprocess.run(
        [
            sys.executable, "-m", "oste.cli", "run", "--data", str(data),
            "--data-config", str(config), "--methods", "rsf", "--runs", "1",
            "-B", "4", "--seed", "0", "--out-json", "r.json",
        ],
        cwd=tmp_path,
        capture_output=True,
        text=True,
        env={"OSTE_WORKERS": "2", "PATH": "/usr/bin:/bin:/usr/local/bin"},
    )
    assert res.returncode == 0, res.stderr
