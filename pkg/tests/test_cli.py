import json

import pytest

from quaternion_riccati.cli import (
    EXIT_CHECK_FAILED,
    EXIT_OK,
    EXIT_SCHEMA_ERROR,
    build_parser,
    effective_settings,
    main,
)
from quaternion_riccati.config import get_settings
from quaternion_riccati.errors import SchemaError
from quaternion_riccati.models import parse_scenario
from quaternion_riccati.scenarios.runner import TRAJECTORY_COLUMNS


@pytest.fixture
def scenario_file(tmp_path):
    def write(control, name="scenario.json"):
        path = tmp_path / name
        path.write_text(json.dumps(control))
        return str(path)

    return write


def test_list_builtins(capsys):
    assert main(["list-builtins"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "example-3.1-exp\t" in out
    assert "thm-4.2-real-extremal\t" in out
    assert len(out.strip().splitlines()) == 10


def test_show(capsys):
    assert main(["show", "example-3.4"]) == EXIT_OK
    config = json.loads(capsys.readouterr().out)
    assert config["name"] == "example-3.4"
    assert main(["show", "example-9.9"]) == EXIT_SCHEMA_ERROR


def test_run_minimal(control_minimal, scenario_file, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", scenario_file(control_minimal), "--out", str(out)]) == EXIT_OK
    assert "minimal-const: PASS" in capsys.readouterr().out

    target = out / "minimal-const"
    header = (target / "seed-00.csv").read_text().splitlines()[0]
    assert header == ",".join(TRAJECTORY_COLUMNS)
    assert (target / "seed-01.csv").exists()
    assert not list(target.glob("*.tmp"))

    report = json.loads((target / "report.json").read_text())
    assert report["passed"] is True
    assert report["mode"] == "riccati"
    assert [check["name"] for check in report["checks"]] == [
        "01-symbol",
        "02-closed-form",
        "03-companion-moduli",
    ]
    assert report["seeds"][0]["status"] == "reached-end"
    assert report["settings"]["horizon"] == 3.0


def test_run_is_reproducible(control_minimal, scenario_file, tmp_path):
    path = scenario_file(control_minimal)
    first, second = tmp_path / "first", tmp_path / "second"
    assert main(["run", path, "--out", str(first)]) == EXIT_OK
    assert main(["run", path, "--out", str(second)]) == EXIT_OK
    for name in ("seed-00.csv", "seed-01.csv"):
        a = (first / "minimal-const" / name).read_bytes()
        b = (second / "minimal-const" / name).read_bytes()
        assert a == b


def test_run_failing_check(control_failing, scenario_file, tmp_path, capsys):
    path = scenario_file(control_failing)
    assert main(["run", path, "--out", str(tmp_path / "out")]) == EXIT_CHECK_FAILED
    assert "failing-exact: FAIL" in capsys.readouterr().out
    report = json.loads((tmp_path / "out" / "failing-exact" / "report.json").read_text())
    assert report["passed"] is False


@pytest.mark.parametrize(
    "argv",
    [
        ["run"],
        ["run", "does-not-exist.json"],
        ["run", "example-3.4", "--all-builtins"],
    ],
)
def test_run_usage_errors(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path)]) == EXIT_SCHEMA_ERROR


def test_run_schema_error(control_bad_mode, scenario_file, tmp_path):
    path = scenario_file(control_bad_mode)
    assert main(["run", path, "--out", str(tmp_path)]) == EXIT_SCHEMA_ERROR
    assert not (tmp_path / "bad-mode").exists()


def test_invalid_json_file(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{")
    assert main(["run", str(path), "--out", str(tmp_path)]) == EXIT_SCHEMA_ERROR


def test_missing_command():
    with pytest.raises(SystemExit):
        main([])


def test_settings_precedence(control_minimal, monkeypatch, tmp_path):
    monkeypatch.setenv("QR_RTOL", "1e-7")
    monkeypatch.setenv("QR_ATOL", "1e-10")
    scenario = parse_scenario(dict(control_minimal, tolerances={"atol": 1e-11}))
    args = build_parser().parse_args(["run", "x", "--out", str(tmp_path)])
    settings = effective_settings(scenario, args)
    assert settings.rtol == 1e-7
    assert settings.atol == 1e-11
    assert settings.out_dir == tmp_path
    args = build_parser().parse_args(["run", "x", "--atol", "1e-13"])
    assert effective_settings(scenario, args).atol == 1e-13


def test_invalid_settings_override(control_minimal, scenario_file, tmp_path):
    with pytest.raises(SchemaError, match="settings.rtol"):
        get_settings(rtol=-1.0)
    path = scenario_file(control_minimal)
    argv = ["run", path, "--rtol", "-1", "--out", str(tmp_path)]
    assert main(argv) == EXIT_SCHEMA_ERROR


def test_failed_seed_is_reported(scenario_file, tmp_path, capsys):
    table = {"grid": [0, 1], "samples": [[1, 0, 0, 0], [1, 0, 0, 0]]}
    control = {
        "name": "short-table",
        "equation": {"a": {"table": table}},
        "seeds": [[0, 0, 0, 0]],
        "horizon": 3,
        "checks": [{"kind": "symbol", "samples": 50}],
    }
    out = tmp_path / "out"
    assert main(["run", scenario_file(control), "--out", str(out)]) == EXIT_CHECK_FAILED
    assert "short-table: FAIL" in capsys.readouterr().out
    report = json.loads((out / "short-table" / "report.json").read_text())
    assert report["passed"] is False
    assert report["seeds"][0]["status"] == "failed"
    assert report["seeds"][0]["error"].startswith("OutOfDomain")
    assert report["checks"][0]["passed"] is True
