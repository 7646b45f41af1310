import xml.etree.ElementTree as ET
from pathlib import Path

import pytest
import yaml

from conftest import data_path
from qvsec.cli import EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_OK, EXIT_PARSE, build_parser, main
from qvsec.config import ConfigError, RunConfig, load_config
from qvsec.report import read_metadata, read_scan_csv

FIVE = str(data_path("five_bus_two_zone.yaml"))

INFEASIBLE = """\
system: {mva_base: 100.0, name: overloaded}
buses:
- {id: 1, kind: slack, v_mag: 1.0}
- {id: 2, kind: pq, p_load: 900.0, zone: 1}
generators:
- {bus: 1, p_set: 0.0, v_set: 1.0}
branches:
- {from_bus: 1, to_bus: 2, r: 0.0, x: 0.1}
"""


def tree(root: Path) -> dict:
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_solve_writes_outputs(tmp_path, capsys):
    assert main(["solve", "--case", FIVE, "--out", str(tmp_path)]) == EXIT_OK
    summary = yaml.safe_load((tmp_path / "solve" / "summary.yaml").read_text())
    assert summary["converged"] and summary["status"] == "converged"
    assert abs(summary["power_balance"]["residual"]["mw"]) < 1e-6
    assert "converged" in capsys.readouterr().out


def test_infeasible_case_exits_4(tmp_path):
    case = tmp_path / "overloaded.yaml"
    case.write_text(INFEASIBLE)
    assert main(["solve", "--case", str(case), "--out", str(tmp_path / "o")]) == EXIT_NONCONVERGED
    assert main(["qv", "--case", str(case), "--out", str(tmp_path / "o")]) == EXIT_NONCONVERGED


def test_unparseable_case_exits_3(tmp_path):
    case = tmp_path / "broken.m"
    case.write_text("function mpc = broken\nmpc.bus = [1 3 0;\n")
    assert main(["solve", "--case", str(case), "--out", str(tmp_path)]) == EXIT_PARSE


def test_config_errors_exit_2(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("case: x.m\nclusters: 4\n")
    assert main(["solve", "--config", str(bad)]) == EXIT_CONFIG
    assert main(["solve"]) == EXIT_CONFIG
    assert main(["solve", "--case", str(tmp_path / "missing.m")]) == EXIT_CONFIG
    assert main(["scan", "--case", FIVE, "--v-step", "-0.1", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["scan", "--case", FIVE, "--branches", "99", "--out", str(tmp_path)]) == EXIT_CONFIG
    bogus = tmp_path / "scan.csv"
    bogus.write_text("not,a,scan\r\n")
    assert main(["cluster", "--scan", str(bogus), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_bad_flag_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["scan", "--scheme", "lcc"])
    assert exc.value.code == 2


def test_qv_svgs_carry_config_hash(tmp_path):
    out = tmp_path / "o"
    assert main(["qv", "--case", FIVE, "--out", str(out), "--buses", "3,4"]) == EXIT_OK
    cfg = load_config(None, {"case": FIVE, "out": str(out), "buses": [3, 4]})
    for bus in (3, 4):
        text = (out / "qv" / f"bus_{bus}.svg").read_text()
        ET.fromstring(text.encode())
        assert read_metadata(text)["config-hash"] == cfg.hash()
    assert (out / "qv" / "summary.csv").exists()


def test_scatter_from_summary(tmp_path):
    assert main(["qv", "--case", FIVE, "--out", str(tmp_path)]) == EXIT_OK
    summary = tmp_path / "qv" / "summary.csv"
    assert main(["scatter", "--summary", str(summary), "--out", str(tmp_path / "s")]) == EXIT_OK
    meta = read_metadata((tmp_path / "s" / "scatter.svg").read_text())
    assert meta["points"] == "2"


def test_config_file_with_flag_override(tmp_path):
    cfg_file = tmp_path / "run.yaml"
    cfg_file.write_text(yaml.safe_dump({"case": FIVE, "k": 3, "seed": 4, "branches": [1, 3, 4]}))
    out = tmp_path / "o"
    assert main(["scan", "--config", str(cfg_file), "--out", str(out)]) == EXIT_OK
    assert main(["cluster", "--config", str(cfg_file), "--out", str(out), "--k", "2",
                 "--joint"]) == EXIT_OK
    model = yaml.safe_load((out / "cluster" / "joint" / "model.yaml").read_text())
    assert model["k"] == 2 and model["seed"] == 4
    features, _ = read_scan_csv((out / "scan" / "scan.csv").read_text())
    assert len(features.rows) == 6


def test_k_clamped_to_case_count(tmp_path, caplog):
    out = tmp_path / "o"
    assert main(["scan", "--case", FIVE, "--branches", "1", "--out", str(out)]) == EXIT_OK
    assert main(["cluster", "--case", FIVE, "--out", str(out)]) == EXIT_OK
    model = yaml.safe_load((out / "cluster" / "p_pf" / "model.yaml").read_text())
    assert model["k"] == 1
    assert "clustering with k=1" in caplog.text


def test_pipeline_is_byte_identical(tmp_path):
    args = ["pipeline", "--case", FIVE, "--branches", "1,3", "--k", "2"]
    assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "b")]) == EXIT_OK
    a, b = tree(tmp_path / "a"), tree(tmp_path / "b")
    assert a == b
    assert {"scan/scan.csv", "scan/manifest.yaml", "scatter.svg", "cluster/p_v/heatmap.svg"} <= set(a)


def test_config_hash_tracks_settings():
    base = RunConfig(case=FIVE)
    assert base.hash() == RunConfig(case=FIVE, out="elsewhere", workers=4).hash()
    assert base.hash() != RunConfig(case=FIVE, seed=1).hash()
    assert len(base.hash()) == 16


def test_config_validation():
    with pytest.raises(ConfigError):
        RunConfig(case=FIVE, k=0).validate()
    with pytest.raises(ConfigError):
        RunConfig(case=FIVE, scheme="lcc").validate()
    assert RunConfig(case=FIVE, scheme="pv").validate().schemes == ("p_v",)


def test_parser_lists_subcommands():
    text = build_parser().format_help()
    for cmd in ("solve", "qv", "scan", "cluster", "scatter", "pipeline"):
        assert cmd in text


TWO_BUS = """\
system: {mva_base: 100.0, name: two_bus}
buses:
- {id: 1, kind: slack, v_mag: 1.0}
- {id: 2, kind: pq, zone: 1}
generators:
- {bus: 1, p_set: 0.0, v_set: 1.0}
branches:
- {from_bus: 1, to_bus: 2, r: 0.0, x: 0.1}
"""


def read_table(path: Path) -> list[dict]:
    import csv

    with path.open(newline="") as fh:
        return list(csv.DictReader(fh))


def test_solve_two_bus_zero_load(tmp_path):
    case = tmp_path / "two_bus.yaml"
    case.write_text(TWO_BUS)
    assert main(["solve", "--case", str(case), "--out", str(tmp_path)]) == EXIT_OK
    rows = read_table(tmp_path / "solve" / "buses.csv")
    assert [float(r["v_mag"]) for r in rows] == [1.0, 1.0]


def test_solve_ieee14_table_matches_oracle(tmp_path, case14):
    import numpy as np

    from oracles import gauss_seidel

    assert main(["solve", "--case", str(data_path("case14.m")), "--out", str(tmp_path)]) == EXIT_OK
    rows = read_table(tmp_path / "solve" / "buses.csv")
    vm, va, _ = gauss_seidel(case14, tol=1e-10)
    assert np.max(np.abs(np.array([float(r["v_mag"]) for r in rows]) - vm)) < 1e-5
    assert np.max(np.abs(np.array([float(r["v_ang_deg"]) for r in rows]) - np.degrees(va))) < 1e-3


def test_qv_skips_slack_and_defaults_to_pq_buses(tmp_path, caplog):
    out = tmp_path / "o"
    assert main(["qv", "--case", FIVE, "--out", str(out), "--buses", "1,3"]) == EXIT_OK
    assert "slack" in caplog.text
    assert sorted(p.name for p in (out / "qv").glob("bus_*.csv")) == ["bus_3.csv"]
    out = tmp_path / "all"
    assert main(["qv", "--case", str(data_path("case14.m")), "--out", str(out)]) == EXIT_OK
    assert len(list((out / "qv").glob("bus_*.svg"))) == 9


def test_scatter_all_pq_ieee14(tmp_path):
    assert main(["qv", "--case", str(data_path("case14.m")), "--out", str(tmp_path)]) == EXIT_OK
    summary = read_table(tmp_path / "qv" / "summary.csv")
    assert len(summary) == 9 and all(float(r["v_nose"]) < 1.0 for r in summary)
    assert main(["scatter", "--summary", str(tmp_path / "qv" / "summary.csv"),
                 "--out", str(tmp_path)]) == EXIT_OK
    assert read_metadata((tmp_path / "scatter.svg").read_text())["points"] == "9"


def test_scatter_single_bus(tmp_path):
    case = tmp_path / "two_bus.yaml"
    case.write_text(TWO_BUS)
    assert main(["scatter", "--case", str(case), "--out", str(tmp_path)]) == EXIT_OK
    text = (tmp_path / "scatter.svg").read_text()
    assert read_metadata(text)["points"] == "1"
    assert len(ET.fromstring(text.encode()).findall(".//{http://www.w3.org/2000/svg}circle")) == 1


def test_scan_logs_one_line_per_case(tmp_path, capsys):
    assert main(["scan", "--case", FIVE, "--branches", "1", "--out", str(tmp_path)]) == EXIT_OK
    err = capsys.readouterr().err
    assert len([line for line in err.splitlines() if line.startswith("case ")]) == 2
    _, records = read_scan_csv((tmp_path / "scan" / "scan.csv").read_text())
    assert len(records) == 2
