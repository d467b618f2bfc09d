import json
from pathlib import Path

import numpy as np
import pytest
import yaml

import qconnlab.experiments as experiments
from qconnlab.cli import EXIT_CONFIG, EXIT_OK, EXIT_TOLERANCE, main, run_config
from qconnlab.config import EXPERIMENTS, load_config, parse_hbar, resolve, validate_config
from qconnlab.errors import ConfigInvalid, FileUnreadable

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL = {"experiment": "axioms", "group": "SU2", "dimension": 2, "seed": 0, "samples": 200}


def kinds(issues):
    return sorted((i.kind, i.key) for i in issues)


def write(tmp_path, data, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(json.dumps(data) if name.endswith(".json") else yaml.safe_dump(data))
    return p


# parsing and validation


@pytest.mark.parametrize("v,expect", [("1/4", 0.25), (0.5, 0.5), ("0.125", 0.125), (1, 1.0)])
def test_parse_hbar(v, expect):
    assert parse_hbar(v) == expect


@pytest.mark.parametrize("v", ["1/0", "abc", 0, -0.5, 2, True])
def test_parse_hbar_rejects(v):
    with pytest.raises(ValueError):
        parse_hbar(v)


def test_shipped_configs_are_valid():
    paths = sorted(CONFIGS.glob("*.yaml")) + sorted(CONFIGS.glob("*.json"))
    assert len(paths) >= 10
    seen = set()
    for p in paths:
        raw = load_config(p)
        assert validate_config(raw) == [], p
        seen.add(raw["experiment"])
    assert seen == set(EXPERIMENTS)


def test_missing_required_key():
    raw = {k: v for k, v in SMALL.items() if k != "samples"}
    assert kinds(validate_config(raw)) == [("missing-key", "samples")]


def test_unknown_key_with_suggestion():
    raw = {"experiment": "dirac-sweep", "group": "U1", "dimension": 1, "seed": 0, "grid": 64, "bnd": 1, "hbars": ["1/8"]}
    issues = validate_config(raw)
    assert ("unknown-key", "bnd") in kinds(issues) and ("missing-key", "band") in kinds(issues)
    unk = next(i for i in issues if i.key == "bnd")
    assert "band" in unk.suggestions


def test_inadmissible_hbar():
    raw = {"experiment": "dirac-sweep", "group": "U1", "dimension": 1, "seed": 0, "grid": 16, "band": 1, "hbars": [0.3, "1/16", "1/4"]}
    issues = validate_config(raw)
    assert [i.kind for i in issues] == ["inadmissible-hbar", "inadmissible-hbar"]
    assert "0.3" in issues[0].message and "1/16" in issues[1].message


def test_unknown_experiment_lists_close_matches_first():
    issues = validate_config({"experiment": "glue-chek"})
    assert issues[0].kind == "unknown-experiment"
    assert issues[0].suggestions[0] == "glue-check"
    assert set(issues[0].suggestions) == set(EXPERIMENTS)


def test_bad_values_reported():
    raw = dict(SMALL, dimension=3, seed=-1, samples="many")
    assert kinds(validate_config(raw)) == [("bad-value", "dimension"), ("bad-value", "samples"), ("bad-value", "seed")]


def test_embed_smear_cross_checks():
    raw = {"experiment": "embed-smear", "group": "SU2", "dimension": 1, "seed": 0, "grid": 8, "group_grid": 16, "width": 0.1, "hbar": 0.5}
    assert kinds(validate_config(raw)) == [("bad-value", "group"), ("bad-value", "width")]


def test_resolve_fills_defaults_and_raises():
    cfg = resolve(load_config(CONFIGS / "glue-check-u1.yaml"))
    assert cfg["band"] == 1 and cfg["steps"] == 256 and cfg["hbars"][1] == 0.25
    with pytest.raises(ConfigInvalid):
        resolve({"experiment": "axioms"})


def test_load_config_errors(tmp_path):
    with pytest.raises(FileUnreadable):
        load_config(tmp_path / "nope.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("- a\n- b\n")
    with pytest.raises(ConfigInvalid):
        load_config(bad)
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    with pytest.raises(ConfigInvalid):
        load_config(broken)


def test_json_and_yaml_configs_equivalent(tmp_path):
    assert load_config(write(tmp_path, SMALL, "a.json")) == load_config(write(tmp_path, SMALL, "a.yaml"))


# CLI


def test_run_writes_artifacts(tmp_path, capsys):
    cfg = write(tmp_path, SMALL)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--output", str(out)]) == EXIT_OK
    assert "PASS" in capsys.readouterr().out
    header = (out / "results.csv").read_text().splitlines()[0]
    assert header == ",".join(EXPERIMENTS["axioms"].columns)
    rep = json.loads((out / "report.json").read_text())
    assert rep["passed"] and rep["seed"] == 0 and rep["experiment"] == "axioms"
    assert (out / "plot.svg").read_text().startswith("<svg")


def test_run_is_byte_deterministic(tmp_path):
    cfg = write(tmp_path, SMALL)
    for d in ("a", "b"):
        assert main(["run", "--quiet", "--config", str(cfg), "--output", str(tmp_path / d)]) == EXIT_OK
    for f in ("results.csv", "plot.svg"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_seed_override_changes_results(tmp_path):
    cfg = write(tmp_path, SMALL)
    main(["run", "--quiet", "--config", str(cfg), "--output", str(tmp_path / "a")])
    main(["run", "--quiet", "--config", str(cfg), "--output", str(tmp_path / "b"), "--seed", "5"])
    assert json.loads((tmp_path / "b" / "report.json").read_text())["seed"] == 5
    assert (tmp_path / "a" / "results.csv").read_bytes() != (tmp_path / "b" / "results.csv").read_bytes()


def test_output_dir_from_config(tmp_path):
    status, _ = run_config(dict(SMALL, output_dir=str(tmp_path / "via_cfg")))
    assert status == EXIT_OK and (tmp_path / "via_cfg" / "results.csv").exists()


def test_tolerance_failure_exit_code(tmp_path, monkeypatch):
    monkeypatch.setattr(experiments, "AXIOM_TOL", -1.0)
    assert main(["run", "--quiet", "--config", str(write(tmp_path, SMALL)), "--output", str(tmp_path / "o")]) == EXIT_TOLERANCE
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["passed"] is False and all(not c["passed"] for c in rep["checks"])


def test_config_error_exit_codes(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG
    bad = write(tmp_path, {"experiment": "axioms"})
    assert main(["run", "--config", str(bad), "--output", str(tmp_path / "o")]) == EXIT_CONFIG
    assert not (tmp_path / "o").exists()
    assert "config error" in capsys.readouterr().err


def test_validate_verb(tmp_path, capsys):
    good = write(tmp_path, SMALL, "good.yaml")
    assert main(["validate", "--config", str(good)]) == EXIT_OK
    bad = write(tmp_path, dict(SMALL, smaples=3), "bad.yaml")
    assert main(["validate", "--json", "--config", str(bad)]) == EXIT_CONFIG
    out = capsys.readouterr().out
    issues = json.loads(out[out.index("[") :])
    assert {"kind": "unknown-key", "key": "smaples", "message": "not a field of axioms", "suggestions": ["samples"]} in issues


def test_list_experiments(capsys):
    assert main(["list-experiments", "--quiet"]) == EXIT_OK
    assert capsys.readouterr().out.split() == list(EXPERIMENTS)


# artifact writers


def test_svg_rendering_is_deterministic_and_skips_nonpositive():
    from qconnlab.artifacts import render_svg
    from qconnlab.experiments import Plot

    p = Plot("t", "x", "y", {"a": ([0.5, 0.25, 0.125], [1e-2, 2.5e-3, 0.0]), "b & c": ([0.5], [-1.0])})
    s = render_svg(p)
    assert s == render_svg(p)
    assert s.count("<polyline") == 1 and s.count("<circle") == 2
    assert "b &amp; c" not in s  # series without positive points are dropped
    assert "no log-log data" in render_svg(None)


def test_csv_cells_round_trip_floats(tmp_path):
    from qconnlab.artifacts import write_csv
    from qconnlab.experiments import Outcome

    v = 0.1 + 0.2
    path = write_csv(Outcome(("name", "value", "flag", "n"), [["x", v, True, 3]], []), tmp_path / "r.csv")
    row = path.read_text().splitlines()[1].split(",")
    assert float(row[1]) == v and row[2:] == ["true", "3"]


def test_report_json_has_no_non_finite_numbers(tmp_path):
    from qconnlab.artifacts import write_report

    p = write_report({"a": float("nan"), "b": np.float64(1.5), "c": np.arange(2)}, tmp_path / "r.json")
    assert json.loads(p.read_text()) == {"a": None, "b": 1.5, "c": [0, 1]}
