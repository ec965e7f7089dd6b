import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import DEMO_PRICES
from trendsynth.cli import UsageError, main, read_config_file
from trendsynth.ingest import load_price_csv, load_returns_csv


def _files(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


def _pipeline(out, *extra):
    return main(["pipeline", str(DEMO_PRICES), "--out", str(out), "--target-days", "500",
                 "--seed", "4", *extra])


def test_help_and_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert capsys.readouterr().out.startswith("trendsynth ")


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["analyze", "x.csv"],
    ["analyze", "x.csv", "--out", "o", "--theta", "abc"],
    ["simulate", "lib.json", "--out", "o", "--threads", "0"],
])
def test_usage_errors_exit_1(argv, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 1


def test_invalid_config_value_exit_1(tmp_path, capsys):
    code = main(["analyze", str(DEMO_PRICES), "--out", str(tmp_path), "--theta", "-0.1"])
    assert code == 1
    assert "theta" in capsys.readouterr().err


def test_bad_csv_exit_2_with_location(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("day,A,B\nd0,1,2\nd1,oops,3\nd2,2,4\n")
    assert main(["analyze", str(bad), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "row 3" in err and "'A'" in err


def test_missing_inputs_exit_2(tmp_path, capsys):
    assert main(["analyze", str(tmp_path / "none.csv"), "--out", str(tmp_path)]) == 2
    assert main(["simulate", str(tmp_path / "lib.json"), "--out", str(tmp_path)]) == 2
    assert "library file not found" in capsys.readouterr().err


def test_zero_price_exit_2(tmp_path, capsys):
    bad = tmp_path / "zero.csv"
    bad.write_text("day,A\nd0,1\nd1,0\nd2,2\n")
    assert main(["ingest", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "non-positive" in capsys.readouterr().err
    assert main(["ingest", str(bad), "--out", str(tmp_path / "o"), "--errors", "reject"]) == 2


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# demo\ntheta = 0.03\nL = 10\ntarget_days = 300\nseed = 9\n")
    assert main(["analyze", str(DEMO_PRICES), "--out", str(tmp_path / "a"), "--config", str(cfg),
                 "--theta", "0.04"]) == 0
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["config"]["theta"] == 0.04
    assert manifest["config"]["L"] == 10 and manifest["seed"] == 9
    lib = json.loads((tmp_path / "a" / "library.json").read_text())
    assert lib["theta"] == 0.04 and lib["L"] == 10


def test_config_file_errors(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["analyze", str(DEMO_PRICES), "--out", str(tmp_path), "--config", str(cfg)]) == 1
    assert "colour" in capsys.readouterr().err
    cfg.write_text("theta: 0.1\n")
    with pytest.raises(UsageError):
        read_config_file(cfg)


def test_analyze_simulate_round(tmp_path):
    a, s = tmp_path / "a", tmp_path / "s"
    assert main(["analyze", str(DEMO_PRICES), "--out", str(a)]) == 0
    assert {"library.json", "index_trends.csv", "manifest.json"} <= set(_files(a))
    assert main(["simulate", str(a / "library.json"), "--out", str(s), "--target-days", "321",
                 "--seed", "2"]) == 0
    panel = load_returns_csv(s / "scenario.csv")
    assert panel.returns.shape == (3, 321)
    side = json.loads((s / "scenario.json").read_text())
    assert side["seed"] == 2 and side["target_days"] == 321 and side["trend_sequence"]
    manifest = json.loads((s / "manifest.json").read_text())
    assert manifest["outputs"].keys() >= {"scenario.csv", "scenario.json"}
    assert manifest["inputs"][0]["sha256"] == side["library_sha256"]


def test_simulate_is_deterministic_and_thread_free(tmp_path):
    assert main(["analyze", str(DEMO_PRICES), "--out", str(tmp_path / "a")]) == 0
    lib = str(tmp_path / "a" / "library.json")
    for name, threads in (("s1", "1"), ("s2", "1"), ("s3", "3")):
        assert main(["simulate", lib, "--out", str(tmp_path / name), "--target-days", "800",
                     "--threads", threads]) == 0
    assert _files(tmp_path / "s1") == _files(tmp_path / "s2") == _files(tmp_path / "s3")


def test_simulate_sequence_file(tmp_path, capsys):
    assert main(["analyze", str(DEMO_PRICES), "--out", str(tmp_path / "a")]) == 0
    lib = json.loads((tmp_path / "a" / "library.json").read_text())
    signs = [t["sign"] for t in lib["trends"]]
    up, down = signs.index("upward"), signs.index("downward")
    seq = tmp_path / "seq.txt"
    seq.write_text(f"# hand-made\n{up}, {down}\n{up}\n")
    days = 10
    assert main(["simulate", str(tmp_path / "a" / "library.json"), "--out", str(tmp_path / "s"),
                 "--sequence", str(seq), "--target-days", str(days)]) == 0
    side = json.loads((tmp_path / "s" / "scenario.json").read_text())
    assert side["trend_sequence"] == [up, down, up]
    seq.write_text(f"{up} {up}\n")
    assert main(["simulate", str(tmp_path / "a" / "library.json"), "--out", str(tmp_path / "t"),
                 "--sequence", str(seq), "--target-days", str(days)]) == 2
    seq.write_text("first\n")
    assert main(["simulate", str(tmp_path / "a" / "library.json"), "--out", str(tmp_path / "t"),
                 "--sequence", str(seq)]) == 2


def test_pipeline_layout_and_reruns(tmp_path):
    assert _pipeline(tmp_path / "p1", "--extra", "4", "--ratio-cap", "auto") == 0
    assert _pipeline(tmp_path / "p2", "--extra", "4", "--ratio-cap", "auto", "-v") == 0
    files = _files(tmp_path / "p1")
    assert files == _files(tmp_path / "p2")
    for name in ("analyze/library.json", "simulate/scenario.csv", "expand/expanded.csv",
                 "validate/reference/report.json", "validate/scenario/report.json",
                 "validate/compare.json", "manifest.json"):
        assert name in files, name
    manifest = json.loads(files["manifest.json"])
    assert manifest["shapes"] == {"input": [3, 250], "scenario": [3, 500], "final": [7, 500]}
    assert set(manifest["versions"]) >= {"python", "numpy"}


def test_pipeline_seed_changes_output(tmp_path):
    assert _pipeline(tmp_path / "a", "--skip-validate") == 0
    assert main(["pipeline", str(DEMO_PRICES), "--out", str(tmp_path / "b"), "--target-days",
                 "500", "--seed", "5", "--skip-validate"]) == 0
    a = (tmp_path / "a" / "simulate" / "scenario.csv").read_bytes()
    b = (tmp_path / "b" / "simulate" / "scenario.csv").read_bytes()
    assert a != b
    assert not (tmp_path / "a" / "validate").exists()
    assert not (tmp_path / "a" / "expand").exists()


def test_validate_and_compare(tmp_path):
    assert main(["validate", str(DEMO_PRICES), "--out", str(tmp_path / "v")]) == 0
    report = tmp_path / "v" / "report.json"
    assert main(["compare", str(report), str(report), "--out", str(tmp_path / "c")]) == 0
    cmp = json.loads((tmp_path / "c" / "compare.json").read_text())
    assert cmp["correlation_mean_abs_delta"] == 0.0
    junk = tmp_path / "junk.json"
    junk.write_text('{"a": 1}')
    assert main(["compare", str(report), str(junk), "--out", str(tmp_path / "c")]) == 2


def test_expand_command(tmp_path):
    src = tmp_path / "r"
    assert main(["ingest", str(DEMO_PRICES), "--out", str(src)]) == 0
    assert main(["expand", str(src / "returns.csv"), "--out", str(tmp_path / "e"),
                 "--extra", "3", "--drop-originals", "--ratio-cap", "none"]) == 0
    out = load_returns_csv(tmp_path / "e" / "expanded.csv")
    assert out.assets == ["synth-0001", "synth-0002", "synth-0003"]
    manifest = json.loads((tmp_path / "e" / "manifest.json").read_text())
    assert manifest["expansion"]["ratio_cap"] is None


@pytest.mark.parametrize("model", ["gbm", "garch-gaussian", "garch-t"])
def test_baseline(tmp_path, model):
    src = tmp_path / "fx"
    assert main(["make-fixture", "--out", str(src), "--assets", "2", "--days", "1500"]) == 0
    out = tmp_path / model
    assert main(["baseline", str(src / "prices.csv"), "--out", str(out), "--model", model,
                 "--days", "300", "--seed", "1"]) == 0
    params = json.loads((out / "params.json").read_text())
    assert params["model"] == model
    sim = load_returns_csv(out / "baseline.csv")
    assert sim.returns.shape == (1, 300) and np.all(np.isfinite(sim.returns))


def test_baseline_unknown_column(tmp_path, capsys):
    assert main(["baseline", str(DEMO_PRICES), "--out", str(tmp_path), "--fit", "nope"]) == 2
    assert "nope" in capsys.readouterr().err


def test_make_fixture(tmp_path):
    assert main(["make-fixture", "--out", str(tmp_path), "--assets", "4", "--days", "300",
                 "--closed-days", "3", "--seed", "8"]) == 0
    p = load_price_csv(tmp_path / "prices.csv")
    assert p.prices.shape == (4, 304)
    first = (tmp_path / "prices.csv").read_bytes()
    assert main(["make-fixture", "--out", str(tmp_path), "--assets", "4", "--days", "300",
                 "--closed-days", "3", "--seed", "8"]) == 0
    assert (tmp_path / "prices.csv").read_bytes() == first


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "trendsynth.cli", "make-fixture", "--out",
                          str(tmp_path), "--assets", "2", "--days", "50"],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    res = subprocess.run([sys.executable, "-m", "trendsynth.cli", "analyze"],
                         capture_output=True, text=True)
    assert res.returncode == 1 and "usage" in res.stderr
