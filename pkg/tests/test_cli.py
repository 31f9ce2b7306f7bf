import json
import re
import subprocess
import sys
from argparse import Namespace
from pathlib import Path

import pytest

from tracefault.cli import RunConfig, UsageError, main, parse_k_range, resolve_config

ROOT = Path(__file__).resolve().parents[1]

SPEC = """
seed = 5
n_faultfree = 8
n_per_fault = 6

[random]
n_modes = 3
edits_per_mode = [4, 8]
backbone_length = 120
noisy_fraction = 0.2
swap_prob = 0.1
optional_density = 0.5
optional_event_prob = 0.2
idle_event_prob = 0.05
"""


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for var in ("TF_SEED", "TF_WORKERS", "TF_D", "TF_EPS_SPURIOUS", "TF_EPS_MISSING", "TF_REPRESENTATION", "TF_K_RANGE", "TF_DETERMINISTIC"):
        monkeypatch.delenv(var, raising=False)


@pytest.fixture
def campaign(tmp_path):
    spec = tmp_path / "spec.toml"
    spec.write_text(SPEC)
    assert main(["generate", str(spec), "--out", str(tmp_path / "camp")]) == 0
    return tmp_path / "camp"


def tree_bytes(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_generate_layout(campaign):
    for sub in ("faultfree", "faulty", "idle"):
        assert (campaign / sub).is_dir()
    assert (campaign / "ground_truth.json").is_file()


def test_generate_missing_spec(tmp_path, capsys):
    assert main(["generate", str(tmp_path / "nope.toml")]) == 2
    assert "spec not found" in capsys.readouterr().err


def test_generate_default_out_and_seed_env(tmp_path, monkeypatch):
    spec = tmp_path / "demo.toml"
    spec.write_text(SPEC)
    monkeypatch.chdir(tmp_path)
    assert main(["generate", str(spec)]) == 0
    assert json.loads((tmp_path / "demo" / "ground_truth.json").read_text())["seed"] == 5
    monkeypatch.setenv("TF_SEED", "8")
    assert main(["generate", str(spec), "--out", "e"]) == 0
    assert json.loads((tmp_path / "e" / "ground_truth.json").read_text())["seed"] == 8
    assert main(["generate", str(spec), "--out", "f", "--seed", "9"]) == 0
    assert json.loads((tmp_path / "f" / "ground_truth.json").read_text())["seed"] == 9


def test_invalid_spec_is_usage_error(tmp_path):
    spec = tmp_path / "bad.toml"
    spec.write_text("[random]\nnoise = 'loud'\n")
    assert main(["generate", str(spec)]) == 2


def test_full_pipeline(campaign, capsys):
    assert main(["analyze", str(campaign)]) == 0
    reports = campaign / "reports"
    summary = json.loads((reports / "summary.json").read_text())
    assert summary["n_experiments"] == 18
    assert set(summary["metrics"]) == {"lcs", "vmm"}
    assert "generated_at" in summary and "elapsed_s" in summary
    assert len(list((reports / "experiments").glob("*.json"))) == 18

    assert main(["cluster", str(reports), "--k-range", "2..6"]) == 0
    out = capsys.readouterr().out
    assert "K* = 3" in out and "purity = 1.0000" in out
    doc = json.loads((reports / "cluster" / "cluster.json").read_text())
    assert doc["K"] == 3 and len(doc["k_curve"]) == 5 and doc["selected"]
    assert len(doc["medoids"]) == 3 and len(doc["clusters"]) == 3
    assert doc["purity"]["overall"] == 1.0
    index = (reports / "cluster" / "index.html").read_text()
    pages = list((reports / "cluster" / "timeline").glob("*.html"))
    assert len(pages) == 18
    for html in [index, pages[0].read_text()]:
        assert not re.search(r"(src|href)=\"(https?:)?//", html)
        assert "<script" not in html
    assert "<svg" in index

    assert main(["metrics", str(reports), str(campaign / "ground_truth.json")]) == 0
    metrics = json.loads(capsys.readouterr().out)
    assert metrics == summary["metrics"]


def test_forced_k(campaign, capsys):
    main(["analyze", str(campaign)])
    assert main(["cluster", str(campaign / "reports"), "--k-range", "3..3", "--representation", "lcs"]) == 0
    doc = json.loads((campaign / "reports" / "cluster" / "cluster.json").read_text())
    assert doc["K"] == 3 and not doc["selected"] and len(doc["k_curve"]) == 1
    assert doc["representation"] == "lcs"


def test_lcs_endpoint_summary(campaign, tmp_path):
    main(["analyze", str(campaign), "--out", str(tmp_path / "vmm")])
    main(["analyze", str(campaign), "--eps-spurious", "1.0", "--eps-missing", "0.0", "--out", str(tmp_path / "lcs")])
    vmm = json.loads((tmp_path / "vmm" / "summary.json").read_text())
    lcs = json.loads((tmp_path / "lcs" / "summary.json").read_text())
    assert lcs["metrics"]["vmm"] == lcs["metrics"]["lcs"] == vmm["metrics"]["lcs"]
    t = lcs["totals"]
    assert t["filtered_spurious"] == t["filtered_missing"] == 0
    v = vmm["totals"]
    assert t["spurious"] == v["spurious"] + v["filtered_spurious"]
    assert t["missing"] == v["missing"] + v["filtered_missing"]


def test_deterministic_rerun_is_byte_identical(campaign, tmp_path):
    trees = []
    for run in ("one", "two"):
        out = tmp_path / run
        assert main(["--deterministic", "analyze", str(campaign), "--out", str(out), "--workers", "3"]) == 0
        assert main(["cluster", str(out), "--seed", "4"]) == 0
        trees.append(tree_bytes(out))
    assert trees[0] == trees[1]
    summary = json.loads(trees[0]["summary.json"])
    assert "generated_at" not in summary and "elapsed_s" not in summary


def test_analysis_errors_exit_1(tmp_path, capsys):
    assert main(["analyze", str(tmp_path / "missing")]) == 1
    (tmp_path / "c" / "faulty").mkdir(parents=True)
    (tmp_path / "c" / "faultfree").mkdir()
    line = '{"ts_us": 1, "sender": "s", "api": "a", "status": "200", "dur_us": 1}\n'
    (tmp_path / "c" / "faulty" / "x.jsonl").write_text(line)
    (tmp_path / "c" / "faultfree" / "f.jsonl").write_text(line)
    assert main(["analyze", str(tmp_path / "c")]) == 1
    assert "at least 2 fault-free" in capsys.readouterr().err
    assert main(["cluster", str(tmp_path / "c")]) == 1


def test_usage_errors_exit_2(campaign, monkeypatch):
    with pytest.raises(SystemExit) as exc:
        main(["cluster", str(campaign), "--k-range", "5..2"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    assert main(["analyze", str(campaign), "--eps-spurious", "2"]) == 2
    monkeypatch.setenv("TF_WORKERS", "many")
    assert main(["analyze", str(campaign)]) == 2


def test_config_precedence():
    env = {"TF_WORKERS": "3", "TF_D": "4", "TF_K_RANGE": "2..5", "TF_DETERMINISTIC": "1", "TF_REPRESENTATION": "seq"}
    cfg = resolve_config(Namespace(workers=None, D=2), env)
    assert (cfg.workers, cfg.D, cfg.k_range, cfg.deterministic, cfg.representation) == (3, 2, (2, 5), True, "seq")
    assert resolve_config(Namespace(workers=7), env).workers == 7
    assert resolve_config(Namespace(), {}) == RunConfig()
    assert RunConfig() == RunConfig(5, 0.20, 0.80, "vmm", (2, 20), 0, 1, False)
    with pytest.raises(UsageError):
        resolve_config(Namespace(), {"TF_D": "0"})


def test_parse_k_range():
    assert parse_k_range("2..20") == (2, 20)
    for bad in ("2-20", "1..4", "5..3", "x..y"):
        with pytest.raises(UsageError):
            parse_k_range(bad)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "tracefault", "--version"], capture_output=True, text=True, cwd=ROOT)
    assert res.returncode == 0 and "tracefault" in res.stdout
