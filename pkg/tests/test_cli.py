import json
from pathlib import Path

import pytest
import yaml

from asclt_lab import cli
from asclt_lab.experiments import KINDS, ConfigError, resolve

ZERO_ASCLT = {
    "name": "zero_asclt", "kind": "ASCLT", "system": {"kind": "doubling"},
    "observable": {"kind": "constant", "value": 0.0}, "renorm": {"d": 0.5}, "law": {"kind": "dirac0"},
    "N": 2000, "seeds": 2, "seed": 0, "accept": {"median_ks": {"max": 0.0}},
}
SMALL_CLT = {
    "name": "small_clt", "kind": "ClassicalCLT", "system": {"kind": "doubling"},
    "observable": {"kind": "fourier", "cos": [[1, 1.0]]}, "renorm": {"d": 0.5},
    "law": {"kind": "gaussian", "sigma2": 0.5}, "n": 1024, "replicas": 2000, "seed": 1,
    "accept": {"ks": {"max": 0.05}},
}


def write(tmp: Path, cfg: dict) -> Path:
    p = tmp / f"{cfg['name']}.yaml"
    p.write_text(yaml.safe_dump(cfg))
    return p


def test_zero_asclt_exit_zero(tmp_path):
    cfg = write(tmp_path, ZERO_ASCLT)
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "out")]) == 0
    rec = json.loads((tmp_path / "out" / "zero_asclt" / "result.json").read_text())
    assert rec["metrics"]["median_ks"] == 0.0 and rec["pass"]


def test_classical_preset_like(tmp_path, capsys):
    cfg = write(tmp_path, SMALL_CLT)
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "out")]) == 0
    assert "PASS" in capsys.readouterr().out


def test_failing_acceptance_exit_one(tmp_path):
    bad = dict(SMALL_CLT, name="strict", accept={"ks": {"max": 0.0}})
    assert cli.main(["run", str(write(tmp_path, bad)), "--out", str(tmp_path / "out")]) == 1


def test_malformed_law(tmp_path, capsys):
    bad = dict(SMALL_CLT, name="bad_law", law={"kind": "cauchy"})
    assert cli.main(["run", str(write(tmp_path, bad)), "--out", str(tmp_path / "out")]) == 2
    assert "law" in capsys.readouterr().err
    with pytest.raises(ConfigError) as e:
        resolve(bad)
    assert e.value.path == "law"


@pytest.mark.parametrize("patch,path", [
    ({"kind": "Nope"}, "kind"),
    ({"n": -3}, "n"),
    ({"replicas": None}, "replicas"),
    ({"bogus": 1}, "bogus"),
    ({"accept": {"ks": {"below": 1}}}, "accept.ks"),
    ({"system": {"kind": "tent"}}, "system"),
    ({"renorm": {"d": -1}}, "renorm"),
])
def test_config_errors_name_the_field(patch, path):
    with pytest.raises(ConfigError) as e:
        resolve({**SMALL_CLT, **patch})
    assert e.value.path == path


def test_stable_needs_condition_three():
    raw = dict(SMALL_CLT, kind="StableLimit", name="s")
    with pytest.raises(ConfigError) as e:
        resolve(raw)
    assert e.value.path == "observable"


def test_derived_law_recorded(tmp_path):
    raw = {
        "name": "stable_small", "kind": "StableLimit", "system": {"kind": "iid_uniform"},
        "observable": {"kind": "heavy_tail", "p": 1.5, "c1": 1.0, "c2": 0.0, "center": True},
        "renorm": {"d": 2 / 3}, "law": "derive-from-tails", "n": 200, "replicas": 200, "seed": 0,
        "params": {"cms_draws": 1000},
    }
    cfg = resolve(raw)
    assert cfg.derived["law"]["c"] == pytest.approx(2.5066282746310002)
    assert cli.main(["run", str(write(tmp_path, raw)), "--out", str(tmp_path / "o")]) == 0
    rec = json.loads((tmp_path / "o" / "stable_small" / "result.json").read_text())
    assert rec["config"]["derived"]["law"]["beta"] == 1.0


def test_determinism(tmp_path):
    cfg = write(tmp_path, SMALL_CLT)
    cli.main(["run", str(cfg), "--out", str(tmp_path / "a")])
    cli.main(["run", str(cfg), "--out", str(tmp_path / "b"), "--threads", "3"])
    a = (tmp_path / "a" / "small_clt" / "replicas.csv").read_bytes()
    b = (tmp_path / "b" / "small_clt" / "replicas.csv").read_bytes()
    assert a == b
    assert a.startswith(b"# config_hash=")


def test_config_hash_stable():
    assert resolve(SMALL_CLT).config_hash() == resolve(dict(SMALL_CLT)).config_hash()
    assert resolve(SMALL_CLT).config_hash() != resolve(dict(SMALL_CLT, seed=2)).config_hash()


def test_report_empty(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    csv_path = tmp_path / "r.csv"
    assert cli.main(["report", str(tmp_path / "empty"), "--csv", str(csv_path)]) == 0
    lines = csv_path.read_text().splitlines()
    assert lines == [",".join(cli.REPORT_HEADER)]


def test_report_pass_and_mixed(tmp_path, capsys):
    out = tmp_path / "out"
    cli.main(["run", str(write(tmp_path, SMALL_CLT)), "--out", str(out)])
    capsys.readouterr()
    assert cli.main(["report", str(out)]) == 0
    text = capsys.readouterr().out
    assert text.count("PASS") == 1
    cli.main(["run", str(write(tmp_path, dict(SMALL_CLT, name="strict", accept={"ks": {"max": 0.0}}))),
              "--out", str(out)])
    assert cli.main(["report", str(out)]) == 1


def test_report_hash_mismatch(tmp_path, capsys):
    out = tmp_path / "out"
    cli.main(["run", str(write(tmp_path, SMALL_CLT)), "--out", str(out)])
    table = out / "small_clt" / "replicas.csv"
    lines = table.read_text().splitlines()
    lines[0] = "# config_hash=0000000000000000"
    table.write_text("\n".join(lines) + "\n")
    assert cli.main(["report", str(out)]) == 2
    assert "different config" in capsys.readouterr().err


def test_report_missing(tmp_path):
    assert cli.main(["report", str(tmp_path / "nowhere")]) == 2
    out = tmp_path / "out"
    cli.main(["run", str(write(tmp_path, SMALL_CLT)), "--out", str(out)])
    (out / "small_clt" / "replicas.csv").unlink()
    assert cli.main(["report", str(out)]) == 2


def test_threads_env(monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "4")
    assert cli.resolve_threads(None) == 4
    assert cli.resolve_threads(2) == 2
    monkeypatch.setenv(cli.THREADS_ENV, "many")
    with pytest.raises(ConfigError):
        cli.resolve_threads(None)


def test_presets_cover_all_kinds(tmp_path, capsys):
    assert cli.main(["presets", "--copy", str(tmp_path)]) == 0
    files = sorted(tmp_path.glob("*.yaml"))
    assert len(files) == 20
    kinds = set()
    for f in files:
        cfg = cli.load_config(f)
        kinds.add(cfg.kind)
        assert cfg.accept, f"{f.name} has no acceptance rule"
    assert kinds == set(KINDS)
