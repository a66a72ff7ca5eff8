import json
import subprocess
import sys

import numpy as np
import pytest

from evidential import cli, demos
from evidential import losses as ls
from evidential import regression as rg


def _write_cfg(path, **kw):
    cfg = dict(dataset={"name": "clusters", "n_per_class": 15, "test_frac": 0.2,
                        "ood_probes": {"centers": [[5, 0]], "n": 10, "seed": 2}},
               model={"widths": [2, 8, 3], "hidden": "gauss"}, loss="uce", lr=1e-2, epochs=5)
    cfg.update(kw)
    path.write_text(json.dumps(cfg))
    return path


def test_unknown_verb_and_flag(capsys):
    assert cli.run(["fly"]) == 1
    assert cli.run(["losses", "--colour", "red"]) == 1
    assert "usage" in capsys.readouterr().err


def test_help_exits_zero(capsys):
    assert cli.run(["--help"]) == 0


def test_negative_seed_rejected():
    assert cli.run(["losses", "--seed", "-1"]) == 1


def test_losses_listing(capsys):
    assert cli.run(["losses"]) == 0
    lines = capsys.readouterr().out.split()
    assert lines == ls.registry_keys() + list(rg.REGRESSION_LOSSES)


def test_missing_loss_key_names_it(tmp_path, capsys):
    cfg = _write_cfg(tmp_path / "run.json", loss="no_such_loss")
    assert cli.run(["train", "--config", str(cfg)]) == 1
    assert "no_such_loss" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert cli.run(["train", "--config", str(tmp_path / "absent.json")]) == 1
    assert cli.run(["train"]) == 1


def test_train_then_eval(tmp_path):
    cfg = _write_cfg(tmp_path / "run.json")
    out = tmp_path / "out"
    assert cli.run(["train", "--config", str(cfg), "--out", str(out)]) == 0
    assert {p.name for p in out.iterdir()} == {"model.json", "config.json", "history.csv"}
    assert len((out / "history.csv").read_text().splitlines()) == 6
    ev = tmp_path / "ev"
    assert cli.run(["eval", "--config", str(cfg), "--model", str(out / "model.json"), "--out", str(ev)]) == 0
    rep = json.loads((ev / "report.json").read_text())
    assert set(rep) >= {"accuracy", "ood_auroc", "ood_aupr", "misclassification_auroc", "ece"}
    assert (ev / "uncertainty.csv").read_text().startswith("row,split,label,pred,ee,mi,vacuity,precision")
    ev2 = tmp_path / "ev2"
    assert cli.run(["eval", "--config", str(cfg), "--out", str(ev2)]) == 0
    assert (ev2 / "report.json").read_bytes() == (ev / "report.json").read_bytes()


def test_eval_and_train_deterministic(tmp_path):
    cfg = _write_cfg(tmp_path / "run.json")
    for d in ("a", "b"):
        assert cli.run(["train", "--config", str(cfg), "--out", str(tmp_path / d), "--seed", "4"]) == 0
    for name in ("model.json", "config.json", "history.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_simplex_verb(tmp_path, capsys):
    assert cli.run(["simplex", "--alphas", "1,1,1", "--n", "4"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "a,b,c,density" and len(lines) == 17
    assert all(float(l.split(",")[3]) == pytest.approx(2.0) for l in lines[1:])
    assert cli.run(["simplex", "--alphas", "1,1"]) == 1
    assert cli.run(["simplex", "--alphas", "1,x,2"]) == 1
    assert cli.run(["simplex"]) == 1


def test_simplex_from_model(tmp_path):
    cfg = _write_cfg(tmp_path / "run.json")
    assert cli.run(["train", "--config", str(cfg), "--out", str(tmp_path / "m")]) == 0
    out = tmp_path / "s"
    assert cli.run(["simplex", "--model", str(tmp_path / "m" / "model.json"), "--x", "0.5,0.5",
                    "--n", "5", "--out", str(out)]) == 0
    assert (out / "simplex.csv").exists()


@pytest.mark.parametrize("name", ["iris", "clusters", "spirals", "poly"])
def test_datasets_verb(name, tmp_path):
    out = tmp_path / name
    assert cli.run(["datasets", "--name", name, "--seed", "1", "--out", str(out)]) == 0
    text = (out / f"{name}.csv").read_text()
    assert text.splitlines()[0].endswith("label,split")
    assert cli.run(["datasets", "--name", name, "--seed", "1", "--out", str(tmp_path / "again")]) == 0
    assert (tmp_path / "again" / f"{name}.csv").read_text() == text


def test_datasets_unknown():
    assert cli.run(["datasets", "--name", "mnist"]) == 1


def test_oracle_verb(tmp_path):
    out = tmp_path / "o"
    assert cli.run(["oracle", "--suite", "dirichlet", "--n", "2000", "--cases", "2", "--seed", "7",
                    "--out", str(out)]) == 0
    rows = (out / "oracle.csv").read_text().splitlines()
    assert len(rows) == 13 and all(r.endswith("true") for r in rows[1:])
    assert cli.run(["oracle", "--suite", "bogus", "--n", "2000"]) == 1
    assert cli.run(["oracle", "--n", "10"]) == 1


def test_oracle_failure_exits_two(monkeypatch, tmp_path):
    from evidential import oracle

    bad = oracle.OracleRow("fake", 0.0, 1.0, 0.01, 100.0, False)
    monkeypatch.setattr(oracle, "run_suite", lambda *a, **k: [bad])
    assert cli.run(["oracle", "--out", str(tmp_path)]) == 2


def test_runtime_failure_exits_two(monkeypatch):
    def boom(args):
        raise RuntimeError("disk on fire")

    monkeypatch.setitem(cli.COMMANDS, "losses", boom)
    assert cli.run(["losses"]) == 2


def test_demo_iris_outputs(tmp_path):
    out = tmp_path / "demo"
    assert cli.run(["demo-iris", "--seed", "0", "--out", str(out)]) == 0
    names = {p.name for p in out.iterdir()}
    assert names == {"probes.csv", "grid.csv", "model.json", "simplex_overlap.csv", "simplex_between.csv",
                     "simplex_far.csv"}
    probes = (out / "probes.csv").read_text().splitlines()
    assert probes[0] == ",".join(demos.PROBE_COLUMNS)
    rows = {r.split(",")[0]: [float(v) for v in r.split(",")[1:]] for r in probes[1:]}
    mi = {k: v[1] for k, v in rows.items()}
    assert mi["far"] > mi["overlap"] and mi["far"] > mi["between"]
    ee = {k: v[0] for k, v in rows.items()}
    assert ee["overlap"] > ee["between"]
    grid = np.loadtxt(out / "grid.csv", delimiter=",", skiprows=1)
    assert grid.shape == (33 * 25, 6)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "evidential.cli", "losses"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.split()[0] == "uce"
