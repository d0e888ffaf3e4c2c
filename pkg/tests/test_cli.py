import hashlib
import json

import pytest

from trifuse.cli import build_id, main

CONFIG = """
[dims]
v = 3
q = 3
a = 3
d_v = 6
d_q = 6
d_a = 6
d_z = 8
R = 2

[data]
task = {task}
n_train = 120
n_test = 40
seed = 0

[training]
step_size = 0.5
batch = 32
epochs = 2
seed = 0
normalize = softmax
{extra}
[paths]
data = data
"""


def _write(tmp_path, task="mc", extra=""):
    p = tmp_path / f"{task}.ini"
    p.write_text(CONFIG.format(task=task, extra=extra))
    return str(p)


def _digest(folder):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(folder.iterdir())}


@pytest.fixture
def ffoe_run(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = _write(tmp_path, "ffoe", "alpha = 0.5\ntemperature = 3\n")
    assert main(["gen-data", "--config", cfg, "--out", "data"]) == 0
    assert main(["train-teacher", "--config", cfg, "--out", "teacher"]) == 0
    return tmp_path, cfg


def test_verify_exit_codes_and_report(tmp_path, capsys):
    assert main(["verify", "--cases", "5", "--out", str(tmp_path / "v")]) == 0
    report = json.loads((tmp_path / "v" / "verify.json").read_text())
    assert report["passed"] and all("max_rel_error" in i for i in report["identities"])
    assert main(["verify", "--cases", "2", "--inject-error", "1e-6"]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_params_table(tmp_path, capsys):
    assert main(["params", "--n", "1", "1", "1", "--d", "2", "2", "2", "--d-z", "2", "--R", "1",
                 "--out", str(tmp_path)]) == 0
    rows = json.loads((tmp_path / "params.json").read_text())["rows"]
    assert rows[0]["decomposed"] == 32 and rows[0]["full"] == 16
    assert main(["params", "--d", "8", "8", "8", "--R", "1", "2"]) == 0
    out = capsys.readouterr().out
    assert "core" in out.lower() or "cores" in out
    assert main(["params", "--d", "6", "4", "4", "--R", "4"]) == 2


def test_params_quoted_ratio(capsys):
    assert main(["params", "--quoted", "2199.02e9", "33.69e6"]) == 0
    assert "65272.19" in capsys.readouterr().out


def test_full_ffoe_pipeline(ffoe_run):
    tmp, cfg = ffoe_run
    assert main(["train-student", "--config", cfg, "--out", "student"]) == 0
    assert main(["distill", "--config", cfg, "--teacher", "teacher/checkpoint.json", "--out", "distilled"]) == 0
    manifest = json.loads((tmp / "distilled" / "manifest.json").read_text())
    for key in ("teacher", "alpha", "temperature", "seed", "data", "build"):
        assert key in manifest
    assert manifest["teacher"] == "teacher/checkpoint.json" and manifest["alpha"] == 0.5
    header = (tmp / "distilled" / "metrics.csv").read_text().splitlines()[0]
    assert header == "epoch,loss,acc,ari,har"
    assert main(["eval", "--config", cfg, "--checkpoint", "distilled/checkpoint.json", "--out", "ev"]) == 0
    assert set(json.loads((tmp / "ev" / "eval.json").read_text())) >= {"acc", "ari", "har", "per_type"}


def test_distill_needs_teacher_and_alpha(ffoe_run, capsys):
    tmp, cfg = ffoe_run
    assert main(["distill", "--config", cfg, "--teacher", "missing.json", "--out", "d"]) == 3
    assert "does not exist" in capsys.readouterr().err
    assert main(["distill", "--config", cfg, "--out", "d"]) == 2
    no_alpha = _write(tmp, "ffoe")
    assert main(["distill", "--config", no_alpha, "--teacher", "teacher/checkpoint.json", "--out", "d"]) == 2


def test_step_size_flag_overrides_config(ffoe_run):
    tmp_path, cfg = ffoe_run
    assert main(["distill", "--config", cfg, "--teacher", "teacher/checkpoint.json", "--out", "d",
                 "--step-size", "0.1", "--epochs", "1"]) == 0
    manifest = json.loads((tmp_path / "d" / "manifest.json").read_text())
    assert manifest["train_config"]["step_size"] == 0.1
    assert manifest["train_config"]["epochs"] == 1


def test_eval_teacher_beats_untrained(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    cfg = _write(tmp_path)
    main(["gen-data", "--config", cfg, "--out", "data"])
    main(["train-teacher", "--config", cfg, "--out", "trained", "--epochs", "6"])
    main(["train-teacher", "--config", cfg, "--out", "untrained", "--epochs", "0"])
    accs = {}
    for name in ("trained", "untrained"):
        assert main(["eval", "--config", cfg, "--checkpoint", f"{name}/checkpoint.json", "--split", "train",
                     "--out", f"ev-{name}"]) == 0
        accs[name] = json.loads((tmp_path / f"ev-{name}" / "eval.json").read_text())["acc"]
    assert accs["trained"] >= accs["untrained"]


def test_error_exit_codes(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["train-teacher", "--data", "nowhere", "--out", "x"]) == 3
    assert main(["verify", "--config", "absent.ini"]) == 3
    bad = tmp_path / "bad.ini"
    bad.write_text("[dims]\nR = 3\n")
    assert main(["gen-data", "--config", str(bad), "--out", "d"]) == 2
    cfg = _write(tmp_path)
    main(["gen-data", "--config", cfg, "--out", "data"])
    diverge = tmp_path / "div.ini"
    diverge.write_text(CONFIG.format(task="mc", extra="clip_norm = none\n").replace("step_size = 0.5",
                                                                                     "step_size = 1e12"))
    assert main(["train-teacher", "--config", str(diverge), "--out", "t", "--no-deterministic"]) == 4


def test_export_attention(ffoe_run):
    tmp, cfg = ffoe_run
    assert main(["export-attention", "--config", cfg, "--checkpoint", "teacher/checkpoint.json",
                 "--index", "0", "3", "--out", "att"]) == 0
    obj = json.loads((tmp / "att" / "attention.json").read_text())
    assert [e["index"] for e in obj["examples"]] == [0, 3]
    ex = obj["examples"][0]
    assert ex["shape"] == [3, 3, 3] and len(ex["data"]) == 27
    assert abs(sum(ex["data"]) - 1.0) < 1e-12  # softmax-normalized map
    assert main(["export-attention", "--config", cfg, "--checkpoint", "teacher/checkpoint.json",
                 "--index", "999", "--out", "att"]) == 2


def test_gradcheck_verb(tmp_path, capsys):
    assert main(["gradcheck", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "gradcheck.txt").read_text()
    assert "kd loss a=0.5 T=3" in text and "passed" in text


VERBS = [
    ["verify", "--cases", "5"],
    ["params", "--R", "1", "2"],
    ["gen-data"],
    ["train-teacher"],
    ["train-student"],
    ["distill", "--teacher", "teacher/checkpoint.json"],
    ["eval", "--checkpoint", "teacher/checkpoint.json"],
    ["gradcheck"],
    ["export-attention", "--checkpoint", "teacher/checkpoint.json"],
]


@pytest.mark.parametrize("verb", VERBS, ids=lambda v: v[0])
def test_rerun_is_byte_identical(ffoe_run, verb):
    tmp, cfg = ffoe_run
    out = tmp / f"rerun-{verb[0]}"
    args = verb + ["--config", cfg, "--seed", "3", "--out", str(out)]
    assert main(args) == 0
    first = _digest(out)
    assert main(args) == 0
    assert _digest(out) == first
    assert "manifest.json" in first


def test_build_id_is_stable():
    assert build_id() == build_id() and build_id().startswith("trifuse-")
