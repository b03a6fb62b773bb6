import hashlib
import json
from pathlib import Path

import pytest

from avsum.cli import main


def _digests(root: Path, pattern="*") -> dict[str, str]:
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob(pattern)) if p.is_file()}


SMALL = ["--videos", "6", "--frames", "64", "--dim", "8", "--groups", "3", "--affect-sep", "1.5"]


def test_synth_is_deterministic(tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path / "a"), "--seed", "3", *SMALL]) == 0
    assert main(["synth", "--out", str(tmp_path / "b"), "--seed", "3", *SMALL]) == 0
    a = _digests(tmp_path / "a", "*.avsf")
    assert a and a == _digests(tmp_path / "b", "*.avsf")
    assert main(["synth", "--out", str(tmp_path / "c"), "--seed", "4", *SMALL]) == 0
    assert a != _digests(tmp_path / "c", "*.avsf")


def test_synth_json_output(tmp_path, capsys):
    assert main(["synth", "--json", "--out", str(tmp_path), *SMALL]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["videos"] == 6 and payload["groups"] == 3 and payload["dim"] == 8


def test_seed_env_and_flag_precedence(tmp_path, monkeypatch):
    monkeypatch.setenv("AVSUM_SEED", "3")
    assert main(["synth", "--out", str(tmp_path / "env"), *SMALL]) == 0
    assert json.loads((tmp_path / "env" / "synth.config.json").read_text())["seed"] == 3
    assert main(["synth", "--out", str(tmp_path / "flag"), "--seed", "5", *SMALL]) == 0
    assert json.loads((tmp_path / "flag" / "synth.config.json").read_text())["seed"] == 5
    monkeypatch.setenv("AVSUM_SEED", "x")
    assert main(["synth", "--out", str(tmp_path / "bad"), *SMALL]) == 2


def test_unknown_config_key_exit_2(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"summarizer": {"lerning_rate": 0.1}}))
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "lerning_rate" in capsys.readouterr().err


def test_missing_inputs_exit_2(tmp_path, capsys):
    assert main(["train-cer", "--out", str(tmp_path)]) == 2
    assert "--manifest" in capsys.readouterr().err
    assert main(["train-sum", "--manifest", str(tmp_path / "none.json")]) == 2
    assert main(["gradcheck", "--ops", "nope"]) == 2
    assert main(["synth", "--config", str(tmp_path / "missing.json")]) == 2


def test_runtime_failure_exit_3(tmp_path):
    assert main(["eval-cer", "--ckpt", str(tmp_path / "absent.ckpt")]) == 3


def test_gradcheck_command(capsys):
    assert main(["gradcheck", "--ops", "mha,dense", "--seeds", "1", "--json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert {r["name"] for r in out["reports"]} == {"mha", "dense"}
    assert main(["gradcheck", "--ops", "dense", "--seeds", "1", "--inject-fault"]) == 1
    assert "FAIL" in capsys.readouterr().out


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """synth -> train-cer x2 -> extract-affect -> train-sum x2 -> eval-sum -> kld on a tiny corpus."""
    root = tmp_path_factory.mktemp("pipe")
    cfg = root / "small.json"
    cfg.write_text(json.dumps({
        "data": {"n_frames": 32},
        "cer": {"epochs": 2},
        "summarizer": {"epochs": 2, "enc_channels": [4, 8, 8, 8], "bottleneck": 8, "dec_channels": 4},
        "eval": {"top_l": 2},
    }))
    c = ["--config", str(cfg)]
    assert main(["synth", "--out", str(root / "corpus"), *SMALL]) == 0
    manifest = str(root / "corpus" / "manifest.json")
    for attr in ("activation", "valence"):
        assert main(["train-cer", *c, "--manifest", manifest, "--attribute", attr, "--out", str(root / "cer")]) == 0
    assert main(["extract-affect", *c, "--manifest", manifest, "--ckpt-a", str(root / "cer" / "cer-activation.ckpt"),
                 "--ckpt-v", str(root / "cer" / "cer-valence.ckpt"), "--out", str(root / "affect")]) == 0
    for variant in ("sum-fcn", "avsum-gru"):
        assert main(["train-sum", *c, "--manifest", manifest, "--affect", str(root / "affect"),
                     "--variant", variant, "--out", str(root / "runs" / variant)]) == 0
    assert main(["eval-sum", *c, "--runs", str(root / "runs" / "avsum-gru"),
                 "--baseline", str(root / "runs" / "sum-fcn"), "--out", str(root / "eval")]) == 0
    assert main(["kld", *c, "--manifest", manifest, "--affect", str(root / "affect"), "--out", str(root / "kld")]) == 0
    return root


def test_pipeline_outputs(pipeline, capsys):
    run = pipeline / "runs" / "avsum-gru"
    assert (run / "train-sum.config.json").exists() and (run / "report-maxf1.json").exists()
    assert len(list(run.glob("*/maxf1.ckpt"))) == 3
    ev = pipeline / "eval"
    for name in ("table.txt", "delta_f1.json", "delta_f1.png", "report-avsum-gru-maxf1.json"):
        assert (ev / name).exists(), name
    assert len(json.loads((pipeline / "kld" / "kld.json").read_text())["kld"]) == 22
    tracks = list((pipeline / "affect").glob("*.gru.avsf"))
    assert len(tracks) == 6
    assert main(["eval-cer", "--ckpt", str(pipeline / "cer" / "cer-valence.ckpt"), "--split", "all", "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["attribute"] == "valence"


def test_eval_sum_matches_training_report(pipeline):
    train = json.loads((pipeline / "runs" / "avsum-gru" / "report-maxf1.json").read_text())
    ev = json.loads((pipeline / "eval" / "report-avsum-gru-maxf1.json").read_text())
    assert ev["F1"] == train["F1"] and ev["videos"] == train["videos"]


def test_affect_variant_without_tracks_exit_2(pipeline, tmp_path, capsys):
    manifest = str(pipeline / "corpus" / "manifest.json")
    assert main(["train-sum", "--manifest", manifest, "--variant", "avsum-gru", "--epochs", "1",
                 "--out", str(tmp_path)]) == 2
    assert "extract-affect" in capsys.readouterr().err


def test_resolved_config_rerun_is_byte_identical(pipeline, tmp_path):
    run = pipeline / "runs" / "avsum-gru"
    assert main(["train-sum", "--config", str(run / "train-sum.config.json"), "--out", str(tmp_path / "again")]) == 0
    first = {k: v for k, v in _digests(run).items() if not k.endswith(".config.json")}
    second = {k: v for k, v in _digests(tmp_path / "again").items() if not k.endswith(".config.json")}
    assert first == second
