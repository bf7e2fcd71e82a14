import json

import pytest

from lyricgauge.cli import corpus_digest, file_digest, main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One tiny corpus + trained checkpoint shared by the command tests."""
    root = tmp_path_factory.mktemp("cli")
    corpus = root / "corpus"
    assert main(["build-corpus", "--items", "16", "--seed", "3",
                 "--d-sem", "10", "--d-emo", "2", "--out", str(corpus)]) == 0
    train = root / "train"
    assert main(["train", "--manifest", str(corpus / "manifest.jsonl"),
                 "--lyrics-root", str(corpus / "lyrics"),
                 "--cache", str(corpus / "embeddings.bin"),
                 "--strategy", "soft", "--seed", "0", "--epochs", "3",
                 "--batch-size", "8", "--hidden", "6", "--proj", "8",
                 "--out", str(train)]) == 0
    return root


def test_build_corpus_outputs(workspace):
    corpus = workspace / "corpus"
    assert (corpus / "manifest.jsonl").is_file()
    assert (corpus / "embeddings.bin").is_file()
    assert any((corpus / "lyrics").rglob("*.txt"))
    manifest = json.loads((corpus / "run_manifest.json").read_text())
    assert manifest["command"] == "build-corpus"
    assert manifest["config"]["items"] == 16
    assert manifest["corpus_digest"] == corpus_digest(
        corpus / "manifest.jsonl", corpus / "lyrics")
    assert manifest["cache_digest"] == file_digest(corpus / "embeddings.bin")


def test_build_corpus_rejects_narrow_embedding(tmp_path, capsys):
    rc = main(["build-corpus", "--items", "4", "--d-sem", "4", "--d-emo", "2",
               "--out", str(tmp_path / "x")])
    assert rc == 1
    assert "d_sem + d_emo" in capsys.readouterr().err


def test_train_outputs(workspace):
    train = workspace / "train"
    assert (train / "model.ckpt").is_file()
    log_lines = (train / "train_log.jsonl").read_text().strip().splitlines()
    assert 1 <= len(log_lines) <= 3
    entry = json.loads(log_lines[0])
    assert {"epoch", "loss_cls", "dev_macro_f1"} <= set(entry)
    manifest = json.loads((train / "run_manifest.json").read_text())
    assert manifest["config"]["strategy"] == "soft"
    assert manifest["config"]["epochs"] == 3


def test_predict_writes_levels(workspace, tmp_path):
    corpus = workspace / "corpus"
    out = tmp_path / "pred.json"
    rc = main(["predict", "--checkpoint", str(workspace / "train" / "model.ckpt"),
               "--cache", str(corpus / "embeddings.bin"),
               "--manifest", str(corpus / "manifest.jsonl"),
               "--lyrics-root", str(corpus / "lyrics"),
               "--items", "item0000,item0003", "--out", str(out)])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["strategy"] == "soft"
    assert sorted(doc["items"]) == ["item0000", "item0003"]
    block = doc["items"]["item0000"]
    assert set(block["levels"]) == {"violence", "substance", "sex",
                                    "consumerism", "positive"}
    for dist in block["distributions"].values():
        assert len(dist) == 3
        assert abs(sum(dist) - 1.0) < 1e-4


def test_predict_rejects_unknown_item(workspace, capsys):
    corpus = workspace / "corpus"
    rc = main(["predict", "--checkpoint", str(workspace / "train" / "model.ckpt"),
               "--cache", str(corpus / "embeddings.bin"),
               "--manifest", str(corpus / "manifest.jsonl"),
               "--lyrics-root", str(corpus / "lyrics"),
               "--items", "item9999"])
    assert rc == 1
    assert "unknown item ids: item9999" in capsys.readouterr().err


def test_predict_refuses_mismatched_cache(workspace, tmp_path, capsys):
    corpus = workspace / "corpus"
    other = tmp_path / "other"
    assert main(["build-corpus", "--items", "16", "--seed", "99",
                 "--d-sem", "10", "--d-emo", "2", "--out", str(other)]) == 0
    rc = main(["predict", "--checkpoint", str(workspace / "train" / "model.ckpt"),
               "--cache", str(other / "embeddings.bin"),
               "--manifest", str(other / "manifest.jsonl"),
               "--lyrics-root", str(other / "lyrics")])
    assert rc == 1
    err = capsys.readouterr().err
    assert "checkpoint expects" in err
    assert file_digest(other / "embeddings.bin") in err
    ck_digest = json.loads(
        (workspace / "train" / "run_manifest.json").read_text())["cache_digest"]
    assert ck_digest in err


def test_perturb_prints_table(workspace, tmp_path, capsys):
    corpus = workspace / "corpus"
    out = tmp_path / "probe.json"
    rc = main(["perturb", "--checkpoint", str(workspace / "train" / "model.ckpt"),
               "--cache", str(corpus / "embeddings.bin"),
               "--manifest", str(corpus / "manifest.jsonl"),
               "--lyrics-root", str(corpus / "lyrics"),
               "--item", "item0001", "--out", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert "item item0001" in text
    doc = json.loads(out.read_text())
    assert doc["item_id"] == "item0001"
    assert doc["records"]


def test_correlate_prints_matrix(workspace, tmp_path, capsys):
    corpus = workspace / "corpus"
    out = tmp_path / "corr.json"
    rc = main(["correlate", "--manifest", str(corpus / "manifest.jsonl"),
               "--lyrics-root", str(corpus / "lyrics"), "--out", str(out)])
    assert rc == 0
    assert "violence" in capsys.readouterr().out
    doc = json.loads(out.read_text())
    assert len(doc["rho"]) == 5 and len(doc["p"]) == 5
    for i in range(5):
        assert doc["rho"][i][i] == 1.0


def test_evaluate_writes_report(workspace, tmp_path):
    corpus = workspace / "corpus"
    out = tmp_path / "eval"
    rc = main(["evaluate", "--manifest", str(corpus / "manifest.jsonl"),
               "--lyrics-root", str(corpus / "lyrics"),
               "--cache", str(corpus / "embeddings.bin"),
               "--strategies", "plain,binary", "--folds", "2",
               "--epochs", "2", "--batch-size", "8", "--hidden", "6",
               "--proj", "8", "--out", str(out)])
    assert rc == 0
    report = json.loads((out / "report.json").read_text())
    assert sorted(report["payload"]["strategies"]) == ["binary", "plain"]
    assert (out / "confusion_plain.csv").is_file()
    assert (out / "confusion_binary.csv").is_file()
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["config"]["folds"] == 2


def test_config_file_and_cli_precedence(workspace, tmp_path):
    corpus = workspace / "corpus"
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"epochs": 2, "hidden": 6, "proj": 8,
                               "batch_size": 8, "strategy": "plain", "seed": 4}))
    out = tmp_path / "train_cfg"
    rc = main(["train", "--manifest", str(corpus / "manifest.jsonl"),
               "--lyrics-root", str(corpus / "lyrics"),
               "--cache", str(corpus / "embeddings.bin"),
               "--config", str(cfg), "--strategy", "rank", "--out", str(out)])
    assert rc == 0
    resolved = json.loads((out / "run_manifest.json").read_text())["config"]
    assert resolved["strategy"] == "rank"  # CLI beats config file
    assert resolved["epochs"] == 2         # config file beats default
    assert resolved["lr"] == 0.001         # default survives
    assert resolved["seed"] == 4


def test_out_falls_back_to_environment(workspace, tmp_path, monkeypatch):
    corpus = workspace / "corpus"
    env_dir = tmp_path / "from_env"
    monkeypatch.setenv("LYRICGAUGE_OUT", str(env_dir))
    rc = main(["correlate", "--manifest", str(corpus / "manifest.jsonl"),
               "--lyrics-root", str(corpus / "lyrics")])
    assert rc == 0  # correlate only writes with --out, env var is not consumed
    out_dir = tmp_path / "env_build"
    monkeypatch.setenv("LYRICGAUGE_OUT", str(out_dir))
    rc = main(["build-corpus", "--items", "4", "--seed", "1",
               "--d-sem", "10", "--d-emo", "2"])
    assert rc == 0
    assert (out_dir / "manifest.jsonl").is_file()


def test_bad_config_file_is_reported(workspace, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("[1, 2, 3]")
    rc = main(["build-corpus", "--items", "4", "--config", str(cfg),
               "--out", str(tmp_path / "x")])
    assert rc == 1
    assert "JSON object" in capsys.readouterr().err
