import json

import pytest

from docforest.cli import main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "gen.json"
    cfg.write_text(json.dumps({"num_docs": 10, "entities_per_doc": [15, 25], "seed": 3}))
    assert main(["gen", "--config", str(cfg), "--out", str(root / "corpus")]) == 0
    assert main([
        "train", "--corpus", str(root / "corpus"), "--out", str(root / "model.json"),
        "--epochs", "2", "--emb-dim", "8", "--hidden-dim", "16", "--text-hash-dim", "16",
        "--log", str(root / "log.json"),
    ]) == 0
    return root


def test_gen_writes_manifest(workspace):
    manifest = json.loads((workspace / "corpus" / "manifest.json").read_text())
    assert manifest["seed"] == 3
    assert sum(len(v) for v in manifest["split"].values()) == 10


def test_train_log(workspace):
    log = json.loads((workspace / "log.json").read_text())
    assert len(log["epoch_loss"]) == 2


def test_predict_and_eval(workspace, capsys):
    preds = workspace / "preds.jsonl"
    corpus = workspace / "corpus" / "corpus.jsonl"
    assert main(["predict", "--model", str(workspace / "model.json"), "--input", str(corpus),
                 "--out", str(preds)]) == 0
    rows = [json.loads(l) for l in preds.read_text().splitlines()]
    assert {r["provenance"] for r in rows} <= {"rule1", "rule2", "rule3", "matcher"}
    capsys.readouterr()
    assert main(["eval", "--preds", str(preds), "--gold", str(corpus)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert 0.0 <= out["accuracy"] <= 1.0 and out["scored"] > 0
    assert main(["eval", "--preds", str(preds), "--gold", str(corpus), "--scored-categories", "note"]) == 0


def test_predict_no_rules(workspace):
    preds = workspace / "preds_nr.jsonl"
    assert main(["predict", "--model", str(workspace / "model.json"), "--input",
                 str(workspace / "corpus" / "corpus.jsonl"), "--out", str(preds), "--no-rules"]) == 0
    assert {json.loads(l)["provenance"] for l in preds.read_text().splitlines()} == {"matcher"}


def test_compare_json(workspace):
    out = workspace / "report.json"
    assert main(["compare", "--corpus", str(workspace / "corpus"), "--model", str(workspace / "model.json"),
                 "--json-out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert set(report) == {"loss_only", "loss_greedy", "detail"}


def test_rules_dump(capsys):
    assert main(["rules", "--dump"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert "table_caption" in json.dumps(data)
    assert main(["rules"]) == 1


def test_usage_errors(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["gen"])
    assert exc.value.code == 1
    assert main(["predict", "--model", str(tmp_path / "nope.json"), "--input", "x", "--out", "y"]) == 1


def test_malformed_input_is_exit_2(workspace, tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{not json\n")
    assert main(["predict", "--model", str(workspace / "model.json"), "--input", str(bad),
                 "--out", str(tmp_path / "p.jsonl")]) == 2


def test_embedding_dimension_mismatch_is_exit_3(workspace, tmp_path):
    emb = tmp_path / "emb.jsonl"
    emb.write_text(json.dumps({"doc_id": "x", "entity_id": "e000", "embedding": [0.0, 1.0]}) + "\n")
    assert main(["predict", "--model", str(workspace / "model.json"), "--input",
                 str(workspace / "corpus" / "corpus.jsonl"), "--out", str(tmp_path / "p.jsonl"),
                 "--embeddings", str(emb)]) == 3


def test_bad_config_is_exit_3(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"num_docs": 0}))
    assert main(["gen", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
