import json

import numpy as np
import pytest

from docforest.corpus import CorpusSplit
from docforest.doc_model import ROOT, BBox, Document, Entity
from docforest.errors import ConfigurationError
from docforest.features import FeatureConfig, build_feature_matrix
from docforest.losses import MatchBatch, margin_loss_forward
from docforest.matcher import (
    EncoderParams,
    MatchModel,
    _doc_loss_and_grads,
    _training_pairs,
    embed_document,
    encode,
    init_model,
    load_model,
    predict_parent,
    save_model,
    score_candidates,
    train,
)
from docforest.rules import DEFAULT_RULES
from oracles import central_difference, relative_error

SMALL = FeatureConfig(text_hash_dim=4)


def _doc():
    ents = [
        Entity("s", "section", 0, BBox(0, 0, 300, 30), "1 Geology"),
        Entity("n1", "note", 0, BBox(60, 40, 400, 70), "Note: assay pending"),
        Entity("p", "paragraph", 0, BBox(0, 80, 800, 200), "Drilling continued."),
        Entity("t", "table", 0, BBox(0, 220, 800, 400), None),
        Entity("n2", "note", 1, BBox(60, 40, 400, 70), "Note: survey"),
    ]
    ents = [Entity(e.id, e.category, e.page, e.bbox, e.text, "s" if e.category == "note" else None) for e in ents]
    return Document("d", tuple(ents))


def test_encode_unit_norm():
    rng = np.random.default_rng(0)
    model = init_model(SMALL, hidden_dim=8, emb_dim=5, seed=1)
    X = rng.normal(size=(50, SMALL.dim)) * 10
    U = encode(model.child_encoder, X)
    np.testing.assert_allclose(np.linalg.norm(U, axis=1), 1.0, atol=1e-9)
    assert np.linalg.norm(encode(model.parent_encoder, X[0])) == pytest.approx(1.0, abs=1e-9)


def test_zero_parameters_hit_degenerate_guard():
    params = EncoderParams.zeros(SMALL.dim, 8, 5)
    u = encode(params, np.ones(SMALL.dim))
    np.testing.assert_array_equal(u, [1, 0, 0, 0, 0])


def test_scaled_input_still_unit():
    model = init_model(SMALL, hidden_dim=8, emb_dim=5, seed=1)
    x = np.linspace(-1, 1, SMALL.dim)
    for scale in (1.0, 2.0, 100.0):
        assert np.linalg.norm(encode(model.child_encoder, scale * x)) == pytest.approx(1.0, abs=1e-9)


def test_parameter_gradients_match_finite_differences():
    model = init_model(SMALL, hidden_dim=6, emb_dim=4, s=8.0, m=0.3, seed=2)
    for params in (model.child_encoder, model.parent_encoder):
        params.b1[:] = 0.1
        params.b2[:] = -0.05
    td = _training_pairs(_doc(), SMALL, None, DEFAULT_RULES)
    loss, grads = _doc_loss_and_grads(model, td)
    arrays = model.child_encoder.arrays() + model.parent_encoder.arrays()
    for arr, grad in zip(arrays, grads):
        def f(_):
            return _doc_loss_and_grads(model, td, with_grad=False)[0]

        numeric = central_difference(f, arr)
        assert relative_error(grad, numeric) <= 1e-6


def test_model_json_roundtrip_exact(tmp_path):
    model = init_model(SMALL, hidden_dim=8, emb_dim=5, s=12.5, m=0.25, seed=4)
    path = tmp_path / "m.json"
    save_model(model, path)
    back = load_model(path)
    for a, b in zip(model.child_encoder.arrays() + model.parent_encoder.arrays(),
                    back.child_encoder.arrays() + back.parent_encoder.arrays()):
        np.testing.assert_array_equal(a, b)
    assert (back.s, back.m, back.feature_config) == (12.5, 0.25, SMALL)
    data = json.loads(path.read_text())
    assert data["version"] == 1 and data["dims"] == {"D": SMALL.dim, "H": 8, "E": 5}


def test_model_dimension_mismatch():
    model = init_model(SMALL, hidden_dim=8, emb_dim=5)
    with pytest.raises(ConfigurationError):
        MatchModel(model.child_encoder, model.parent_encoder, feature_config=FeatureConfig())
    data = model.to_json()
    data["dims"]["E"] = 7
    with pytest.raises(ConfigurationError):
        MatchModel.from_json(data)


@pytest.mark.parametrize("s, m", [(0.0, 0.2), (16.0, 1.6), (16.0, -0.1)])
def test_invalid_hyperparameters(s, m):
    with pytest.raises(ConfigurationError):
        init_model(SMALL, s=s, m=m)


def test_embedding_dim_512_available():
    model = init_model(SMALL, hidden_dim=16, emb_dim=512)
    Uc, Up = embed_document(model, _doc())
    assert Uc.shape == (5, 512)


def test_zero_epochs_returns_init():
    m0 = init_model(SMALL, hidden_dim=8, emb_dim=5)
    m1, log = train([_doc()], m0, epochs=0)
    assert m1.to_json() == m0.to_json()
    assert log["epoch_loss"] == []


def test_no_trainable_pairs():
    doc = Document("d", (Entity("s", "section", 0, BBox(0, 0, 1, 1), None, ROOT),))
    with pytest.raises(ConfigurationError, match="no trainable pairs"):
        train([doc], init_model(SMALL, hidden_dim=8, emb_dim=5), epochs=1)


def test_training_pairs_use_residual_with_gold_entity_parent():
    td = _training_pairs(_doc(), SMALL, None, DEFAULT_RULES)
    ids = [e.id for e in _doc().entities]
    assert [ids[i] for i in td.child_rows] == ["n1", "n2"]
    assert [ids[j] for j in td.labels] == ["s", "s"]
    assert not td.mask[0, ids.index("n1")]


def test_training_reduces_loss_and_is_deterministic(small_corpus, tmp_path):
    init = init_model(hidden_dim=16, emb_dim=8, seed=5)
    m1, log1 = train(small_corpus, init, epochs=4, seed=9)
    m2, log2 = train(small_corpus, init, epochs=4, seed=9)
    assert log1["epoch_loss"][-1] < log1["initial_loss"]
    save_model(m1, tmp_path / "a.json")
    save_model(m2, tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert log1 == log2
    # init must not be mutated
    assert init.to_json() == init_model(hidden_dim=16, emb_dim=8, seed=5).to_json()


def test_training_accepts_corpus_split():
    split = CorpusSplit(train=[_doc()])
    model, log = train(split, init_model(SMALL, hidden_dim=8, emb_dim=5), epochs=2)
    assert len(log["epoch_loss"]) == 2 and log["pairs"] == 2


def test_scores_in_range_and_permute(small_model, small_corpus):
    doc = small_corpus.val[0]
    child, cands = doc.entities[0], list(doc.entities[1:])
    scores = score_candidates(small_model, child, cands, doc)
    assert np.all(scores <= 1.0 + 1e-12) and np.all(scores >= -1.0 - 1e-12)
    perm = np.random.default_rng(0).permutation(len(cands))
    permuted = score_candidates(small_model, child, [cands[i] for i in perm], doc)
    np.testing.assert_array_equal(permuted, scores[perm])


def test_argmax_matches_brute_force_scan(small_model, small_corpus):
    for doc in small_corpus.test[:3]:
        X = build_feature_matrix(doc, small_model.feature_config)
        for child_idx in range(0, len(doc.entities), 5):
            child = doc.entities[child_idx]
            cands = [e for e in doc.entities if e.id != child.id][:10]
            # independent scan: encode by hand, compare dot products one at a time
            def enc(p, x):
                v = p.W2 @ np.tanh(p.W1 @ x + p.b1) + p.b2
                return v / np.linalg.norm(v)

            cu = enc(small_model.child_encoder, X[child_idx])
            best, best_score = None, -np.inf
            for c in cands:
                j = next(i for i, e in enumerate(doc.entities) if e.id == c.id)
                score = float(cu @ enc(small_model.parent_encoder, X[j]))
                if score > best_score + 1e-12:
                    best, best_score = c.id, score
            assert predict_parent(small_model, child, cands, doc) == best


def test_predict_single_candidate_and_ties():
    doc = _doc()
    model = init_model(SMALL, hidden_dim=8, emb_dim=5)
    assert predict_parent(model, doc.by_id["n1"], [doc.by_id["p"]], doc) == "p"
    # zero weights: every embedding is e_1, all scores tie -> earliest in reading order
    zero = MatchModel(EncoderParams.zeros(SMALL.dim, 8, 5), EncoderParams.zeros(SMALL.dim, 8, 5),
                      feature_config=SMALL)
    cands = [doc.by_id[i] for i in ("t", "p", "s")]
    assert predict_parent(zero, doc.by_id["n2"], cands, doc) == "s"


def test_prediction_invariant_to_scale(small_model, small_corpus):
    doc = small_corpus.val[1]
    child, cands = doc.entities[-1], list(doc.entities[:-1])
    base = predict_parent(small_model, child, cands, doc)
    for s in (1.0, 64.0):
        rescaled = MatchModel(small_model.child_encoder, small_model.parent_encoder, s=s,
                              m=small_model.m, feature_config=small_model.feature_config)
        assert predict_parent(rescaled, child, cands, doc) == base


def test_candidate_errors():
    doc = _doc()
    model = init_model(SMALL, hidden_dim=8, emb_dim=5)
    with pytest.raises(ValueError):
        score_candidates(model, doc.by_id["n1"], [], doc)
    with pytest.raises(ValueError):
        score_candidates(model, doc.by_id["n1"], [doc.by_id["n1"]], doc)


def test_margin_loss_used_in_training_matches_standalone():
    model = init_model(SMALL, hidden_dim=8, emb_dim=5)
    td = _training_pairs(_doc(), SMALL, None, DEFAULT_RULES)
    Uc, Up = embed_document(model, _doc())
    batch = MatchBatch(Uc[td.child_rows], Up, td.labels, td.mask)
    assert _doc_loss_and_grads(model, td, False)[0] == pytest.approx(
        margin_loss_forward(batch, model.s, model.m), abs=1e-12
    )
