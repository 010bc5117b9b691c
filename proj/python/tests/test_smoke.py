import json
import os

import numpy as np
import pytest

import etmkit


def test_tokenize_and_link():
    assert etmkit.tokenize("Apple Inc. shares, rose!") == ["apple", "inc", "shares", "rose"]
    table = etmkit.AliasTable([("apple inc", "Apple Inc.", 0.9), ("apple", "Apple (fruit)", 0.3)])
    assert etmkit.link_text("Apple Inc. and an apple", table) == ["ENTITY/Apple_Inc.", "and", "an", "apple"]
    assert etmkit.link_text("Apple Inc.") == ["apple", "inc"]
    assert etmkit.canonical_entity_key("Steve Jobs") == "ENTITY/Steve_Jobs"


def test_beta_rows_are_distributions():
    rng = np.random.default_rng(0)
    beta = etmkit.compute_beta(rng.normal(size=(4, 12)), rng.normal(size=(3, 4)))
    assert beta.shape == (3, 12)
    np.testing.assert_allclose(beta.sum(axis=1), 1.0, atol=1e-12)


def test_aggregate_and_matching():
    agg = etmkit.aggregate_ci([4.0, 6.0])
    assert agg["mean"] == pytest.approx(5.0) and agg["ci95"] == pytest.approx(1.96)
    assert etmkit.hungarian(np.array([[4.0, 1.0], [2.0, 8.0]])) == [1, 0]
    beta = np.array([[0.5, 0.5, 0.0], [0.0, 0.2, 0.8]])
    tv, matching = etmkit.topic_recovery_score(beta, beta[::-1])
    assert tv == pytest.approx(0.0) and matching == [1, 0]


def test_errors_map_to_python_exceptions():
    with pytest.raises(etmkit.UsageError):
        etmkit.aggregate_ci([1.0])
    with pytest.raises(etmkit.DataError):
        etmkit.AliasTable.load("/nonexistent/aliases.tsv")
    assert issubclass(etmkit.DataError, etmkit.Error)


def test_train_recovers_sampled_topics(tmp_path):
    rng = np.random.default_rng(3)
    rho = rng.normal(size=(6, 30))
    alpha = rng.normal(size=(2, 6))
    docs, beta = etmkit.sample_etm(rho, alpha, [80] * 200, 5)
    bows = [etmkit.BowDocument(f"d{i}", d) for i, d in enumerate(docs)]
    cfg = etmkit.TrainConfig()
    cfg.num_topics = 2
    cfg.learning_rate = 0.01
    cfg.batch_size = 40
    cfg.max_epochs = 60
    cfg.hidden_dim = 32
    model = etmkit.train("etm", bows[:160], bows[160:180], rho, cfg)
    tv, _ = etmkit.topic_recovery_score(beta, model.beta[0])
    assert tv < 0.15
    ppl = etmkit.document_completion_perplexity(model, bows[180:], seed=1)
    assert 1.0 < ppl["perplexity"] < 30.0

    path = tmp_path / "model.json"
    model.save(path)
    again = etmkit.TrainedModel.load(path)
    np.testing.assert_array_equal(again.beta[0], model.beta[0])


def test_run_pipeline(tmp_path):
    rng = np.random.default_rng(4)
    words = [f"w{i}" for i in range(20)]
    with open(tmp_path / "corpus.jsonl", "w") as f:
        for i in range(40):
            f.write(json.dumps({"id": f"d{i}", "text": " ".join(rng.choice(words, 30))}) + "\n")
    with open(tmp_path / "emb.txt", "w") as f:
        f.write(f"{len(words)} 4\n")
        for w in words:
            f.write(w + " " + " ".join(f"{x:.6f}" for x in rng.normal(size=4)) + "\n")
    cfg = etmkit.RunConfig()
    cfg.corpus = tmp_path / "corpus.jsonl"
    cfg.embeddings = tmp_path / "emb.txt"
    cfg.max_doc_freq = 1.0
    cfg.train.num_topics = 2
    cfg.train.max_epochs = 3
    cfg.train.hidden_dim = 8
    cfg.out_dir = tmp_path / "run"
    result = etmkit.run_pipeline(cfg)
    assert result["num_entities"] == 0
    manifest = json.loads(open(result["manifest"]).read())
    assert manifest["test_perplexity"] == pytest.approx(result["test_perplexity"])


def test_imports_the_build_under_test():
    tree = os.environ.get("ETMKIT_BUILD_TREE")
    if tree:
        assert etmkit._etmkit.__file__.startswith(tree)
