import json
import os
import subprocess

import pytest

BIN = os.environ.get("ETMKIT_BIN", "etmkit")


def etmkit(*args, cwd=None):
    return subprocess.run([BIN, "--log-level", "off", *map(str, args)], cwd=cwd,
                          capture_output=True, text=True)


def ok(*args, cwd=None):
    r = etmkit(*args, cwd=cwd)
    assert r.returncode == 0, r.stderr
    return r


@pytest.fixture(scope="module")
def sampled(tmp_path_factory):
    d = tmp_path_factory.mktemp("sample")
    ok("sample", "--family", "etm", "--k", 3, "--vocab-size", 30, "--docs", 60, "--length", 40,
       "--embed-dim", 6, "--seed", 2, "--out-dir", d)
    return d


@pytest.fixture(scope="module")
def run_dir(sampled, tmp_path_factory):
    out = tmp_path_factory.mktemp("run") / "r"
    ok("run", "--corpus", sampled / "corpus.jsonl", "--embeddings", sampled / "embeddings.txt",
       "--k", 3, "--max-epochs", 4, "--hidden", 16, "--out-dir", out)
    return out


def test_sample_writes_corpus_embeddings_and_truth(sampled):
    docs = [json.loads(l) for l in (sampled / "corpus.jsonl").read_text().splitlines()]
    assert len(docs) == 60
    assert all(len(d["text"].split()) == 40 for d in docs)
    header = (sampled / "embeddings.txt").read_text().splitlines()[0].split()
    assert header == ["30", "6"]
    truth = json.loads((sampled / "truth.json").read_text())
    assert truth


def test_sample_is_deterministic(tmp_path):
    for name in ("a", "b"):
        ok("sample", "--family", "lda", "--k", 2, "--vocab-size", 10, "--docs", 5, "--length", 8,
           "--seed", 9, "--out-dir", tmp_path / name)
    assert (tmp_path / "a" / "corpus.jsonl").read_bytes() == (tmp_path / "b" / "corpus.jsonl").read_bytes()


def test_run_writes_every_artifact(run_dir):
    for name in ("linked.jsonl", "vocab.txt", "train.jsonl", "valid.jsonl", "test.jsonl", "model.json",
                 "eval.json", "report.json", "report.txt", "manifest.json"):
        assert (run_dir / name).is_file(), name
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert set(manifest["artifacts"]) >= {"model.json", "eval.json", "report.json"}
    assert manifest["vocabulary"]["entities"] == 0
    ev = json.loads((run_dir / "eval.json").read_text())
    assert ev["perplexity"] > 1.0
    assert ev["n_tokens"] == sum(d["n_tokens"] for d in ev["per_doc"])


def test_eval_matches_run(run_dir):
    r = ok("eval", "--model-path", run_dir / "model.json", "--corpus", run_dir / "test.jsonl")
    assert json.loads(r.stdout) == json.loads((run_dir / "eval.json").read_text())


def test_report_json_and_table(run_dir, tmp_path):
    out = tmp_path / "rep.json"
    table = tmp_path / "rep.txt"
    ok("report", "--model-path", run_dir / "model.json", "--vocab", run_dir / "vocab.txt",
       "--top-n", 3, "--out", out, "--table", table)
    rep = json.loads(out.read_text())
    assert rep["K"] == 3 and rep["top_n"] == 3 and not rep["dynamic"]
    for topic in rep["topics"]:
        probs = [t["prob"] for t in topic["slices"][0]["terms"]]
        assert len(probs) == 3 and probs == sorted(probs, reverse=True)
    assert table.read_text().startswith("Topic 0")


def test_report_rejects_mismatched_vocabulary(run_dir, tmp_path):
    vocab = tmp_path / "vocab.txt"
    vocab.write_text("\n".join((run_dir / "vocab.txt").read_text().splitlines()[:-1]) + "\n")
    assert etmkit("report", "--model-path", run_dir / "model.json", "--vocab", vocab).returncode == 2


def test_aggregate(tmp_path):
    for i, v in enumerate((4.0, 6.0)):
        (tmp_path / f"eval{i}.json").write_text(json.dumps({"perplexity": v}))
    r = ok("aggregate", "--inputs", str(tmp_path / "eval*.json"))
    agg = json.loads(r.stdout)
    assert agg["n"] == 2 and agg["mean"] == pytest.approx(5.0) and agg["ci95"] == pytest.approx(1.96)


def test_link_and_prepare(tmp_path):
    corpus = tmp_path / "c.jsonl"
    corpus.write_text("".join(json.dumps({"id": f"d{i}", "text": f"apple inc shares rise {i} orchard"}) + "\n"
                              for i in range(10)))
    aliases = tmp_path / "a.tsv"
    aliases.write_text("apple inc\tApple Inc.\t0.9\n")
    ok("link", "--corpus", corpus, "--linker", "dict", "--aliases", aliases, "--out", tmp_path / "linked.jsonl")
    first = json.loads((tmp_path / "linked.jsonl").read_text().splitlines()[0])
    assert first["terms"][0] == "ENTITY/Apple_Inc."
    ok("prepare", "--corpus", corpus, "--linker", "dict", "--aliases", aliases, "--max-doc-freq", "1.0",
       "--out-dir", tmp_path / "prep")
    assert (tmp_path / "prep" / "vocab.txt").is_file()


def test_seeds_runs_and_aggregates(sampled, tmp_path):
    out = tmp_path / "multi"
    ok("run", "--corpus", sampled / "corpus.jsonl", "--embeddings", sampled / "embeddings.txt",
       "--k", 2, "--max-epochs", 2, "--hidden", 8, "--seeds", "1..3", "--out-dir", out)
    agg = json.loads((out / "aggregate.json").read_text())
    assert agg["n"] == 3 and len(agg["values"]) == 3


def test_config_file_and_flag_override(sampled, tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text(f'corpus = "{sampled / "corpus.jsonl"}"\nembeddings = "{sampled / "embeddings.txt"}"\n'
                   f"k = 4\nmax-epochs = 2\nhidden = 8\n")
    ok("--config", cfg, "run", "--out-dir", tmp_path / "a")
    assert json.loads((tmp_path / "a" / "report.json").read_text())["K"] == 4
    ok("--config", cfg, "run", "--k", 2, "--out-dir", tmp_path / "b")
    manifest = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert manifest["config"]["k"] == 2
    assert manifest["config"]["max_epochs"] == 2


def test_exit_codes(sampled, tmp_path):
    common = ["--corpus", sampled / "corpus.jsonl", "--embeddings", sampled / "embeddings.txt", "--max-epochs", 2]
    assert etmkit("run", *common, "--k", 0, "--out-dir", tmp_path / "u").returncode == 1
    assert etmkit("run", "--bogus-flag").returncode == 1
    r = etmkit("run", "--corpus", tmp_path / "missing.jsonl", "--embeddings", sampled / "embeddings.txt",
               "--out-dir", tmp_path / "d")
    assert r.returncode == 2
    assert etmkit("run", *common, "--lr", "1e300", "--out-dir", tmp_path / "n").returncode == 3


def test_stage_name_in_error(sampled, tmp_path):
    r = subprocess.run([BIN, "run", "--corpus", str(sampled / "corpus.jsonl"), "--embeddings",
                        str(sampled / "embeddings.txt"), "--max-epochs", "2", "--lr", "1e300",
                        "--out-dir", str(tmp_path / "n")], capture_output=True, text=True)
    assert "stage train" in r.stderr
    assert (tmp_path / "n" / "vocab.txt").is_file()
