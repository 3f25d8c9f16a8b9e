# -*- coding: utf-8 -*-
import json

import pytest

from main import main
from src.deptree import DepTree, chain_heads, serialize_conllu
from src.errors import EXIT_DATA, EXIT_OK, EXIT_USAGE


@pytest.fixture
def run(tmp_path):
    def invoke(*args):
        return main(["--log-dir", str(tmp_path / "logs"), *[str(a) for a in args]])
    return invoke


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def train_tiny(run, tmp_path, attention="global", name="run"):
    out_dir = tmp_path / name
    code = run("train", "--synthetic", "copy", "--synthetic-pairs", 12, "--synthetic-dev", 3,
               "--synthetic-vocab", 4, "--synthetic-max-len", 4, "--epochs", 1, "--attention", attention,
               "--set", "embed_dim=3", "--set", "hidden_dim=4", "--set", "max_len=6", "--set", "beam_size=3",
               "--out-dir", out_dir, "--no-progress")
    return code, out_dir


def test_mask_on_chain(run, tmp_path, capsys):
    conllu = write(tmp_path / "chain.conllu", serialize_conllu([DepTree(tokens=["a", "b", "c"], heads=chain_heads(3))]))
    assert run("mask", conllu) == EXIT_OK
    assert capsys.readouterr().out == "0\t1\t2\n1\t0\t1\n2\t1\t0\n"


def test_mask_to_file(run, tmp_path):
    conllu = write(tmp_path / "two.conllu", "1\ta\t0\n\n1\tb\t2\n2\tc\t0\n")
    out = tmp_path / "two.mask.tsv"
    assert run("mask", conllu, "--out", out) == EXIT_OK
    assert out.read_text(encoding="utf-8") == "0\n\n0\t1\n1\t0\n"


def test_mask_on_invalid_tree_is_data_error(run, tmp_path):
    conllu = write(tmp_path / "bad.conllu", "1\ta\t2\n2\tb\t1\n")
    assert run("mask", conllu) == EXIT_DATA


def test_eval_identical_files(run, tmp_path, capsys):
    ref = write(tmp_path / "ref.txt", "the cat sat on the mat\na dog is in the garden\n")
    assert run("eval", "--hyp", ref, "--ref", ref) == EXIT_OK
    assert capsys.readouterr().out.startswith("BLEU 100.00")


def test_eval_buckets_and_json(run, tmp_path, capsys):
    ref = write(tmp_path / "ref.txt", "a b c d\ne f g h\n")
    hyp = write(tmp_path / "sys.txt", "a b c d\ne f x y\n")
    src = write(tmp_path / "src.txt", " ".join(["w"] * 5) + "\n" + " ".join(["w"] * 15) + "\n")
    report = tmp_path / "report.json"
    assert run("eval", "--hyp", hyp, ref, "--ref", ref, "--src", src, "--json-out", report) == EXIT_OK
    out = capsys.readouterr().out
    assert "sys: BLEU" in out and "ref: BLEU 100.00" in out
    assert "(10,20]" in out
    data = json.loads(report.read_text(encoding="utf-8"))
    assert data["ref"]["buckets"]["counts"] == [1, 1]


def test_eval_line_mismatch_is_data_error(run, tmp_path):
    ref = write(tmp_path / "ref.txt", "a\nb\n")
    hyp = write(tmp_path / "hyp.txt", "a\n")
    assert run("eval", "--hyp", hyp, "--ref", ref) == EXIT_DATA


def test_usage_errors_exit_one(run):
    assert run("train", "--attention", "nearest") == EXIT_USAGE
    assert run("translate") == EXIT_USAGE
    assert run("train", "--set", "bogus=1", "--synthetic", "copy") == EXIT_USAGE


def test_train_needs_data(run, tmp_path):
    assert run("train", "--out-dir", tmp_path / "x") == EXIT_USAGE


def test_train_then_translate(run, tmp_path):
    code, out_dir = train_tiny(run, tmp_path)
    assert code == EXIT_OK
    for name in ("checkpoint.json", "train_log.jsonl", "config.json"):
        assert (out_dir / name).exists()

    src = write(tmp_path / "test.src", "w0 w1\nw2\nw3 w3 w1\n")
    out = tmp_path / "test.hyp"
    att = tmp_path / "test.att.tsv"
    assert run("translate", "--checkpoint", out_dir / "checkpoint.json", "--src", src, "--out", out,
               "--attention-out", att, "--max-workers", 2) == EXIT_OK
    lines = out.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 3
    blocks = att.read_text(encoding="utf-8").split("\n\n")
    assert len(blocks) == 3
    assert all(len(row.split("\t")) == 2 for row in blocks[0].splitlines())


def test_translate_syntax_checkpoint_without_trees(run, tmp_path):
    code, out_dir = train_tiny(run, tmp_path, attention="syntax", name="syn")
    assert code == EXIT_OK
    src = write(tmp_path / "test.src", "w0 w1\n")
    assert run("translate", "--checkpoint", out_dir / "checkpoint.json", "--src", src) == EXIT_USAGE


def test_translate_global_checkpoint_as_double(run, tmp_path):
    code, out_dir = train_tiny(run, tmp_path)
    assert code == EXIT_OK
    src = write(tmp_path / "test.src", "w0 w1\n")
    trees = write(tmp_path / "test.conllu", serialize_conllu([DepTree(tokens=["w0", "w1"], heads=chain_heads(2))]))
    assert run("translate", "--checkpoint", out_dir / "checkpoint.json", "--src", src, "--trees", trees,
               "--attention", "double") == EXIT_USAGE


def test_translate_missing_checkpoint(run, tmp_path):
    src = write(tmp_path / "test.src", "w0\n")
    assert run("translate", "--checkpoint", tmp_path / "none.json", "--src", src) == EXIT_DATA


def test_generate_writes_corpus(run, tmp_path):
    prefix = tmp_path / "data" / "neighbor"
    assert run("generate", "--task", "tree_neighbor", "--pairs", 5, "--out-prefix", prefix) == EXIT_OK
    assert len((tmp_path / "data" / "neighbor.src").read_text(encoding="utf-8").splitlines()) == 5
    assert (tmp_path / "data" / "neighbor.conllu").exists()


def test_gradcheck_command(run, capsys):
    assert run("gradcheck", "--attention", "local", "--seed", 3) == EXIT_OK
    assert "model:local:sentence_loss" in capsys.readouterr().out


def test_run_log_file_gets_summary(run, tmp_path):
    ref = write(tmp_path / "ref.txt", "a b\n")
    run("eval", "--hyp", ref, "--ref", ref)
    logs = list((tmp_path / "logs").glob("sdatt_eval_*.log"))
    assert len(logs) == 1
    assert "RUN SUMMARY (eval)" in logs[0].read_text(encoding="utf-8")


def test_translate_double_exports_syntax_weights(run, tmp_path):
    code, out_dir = train_tiny(run, tmp_path, attention="double", name="dbl")
    assert code == EXIT_OK
    src = write(tmp_path / "test.src", "w0 w1 w2\n")
    trees = write(tmp_path / "test.conllu", serialize_conllu([DepTree(tokens=["w0", "w1", "w2"], heads=chain_heads(3))]))
    att = tmp_path / "test.att.tsv"
    assert run("translate", "--checkpoint", out_dir / "checkpoint.json", "--src", src, "--trees", trees,
               "--out", tmp_path / "test.hyp", "--attention-out", att) == EXIT_OK
    rows = [row.split("\t") for row in att.read_text(encoding="utf-8").splitlines() if row]
    assert rows
    for row in rows:
        assert len(row) == 6
        assert sum(float(w) for w in row[3:]) == pytest.approx(1.0, abs=1e-5)
