"""
Test functions for the command-line interface in `sktune.cli`.
"""

# Standard library
import json

# 3rd-party packages
import numpy as np
import pandas as pd
import pytest

# Self
from sktune import cli
from sktune.data import param_data


PROMPT = "classify the positive or negative sentiment of the text:"


@pytest.fixture(autouse=True)
def no_env_seed(monkeypatch):
    monkeypatch.delenv("SKTUNE_SEED", raising=False)
    return


def test_params(capsys):
    """
    Test function for the `params` subcommand on the reference model.
    """
    assert cli.main(["params", "--method", "sk-prompt"]) == 0
    lines = capsys.readouterr().out.splitlines()
    name, count, pct = lines[0].split("\t")
    assert (name, count) == ("sk-prompt", "358")
    assert pct == f"{100 * 358 / (20480 + 358):.3f}%"
    assert "  head.W\t64" in lines
    assert cli.main(["params", "--method", "full"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "full\t20546\t100.000%"
    return


def test_usage_errors(tmp_path, capsys, monkeypatch):
    """
    Test function for the usage errors of the `train` subcommand, which exit with code 2.
    """
    out = str(tmp_path / "out")
    assert cli.main(["train", "--method", "sk-prompt", "--synthetic", "10", "--out", out]) == 2
    assert "--prompt" in capsys.readouterr().err
    assert cli.main(["train", "--method", "prompt", "--synthetic", "10", "--lr", "-1",
                     "--out", out]) == 2
    monkeypatch.setenv("SKTUNE_SEED", "abc")
    assert cli.main(["train", "--method", "prompt", "--synthetic", "10", "--out", out]) == 2
    with pytest.raises(SystemExit):
        cli.main(["train", "--method", "adapter", "--out", out])
    return


def test_train(tmp_path, capsys):
    """
    Test function for the `train` subcommand: artifacts are written, and a rerun with the same
    seed reproduces them.
    """
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        argv = ["train", "--method", "sk-prompt", "--prompt", PROMPT, "--synthetic", "40",
                "--epochs", "1", "--seed", "3", "--out", str(out)]
        assert cli.main(argv) == 0
        row = capsys.readouterr().out.strip().split("\t")
        assert row[:2] == ["sk-prompt", "358"]
        outputs.append(out)
    a, b = outputs
    for filename in (cli.RUN_CSV, "summary.json", cli.ADAPTER_JSON):
        assert (a / filename).read_bytes() == (b / filename).read_bytes()
    trace = pd.read_csv(a / cli.RUN_CSV)
    assert list(trace.columns) == ["step", "loss"] and len(trace) == 2
    summary = json.loads((a / "summary.json").read_text(encoding="utf-8"))
    assert set(summary) == {"method", "params_pct", "convergence_step", "accuracy", "f1", "mcc"}
    assert summary["method"] == "sk-prompt"
    return


def test_train_data_file(tmp_path, capsys):
    path = tmp_path / "data.jsonl"
    texts = ["i love this movie", "a boring film", "great plot", "dull story"] * 5
    path.write_text(
        "".join(json.dumps({"text": t, "label": (i + 1) % 2}) + "\n" for i, t in enumerate(texts)),
        encoding="utf-8",
    )
    argv = ["train", "--method", "lora2", "--data", str(path), "--epochs", "1",
            "--out", str(tmp_path / "out")]
    assert cli.main(argv) == 0
    assert capsys.readouterr().out.startswith("lora2\t578\t")
    path.write_text('{"text": "a", "label": 7}\n', encoding="utf-8")
    assert cli.main(argv) == 2
    assert cli.main(["train", "--method", "lora2", "--data", str(tmp_path / "missing.jsonl"),
                     "--out", str(tmp_path / "out")]) == 1
    return


def test_train_data_file_prompt(tmp_path, capsys):
    """
    Test that a vocabulary built from a JSONL file covers the prompt text, is stored with the
    adapter, and is used again by the `attn` subcommand.
    """
    path = tmp_path / "data.jsonl"
    texts = ["we saw paris today", "they visited rome", "a city in the north", "it was dull"] * 5
    path.write_text(
        "".join(json.dumps({"text": t, "label": i % 2}) + "\n" for i, t in enumerate(texts)),
        encoding="utf-8",
    )
    out = tmp_path / "out"
    assert cli.main(["train", "--method", "sk-prompt", "--prompt", PROMPT, "--data", str(path),
                     "--epochs", "1", "--out", str(out)]) == 0
    capsys.readouterr()
    document = json.loads((out / cli.ADAPTER_JSON).read_text(encoding="utf-8"))
    vocab = document["vocab"]
    prompt_ids = document["method"]["prompt_ids"]
    assert param_data.UNK_ID not in prompt_ids
    assert [vocab[i] for i in prompt_ids] == PROMPT.split()

    attn_out = tmp_path / "attn"
    assert cli.main(["attn", "--adapter", str(out / cli.ADAPTER_JSON), "--input",
                     "they visited paris", "--out", str(attn_out)]) == 0
    frame = pd.read_csv(attn_out / cli.ATTN_CSV, index_col="token")
    assert frame.index.tolist() == PROMPT.split() + ["they", "visited", "paris"]
    return


def test_pretrain(tmp_path, capsys):
    """
    Test function for the `pretrain` subcommand: with zero steps, the seeded initialization is
    saved, identically on every run, and can be loaded back by `params`.
    """
    paths = [tmp_path / "m1.json", tmp_path / "m2.json"]
    for path in paths:
        argv = ["pretrain", "--out", str(path), "--steps", "0", "--sequences", "20",
                "--seq-len", "8", "--d-model", "8", "--heads", "2", "--layers", "1",
                "--d-ffn", "16", "--seed", "1"]
        assert cli.main(argv) == 0
        assert capsys.readouterr().out.startswith("held-out LM loss: ")
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert cli.main(["params", "--model", str(paths[0]), "--method", "prompt"]) == 0
    assert capsys.readouterr().out.split("\t")[:2] == ["prompt", str(20 * 8 + 2 * 8 + 2)]
    paths[1].write_text("{}", encoding="utf-8")
    assert cli.main(["params", "--model", str(paths[1]), "--method", "prompt"]) == 1
    return


def test_compare(tmp_path, capsys):
    """
    Test function for the `compare` subcommand: one row per method and seed, and one median row
    per method.
    """
    out = tmp_path / "cmp"
    argv = ["compare", "--methods", "lora2", "sk-prompt", "--prompt", PROMPT, "--seeds", "2",
            "--synthetic", "40", "--epochs", "1", "--out", str(out)]
    assert cli.main(argv) == 0
    table = pd.read_csv(out / cli.COMPARE_CSV)
    assert list(table.columns) == [
        "method", "variant", "seed", "convergence_step", "accuracy", "f1", "params_pct"
    ]
    assert table["method"].tolist() == ["lora2", "lora2", "sk-prompt", "sk-prompt"]
    assert table["seed"].tolist() == [0, 1, 0, 1]
    medians = pd.read_csv(out / cli.COMPARE_MEDIAN_CSV)
    assert medians["method"].tolist() == ["lora2", "sk-prompt"]
    assert np.allclose(
        medians["accuracy"], table.groupby("method", sort=False)["accuracy"].median()
    )
    return


def test_compare_usage_errors(tmp_path, monkeypatch):
    """
    Test that `compare` rejects an invalid variant before training any method.
    """
    calls = []
    monkeypatch.setattr(cli, "train", lambda *args, **kwargs: calls.append(args))
    out = str(tmp_path / "cmp")
    argv = ["compare", "--methods", "lora2", "sk-prefix", "--synthetic", "40", "--out", out]
    assert cli.main(argv) == 2
    assert cli.main(["compare", "--methods", "lora2", "--seeds", "0", "--synthetic", "40",
                     "--out", out]) == 2
    assert calls == []
    assert not (tmp_path / "cmp").exists()
    return


def test_attn(tmp_path):
    """
    Test function for the `attn` subcommand, with and without a trained adapter.
    """
    out = tmp_path / "attn"
    assert cli.main(["attn", "--out", str(out)]) == 0
    frame = pd.read_csv(out / cli.ATTN_CSV, index_col="token")
    n = len(param_data.BEST_PROMPT.split()) + len(param_data.FIG_INPUT.split())
    assert frame.shape == (n, n)
    assert np.allclose(frame.to_numpy().sum(axis=1), 1)
    assert np.all(np.triu(frame.to_numpy(), k=1) == 0)

    train_out = tmp_path / "train"
    assert cli.main(["train", "--method", "sk-prompt", "--prompt", PROMPT, "--synthetic", "20",
                     "--epochs", "1", "--out", str(train_out)]) == 0
    assert cli.main(["attn", "--adapter", str(train_out / cli.ADAPTER_JSON), "--layer", "1",
                     "--head", "3", "--out", str(out)]) == 0
    assert cli.main(["attn", "--layer", "2", "--out", str(out)]) == 2
    return


def test_gradcheck(capsys):
    """
    Test function for the `gradcheck` subcommand: every primitive input and every trainable
    tensor of both semantic methods is checked, and all pass.
    """
    assert cli.main(["gradcheck"]) == 0
    lines = capsys.readouterr().out.splitlines()
    ops = [line.split("\t")[0] for line in lines]
    assert {"matmul", "matmul.b", "layer_norm.gamma", "layer_norm.beta", "cross_entropy"} <= set(
        ops
    )
    assert {"sk-prompt/head.W", "sk-prompt/adapter_g.0.W2", "sk-prefix/adapter_f.1.W_v"} <= set(
        ops
    )
    assert len([op for op in ops if op.startswith("sk-prompt/")]) == 6
    assert len([op for op in ops if op.startswith("sk-prefix/")]) == 2 + 4 * 2
    assert all(line.endswith("\tok") for line in lines)
    return
