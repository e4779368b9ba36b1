import subprocess
import sys

import numpy as np
import pytest

from powerembed import EmbeddingList
from powerembed.cli import build_parser, run
from powerembed.harness import load_dataset
from powerembed.neuralnet import load_model


@pytest.fixture
def dataset(tmp_path):
    out = tmp_path / "ds"
    assert run(["gen-sbm", "--n", "80", "--p", "0.5", "--q", "0.2", "--seed", "7",
                "--splits", "3", "--out", str(out)]) == 0
    return out


def test_gen_sbm_is_deterministic(tmp_path, dataset):
    other = tmp_path / "ds2"
    run(["gen-sbm", "--n", "80", "--p", "0.5", "--q", "0.2", "--seed", "7",
         "--splits", "3", "--out", str(other)])
    for name in ("graph.txt", "features.csv", "labels.csv", "splits/split_2.json"):
        assert (dataset / name).read_bytes() == (other / name).read_bytes()
    ds = load_dataset(dataset)
    assert ds.graph.n == 80 and len(ds.splits) == 3


def test_embed_and_train(tmp_path, dataset):
    emb = tmp_path / "emb"
    assert run(["embed", "--dataset", str(dataset), "--method", "power", "--operator", "lap",
                "--layers", "10", "--k", "2", "--out", str(emb)]) == 0
    P = EmbeddingList.load(emb)
    assert len(P) == 11 and P.operator == "lap"
    res = tmp_path / "res"
    assert run(["train", "--embeddings", str(emb), "--dataset", str(dataset),
                "--selection", "input-last", "--epochs", "20", "--save-model",
                str(tmp_path / "models"), "--out", str(res)]) == 0
    lines = (res / "results.csv").read_text().splitlines()
    assert lines[0].startswith("dataset,method,operator,L,selection,split")
    assert len(lines) == 4 and ",input-last," in lines[1]
    assert len(load_model(tmp_path / "models" / "model_0.json").block_mlps) == 2


def test_embed_spectral_and_pca(tmp_path, dataset):
    emb = tmp_path / "emb"
    assert run(["embed", "--dataset", str(dataset), "--method", "a_x", "--k", "1",
                "--out", str(emb)]) == 0
    assert EmbeddingList.load(emb)[0].shape == (80, 2)
    assert run(["train", "--embeddings", str(emb), "--dataset", str(dataset),
                "--epochs", "5", "--out", str(tmp_path / "r")]) == 0


def write_config(tmp_path, body):
    path = tmp_path / "cfg.toml"
    path.write_text(body)
    return path


def test_convergence_command(tmp_path):
    cfg = write_config(tmp_path, "[sbm]\nn = 100\ntrials = 2\n[convergence]\nL = 5\n")
    assert run(["convergence", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert len((tmp_path / "o" / "convergence.csv").read_text().splitlines()) == 7


def test_bench_command_sbm_and_data(tmp_path, dataset):
    cfg = write_config(tmp_path, "[sbm]\nn = 60\ntrials = 2\n"
                                 "[methods]\nlist = [\"Power(Lap)-2\", \"ASE\"]\n"
                                 "[train]\nepochs = 5\n")
    assert run(["bench", "--config", str(cfg), "--seed", "3",
                "--out", str(tmp_path / "b")]) == 0
    lines = (tmp_path / "b" / "results.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 * 2
    cfg2 = tmp_path / "data.toml"
    cfg2.write_text(f"[data]\npath = \"{dataset}\"\nk = 2\n"
                    "[methods]\nlist = [\"Power-2\"]\n[train]\nepochs = 5\n")
    assert run(["bench", "--config", str(cfg2), "--out", str(tmp_path / "d")]) == 0
    assert len((tmp_path / "d" / "results.csv").read_text().splitlines()) == 4


def test_oversmooth_command(tmp_path):
    cfg = write_config(tmp_path, "[sbm]\nn = 100\n[oversmooth]\ndepths = [0, 5]\n"
                                 "[train]\nepochs = 5\n")
    assert run(["oversmooth", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    header = (tmp_path / "o" / "oversmooth.csv").read_text().splitlines()[0]
    assert header.startswith("depth,operator,unnormalized_cos_top")


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["gen-sbm", "--out", "x", "--bogus-flag"],
    ["embed", "--dataset", "d", "--operator", "xyz", "--out", "e"],
    ["gen-sbm"],
])
def test_usage_errors_exit_1(argv, capsys):
    assert run(argv) == 1
    assert capsys.readouterr().err.strip()


def test_unknown_flag_is_named(capsys):
    run(["gen-sbm", "--out", "x", "--bogus-flag"])
    assert "--bogus-flag" in capsys.readouterr().err


def test_runtime_errors_exit_2(tmp_path, capsys):
    assert run(["gen-sbm", "--n", "5", "--out", str(tmp_path / "odd")]) == 2
    assert "error" in capsys.readouterr().err
    assert run(["embed", "--dataset", str(tmp_path / "missing"), "--out",
                str(tmp_path / "e")]) == 2
    cfg = write_config(tmp_path, "[nonsense]\nx = 1\n")
    assert run(["bench", "--config", str(cfg)]) == 2


def test_help_lists_every_flag_with_defaults():
    parser = build_parser()
    subs = parser._subparsers._group_actions[0].choices
    assert set(subs) == {"gen-sbm", "embed", "train", "convergence", "bench", "oversmooth"}
    for name, sub in subs.items():
        text = sub.format_help()
        for action in sub._actions:
            for flag in action.option_strings:
                assert flag in text, (name, flag)
            if action.option_strings and action.default not in (None, False) \
                    and action.dest != "help":
                assert f"(default: {action.default})" in text, (name, action.dest)


def test_help_exit_code_and_stdout():
    proc = subprocess.run([sys.executable, "-m", "powerembed.cli", "embed", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "--operator" in proc.stdout and "--layers" in proc.stdout


def test_data_not_printed_to_stdout(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "powerembed.cli", "gen-sbm", "--n", "20",
                           "--out", str(tmp_path / "ds")], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout == ""
    assert np.loadtxt(tmp_path / "ds" / "labels.csv").shape == (20,)
