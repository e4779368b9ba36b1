"""
Command-line walkthrough
========================

The ``powerembed`` command wraps the library: sample a dataset, embed it,
train classifiers over its splits, and run the config-driven experiments.
This script calls the same entry point in-process; each step is the
equivalent of one shell command, shown in the comment above it.
"""

import tempfile
from pathlib import Path

from powerembed.cli import run

here = Path(__file__).parent
work = Path(tempfile.mkdtemp(prefix="powerembed-"))
print("working in", work)

# powerembed gen-sbm --n 500 --p 0.5 --q 0.25 --seed 7 --out WORK/sbm
assert run(["gen-sbm", "--n", "500", "--p", "0.5", "--q", "0.25", "--seed", "7",
            "--out", str(work / "sbm")]) == 0

# powerembed embed --dataset WORK/sbm --method power --operator lap --layers 10 --k 2 --out WORK/emb
assert run(["embed", "--dataset", str(work / "sbm"), "--method", "power",
            "--operator", "lap", "--layers", "10", "--k", "2", "--out", str(work / "emb")]) == 0

# powerembed train --embeddings WORK/emb --dataset WORK/sbm --out WORK/train
assert run(["train", "--embeddings", str(work / "emb"), "--dataset", str(work / "sbm"),
            "--out", str(work / "train")]) == 0
print((work / "train" / "results.csv").read_text().splitlines()[:3])

# powerembed convergence --config demos/configs/convergence.toml --out WORK/conv
assert run(["convergence", "--config", str(here / "configs" / "convergence.toml"),
            "--out", str(work / "conv")]) == 0

# powerembed oversmooth --config demos/configs/oversmooth.toml --out WORK/os
assert run(["oversmooth", "--config", str(here / "configs" / "oversmooth.toml"),
            "--out", str(work / "os")]) == 0

# exit codes: 1 for a usage error, 2 for a runtime error
print("usage error ->", run(["embed", "--no-such-flag"]))
print("runtime error ->", run(["gen-sbm", "--n", "7", "--out", str(work / "odd")]))
