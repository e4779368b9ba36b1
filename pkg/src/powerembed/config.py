"""TOML experiment configs.

Sections: ``[sbm]``, ``[methods]``, ``[train]``, ``[output]``, plus the
optional ``[convergence]``, ``[oversmooth]`` and ``[data]``. Missing keys
take the defaults below.
"""
from __future__ import annotations

import copy
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEFAULTS = {
    "sbm": {
        "n": 500,
        "p": 0.5,
        "q": 0.25,
        "feature_dim": 2,
        "means": [1.0, 1.0],
        "covariance_scale": 1.0,
        "seed": 0,
        "trials": 10,
        "train_fraction": 0.1,
    },
    "methods": {"list": ["Power(Lap)-10"], "selection": "all"},
    "train": {"epochs": 100, "lr": 0.01, "dropout": 0.5, "weight_decay": 0.0,
              "hidden": 64, "seed": 0},
    "output": {"dir": "results"},
    "convergence": {"operator": "adj", "k": 2, "L": 20, "reference": "sampled"},
    "oversmooth": {"operator": "rw", "depths": [0, 1, 2, 10, 50]},
}

KNOWN_SECTIONS = set(DEFAULTS) | {"data"}


def merge_defaults(doc: dict) -> dict:
    unknown = set(doc) - KNOWN_SECTIONS
    if unknown:
        raise ValueError(f"unknown config section(s): {', '.join(sorted(unknown))}")
    cfg = copy.deepcopy(DEFAULTS)
    for section, values in doc.items():
        if not isinstance(values, dict):
            raise ValueError(f"config section [{section}] must be a table")
        cfg.setdefault(section, {}).update(values)
    return cfg


def load_config(path) -> dict:
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    return merge_defaults(doc)
