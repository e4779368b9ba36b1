"""Experiment drivers: convergence curves, SBM classification, over-smoothing
diagnostics and the real-data protocol, plus dataset and result I/O.

Every experiment is a pure function of its config and seed. Trial ``i``
uses seed ``seed + i``.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import platform
import re
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .embeddings import (
    EmbeddingList,
    FeatureSelection,
    embed,
    oracle_eigen,
    power_embed,
    power_iterates,
    select_features,
    unnormalized_embed,
)
from .errors import EigGapWarning, PowerEmbedError
from .graph import Graph, OperatorKind, apply_operator, read_edge_list, write_edge_list
from .linalg import pca_reduce, principal_angles
from .neuralnet import (
    TrainConfig,
    accuracy,
    gcn_train_eval,
    predict,
    train_inception,
    train_mlp,
)
from .random_graphs import (
    GaussianMixtureParams,
    SbmParams,
    make_2b_sbm,
    make_rng,
    sample_features,
    sample_sbm,
)

log = logging.getLogger(__name__)

CSV_COLUMNS = ["dataset", "method", "operator", "L", "selection", "split", "seed",
               "accuracy", "wall_ms"]


# -- data containers ----------------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray

    def __post_init__(self):
        parts = []
        for name in ("train_idx", "val_idx", "test_idx"):
            arr = np.asarray(getattr(self, name), dtype=np.int64).reshape(-1)
            object.__setattr__(self, name, arr)
            parts.append(arr)
        if not len(self.train_idx):
            raise ValueError("training split is empty")
        allidx = np.concatenate(parts)
        if len(np.unique(allidx)) != len(allidx):
            raise ValueError("split parts overlap")
        if allidx.min() < 0:
            raise ValueError("negative index in split")

    def check(self, n: int) -> None:
        top = max(int(a.max(initial=-1)) for a in (self.train_idx, self.val_idx, self.test_idx))
        if top >= n:
            raise ValueError(f"split index {top} out of range for n={n}")

    def to_json(self) -> dict:
        return {"train": self.train_idx.tolist(), "val": self.val_idx.tolist(),
                "test": self.test_idx.tolist()}

    @classmethod
    def from_json(cls, doc: dict) -> "SplitSpec":
        return cls(np.asarray(doc["train"]), np.asarray(doc.get("val", [])),
                   np.asarray(doc["test"]))


@dataclass
class Dataset:
    graph: Graph
    X: np.ndarray
    y: np.ndarray
    splits: list = field(default_factory=list)
    name: str = "dataset"
    homophily: float | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.shape[0] != self.graph.n or self.y.shape != (self.graph.n,):
            raise ValueError("graph, features and labels disagree on the node count")
        if self.y.size and self.y.min() < 0:
            raise ValueError("labels must be non-negative")
        for s in self.splits:
            s.check(self.graph.n)
        if self.homophily is None:
            self.homophily = edge_homophily(self.graph, self.y)

    @property
    def n_classes(self) -> int:
        return int(self.y.max()) + 1 if self.y.size else 0


@dataclass
class ExperimentResult:
    """Accuracies of one method over a set of splits or trials."""

    dataset: str
    method: str
    operator: str | None
    L: int
    selection: str
    accuracies: list
    seeds: list
    splits: list
    wall_ms: list
    errors: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def mean(self) -> float:
        acc = [a for a in self.accuracies if not math.isnan(a)]
        return float(np.mean(acc)) if acc else float("nan")

    @property
    def stderr(self) -> float:
        acc = [a for a in self.accuracies if not math.isnan(a)]
        if len(acc) < 2:
            return float("nan")
        return float(np.std(acc, ddof=1) / math.sqrt(len(acc)))

    def summary(self) -> str:
        return (f"{self.dataset} {self.method}: {100 * self.mean:.2f} "
                f"+- {100 * self.stderr:.2f} (n={len(self.accuracies)})")


def edge_homophily(g: Graph, y) -> float:
    """Fraction of edges whose endpoints share a label."""
    if g.num_edges == 0:
        return float("nan")
    y = np.asarray(y)
    return float(np.mean(y[g.edges[:, 0]] == y[g.edges[:, 1]]))


# -- methods ------------------------------------------------------------------

_FAMILY_DEFAULT_OP = {
    "power": "adj", "sign": "rw", "sgc": "lap", "unnormalized": "adj", "gcn": "lap",
}
_OP_LABEL = {"adj": "", "rw": "(RW)", "lap": "(Lap)"}


@dataclass(frozen=True)
class MethodSpec:
    """One embedding + classifier recipe.

    ``family`` is one of ``power``, ``sign``, ``sgc``, ``unnormalized``,
    ``ase``, ``cov``, ``a_x``, ``gcn``.
    """

    family: str
    operator: str | None = None
    L: int = 0
    selection: str = "all"

    @property
    def label(self) -> str:
        f = self.family
        if f == "power":
            base = f"Power{_OP_LABEL[self.operator]}-{self.L}"
        elif f == "sign":
            base = f"SIGN-{self.L}"
        elif f == "sgc":
            base = f"SGC(Incep)-{self.L}"
        elif f == "unnormalized":
            base = f"Unnorm{_OP_LABEL[self.operator]}-{self.L}"
        elif f == "gcn":
            base = f"GCN-{self.L}"
        else:
            base = {"ase": "ASE", "cov": "Cov(X)", "a_x": "A_X"}[f]
        if f in ("power", "sign", "sgc", "unnormalized") and self.selection != "all":
            base += f"/{self.selection}"
        return base

    @property
    def is_list(self) -> bool:
        return self.family in ("power", "sign", "sgc", "unnormalized")

    @classmethod
    def parse(cls, text: str, selection: str | None = None) -> "MethodSpec":
        """Parse labels such as ``Power(Lap)-10``, ``SIGN-2``, ``GCN-5``,
        ``ASE``, ``A_X``, optionally suffixed with ``/last`` or ``/input-last``."""
        raw = text.strip()
        sel = selection
        if "/" in raw:
            raw, sel = raw.split("/", 1)
        sel = FeatureSelection.parse(sel or "all").value
        key = raw.lower().replace(" ", "")
        simple = {"ase": "ase", "cov(x)": "cov", "cov": "cov", "a_x": "a_x", "ax": "a_x"}
        if key in simple:
            return cls(simple[key], None, 0, "all")
        m = re.fullmatch(r"(power|sign|sgc|sgc\(incep\)|unnorm|unnormalized|gcn)"
                         r"(?:\((adj|rw|lap)\))?-(\d+)", key)
        if not m:
            raise ValueError(f"cannot parse method {text!r}")
        fam, op, L = m.group(1), m.group(2), int(m.group(3))
        fam = {"sgc(incep)": "sgc", "unnorm": "unnormalized"}.get(fam, fam)
        op = op or _FAMILY_DEFAULT_OP[fam]
        if fam == "gcn" and L < 1:
            raise ValueError("GCN depth must be >= 1")
        return cls(fam, op, L, sel if fam != "gcn" else "all")


def build_embedding(spec: MethodSpec, g: Graph, X, k: int | None = None,
                    qr_fallback: bool = False) -> EmbeddingList:
    kind = OperatorKind.parse(spec.operator) if spec.operator else None
    P = embed(spec.family, g, X, L=spec.L, k=k, kind=kind, qr_fallback=qr_fallback)
    if spec.is_list:
        P = select_features(P, spec.selection)
    return P


def evaluate_method(spec: MethodSpec, g: Graph, X, y, split: SplitSpec,
                    cfg: TrainConfig, n_classes: int | None = None,
                    k: int | None = None, X_raw=None,
                    embedding: EmbeddingList | None = None) -> float:
    """Test accuracy of one method on one split.

    Embeddings are computed transductively on the whole graph; only the
    classifier is restricted to training rows. GCN uses ``X_raw`` when given.
    """
    y = np.asarray(y, dtype=np.int64)
    K = n_classes or int(y.max()) + 1
    if spec.family == "gcn":
        feats = X if X_raw is None else X_raw
        return gcn_train_eval(g, feats, y, split, spec.L, cfg, K)
    P = embedding if embedding is not None else build_embedding(spec, g, X, k)
    tr, te = split.train_idx, split.test_idx
    if spec.is_list:
        model = train_inception(P.rows(tr), y[tr], cfg, K)
        return accuracy(predict(model, P.rows(te)), y[te])
    model = train_mlp(P[0][tr], y[tr], cfg, K)
    return accuracy(predict(model, P[0][te]), y[te])


# -- splits -------------------------------------------------------------------

def stratified_split(y, fractions: Sequence[float], seed: int) -> SplitSpec:
    """Per-class random split into train/val/test by the given fractions.

    ``fractions`` is ``(train, test)`` or ``(train, val, test)``. Each class
    contributes ``round(frac * class_size)`` nodes to train (at least one)
    and to val; the remainder goes to test.
    """
    y = np.asarray(y)
    if len(fractions) == 2:
        f_train, f_val = fractions[0], 0.0
    else:
        f_train, f_val = fractions[0], fractions[1]
    rng = make_rng(seed)
    train, val, test = [], [], []
    for c in np.unique(y):
        idx = rng.permutation(np.nonzero(y == c)[0])
        n_tr = max(1, int(round(f_train * len(idx))))
        n_va = int(round(f_val * len(idx)))
        train.append(idx[:n_tr])
        val.append(idx[n_tr:n_tr + n_va])
        test.append(idx[n_tr + n_va:])
    return SplitSpec(np.sort(np.concatenate(train)), np.sort(np.concatenate(val)),
                     np.sort(np.concatenate(test)))


# -- dataset I/O --------------------------------------------------------------

def save_dataset(ds: Dataset, path) -> None:
    path = Path(path)
    (path / "splits").mkdir(parents=True, exist_ok=True)
    write_edge_list(ds.graph, path / "graph.txt")
    with open(path / "features.csv", "w") as fh:
        for row in ds.X:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
    with open(path / "labels.csv", "w") as fh:
        for lab in ds.y:
            fh.write(f"{int(lab)}\n")
    for i, s in enumerate(ds.splits):
        (path / "splits" / f"split_{i}.json").write_text(json.dumps(s.to_json()))


def load_dataset(path, generate_splits: int = 10, seed: int = 0) -> Dataset:
    """Read a dataset directory.

    Without a ``splits/`` directory, ``generate_splits`` stratified
    48/32/20 splits are created and a warning is logged.
    """
    path = Path(path)
    if not path.is_dir():
        raise FileNotFoundError(f"dataset directory {path} does not exist")
    g = read_edge_list(path / "graph.txt")
    try:
        X = np.loadtxt(path / "features.csv", delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise ValueError(f"{path / 'features.csv'}: {exc}") from None
    try:
        y = np.loadtxt(path / "labels.csv", dtype=np.int64, ndmin=1)
    except ValueError as exc:
        raise ValueError(f"{path / 'labels.csv'}: {exc}") from None
    split_dir = path / "splits"
    files = sorted(split_dir.glob("split_*.json"),
                   key=lambda p: int(p.stem.split("_")[1])) if split_dir.is_dir() else []
    if files:
        splits = [SplitSpec.from_json(json.loads(f.read_text())) for f in files]
    else:
        log.warning("%s has no splits; generating %d stratified 48/32/20 splits",
                    path, generate_splits)
        splits = [stratified_split(y, (0.48, 0.32, 0.20), seed + i)
                  for i in range(generate_splits)]
    return Dataset(graph=g, X=X, y=y, splits=splits, name=path.name)


# -- parallel map -------------------------------------------------------------

def _pmap(fn, items, jobs: int = 1):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# -- convergence (angle curves) ----------------------------------------------

@dataclass
class ConvergenceResult:
    """``angles[trial, t, i]``: i-th principal angle (ascending) at iteration t."""

    angles: np.ndarray
    kind: str
    k: int
    L: int
    seeds: list

    @property
    def mean_curve(self) -> np.ndarray:
        return self.angles.mean(axis=0)

    @property
    def mean_largest(self) -> np.ndarray:
        return self.angles[:, :, -1].mean(axis=0)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"angle_{i + 1}" for i in range(self.k)] + ["largest"])
            for t in range(self.L + 1):
                w.writerow([t] + [repr(float(a)) for a in self.mean_curve[t]]
                           + [repr(float(self.mean_largest[t]))])


def _convergence_trial(args):
    params, kind, k, L, seed, gm, reference = args
    rng = make_rng(seed)
    g = sample_sbm(params, rng)
    X = sample_features(params.memberships, gm, rng)
    if reference == "expected":
        from .linalg import sym_eig
        from .random_graphs import expected_adjacency
        target = sym_eig(expected_adjacency(params)).vectors[:, :k]
    else:
        _, target = oracle_eigen(kind, g, k)
    states = power_iterates(lambda M: apply_operator(kind, g, M), X, L)
    return np.stack([principal_angles(U, target) for U in states])


def convergence_experiment(params: SbmParams, kind, k: int, L: int, trials: int,
                           seed: int, gm: GaussianMixtureParams | None = None,
                           reference: str = "sampled", jobs: int = 1
                           ) -> ConvergenceResult:
    """Principal angles between PowerEmbed iterates and the exact top-``k``
    eigenspace, per iteration, over ``trials`` sampled graphs.

    ``reference="sampled"`` compares against the sampled graph's operator;
    ``"expected"`` against ``E[A] = Z B Z^T`` (adjacency only).
    """
    kind = OperatorKind.parse(kind)
    if gm is None:
        mu = np.ones(k)
        gm = GaussianMixtureParams.isotropic(np.stack([mu, -mu])[:params.K], 1.0)
        if params.K > 2:
            raise ValueError("pass explicit Gaussian mixture params for K > 2")
    seeds = [seed + t for t in range(trials)]
    curves = _pmap(_convergence_trial,
                   [(params, kind, k, L, s, gm, reference) for s in seeds], jobs)
    return ConvergenceResult(np.stack(curves), kind.value, k, L, seeds)


# -- SBM classification -------------------------------------------------------

@dataclass(frozen=True)
class SbmScenario:
    name: str
    p: float
    q: float


@dataclass
class SbmGrid:
    scenarios: list
    n: int = 500
    trials: int = 10
    mean: tuple = (1.0, 1.0)
    covariance_scale: float = 1.0
    train_fraction: float = 0.1

    @classmethod
    def density_sweep(cls, xs, heterophilous: bool = False, **kw) -> "SbmGrid":
        """``p = x/2, q = x/3`` per density ``x`` (swapped when heterophilous)."""
        sc = []
        for x in xs:
            p, q = x / 2.0, x / 3.0
            if heterophilous:
                p, q = q, p
            sc.append(SbmScenario(f"x={x:g}{'-het' if heterophilous else ''}", p, q))
        return cls(scenarios=sc, **kw)


def _sbm_trial(args):
    scenario, grid, methods, cfg, seed = args
    params = make_2b_sbm(grid.n, scenario.p, scenario.q)
    rng = make_rng(seed)
    g = sample_sbm(params, rng)
    mu = np.asarray(grid.mean, dtype=np.float64)
    gm = GaussianMixtureParams.isotropic(np.stack([mu, -mu]), grid.covariance_scale)
    X = sample_features(params.memberships, gm, rng)
    y = params.memberships
    split = stratified_split(y, (grid.train_fraction, 1 - grid.train_fraction), seed)
    tcfg = TrainConfig(**{**asdict(cfg), "seed": seed})
    rows = []
    for spec in methods:
        t0 = time.perf_counter()
        err = None
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", EigGapWarning)
            try:
                acc = evaluate_method(spec, g, X, y, split, tcfg, 2, k=X.shape[1])
            except PowerEmbedError as exc:
                acc, err = float("nan"), f"{type(exc).__name__}: {exc}"
        gap_warn = any(issubclass(w.category, EigGapWarning) for w in caught)
        rows.append((acc, (time.perf_counter() - t0) * 1e3, err, gap_warn))
    return rows


def sbm_classification_experiment(grid: SbmGrid, methods: Sequence, seed: int,
                                  cfg: TrainConfig | None = None, jobs: int = 1
                                  ) -> list:
    """Train/test every method on sampled 2B-SBM graphs.

    Each trial samples one graph and feature matrix shared by all methods,
    draws a stratified ``train_fraction`` split, and reports test accuracy.
    """
    cfg = cfg or TrainConfig()
    methods = [m if isinstance(m, MethodSpec) else MethodSpec.parse(m) for m in methods]
    results = []
    for sc in grid.scenarios:
        seeds = [seed + t for t in range(grid.trials)]
        per_trial = _pmap(_sbm_trial, [(sc, grid, methods, cfg, s) for s in seeds], jobs)
        for j, spec in enumerate(methods):
            rows = [pt[j] for pt in per_trial]
            results.append(ExperimentResult(
                dataset=sc.name, method=spec.label, operator=spec.operator, L=spec.L,
                selection=spec.selection, accuracies=[r[0] for r in rows],
                seeds=seeds, splits=list(range(len(seeds))),
                wall_ms=[r[1] for r in rows],
                errors=[r[2] for r in rows if r[2]],
                meta={"p": sc.p, "q": sc.q, "n": grid.n,
                      "eig_gap_warnings": sum(r[3] for r in rows)}))
            log.info("%s", results[-1].summary())
    return results


# -- over-smoothing -----------------------------------------------------------

def _min_abs_cosine(U: np.ndarray, v: np.ndarray) -> float:
    v = v / np.linalg.norm(v)
    cos = np.abs(v @ U) / np.linalg.norm(U, axis=0)
    return float(cos.min())


def oversmoothing_diagnostic(g: Graph, X, depths: Sequence[int], kind,
                             y=None, split: SplitSpec | None = None,
                             cfg: TrainConfig | None = None) -> list:
    """Compare unnormalized propagation and PowerEmbed at several depths.

    For each depth, reports the smallest per-column |cosine| between the
    last block and the operator's top eigenvector, and the largest
    principal angle between the last block and the top-``k`` eigenspace
    (``k`` = number of feature columns). With labels and a split, also the
    test accuracy of a classifier trained on the last block only.
    """
    kind = OperatorKind.parse(kind)
    X = np.asarray(X, dtype=np.float64)
    k = X.shape[1]
    _, V = oracle_eigen(kind, g, max(k, 1))
    top = V[:, 0]
    L = max(depths)
    unnorm = unnormalized_embed(kind, g, X, L)
    power = power_embed(kind, g, X, L)
    rows = []
    for d in depths:
        row = {"depth": d, "operator": kind.value}
        for name, P in (("unnormalized", unnorm), ("power", power)):
            B = P[d]
            row[f"{name}_cos_top"] = _min_abs_cosine(B, top)
            try:
                row[f"{name}_angle_topk"] = float(principal_angles(B, V[:, :k])[-1])
            except PowerEmbedError:
                row[f"{name}_angle_topk"] = float("nan")
            if y is not None and split is not None:
                model = train_inception([B[split.train_idx]], np.asarray(y)[split.train_idx],
                                        cfg or TrainConfig(), int(np.max(y)) + 1)
                row[f"{name}_acc_last"] = accuracy(
                    predict(model, [B[split.test_idx]]), np.asarray(y)[split.test_idx])
        rows.append(row)
    return rows


# -- real data ----------------------------------------------------------------

def choose_k(n: int) -> int:
    """Embedding width for real graphs: 10 for small graphs, else 100."""
    return 10 if n < 1000 else 100


def _realdata_job(args):
    spec, ds, Xk, k, cfg, i = args
    split = ds.splits[i]
    tcfg = TrainConfig(**{**asdict(cfg), "seed": cfg.seed + i})
    t0 = time.perf_counter()
    try:
        acc, err = evaluate_method(spec, ds.graph, Xk, ds.y, split, tcfg,
                                   ds.n_classes, k=k, X_raw=ds.X), None
    except PowerEmbedError as exc:
        acc, err = float("nan"), f"{type(exc).__name__}: {exc}"
    return acc, (time.perf_counter() - t0) * 1e3, err


def realdata_experiment(ds: Dataset, methods: Sequence, cfg: TrainConfig | None = None,
                        k: int | None = None, jobs: int = 1) -> list:
    """Run methods over every split of a dataset.

    Features are PCA-reduced to ``k`` columns (default :func:`choose_k`,
    capped at the feature rank). A method that raises a library error is
    recorded with ``nan`` accuracy and the run continues.
    """
    cfg = cfg or TrainConfig()
    methods = [m if isinstance(m, MethodSpec) else MethodSpec.parse(m) for m in methods]
    k = k or choose_k(ds.graph.n)
    k = min(k, int(np.linalg.matrix_rank(ds.X)))
    Xk = pca_reduce(ds.X, k)
    results = []
    for spec in methods:
        rows = _pmap(_realdata_job, [(spec, ds, Xk, k, cfg, i)
                                     for i in range(len(ds.splits))], jobs)
        results.append(ExperimentResult(
            dataset=ds.name, method=spec.label, operator=spec.operator, L=spec.L,
            selection=spec.selection, accuracies=[r[0] for r in rows],
            seeds=[cfg.seed + i for i in range(len(ds.splits))],
            splits=list(range(len(ds.splits))), wall_ms=[r[1] for r in rows],
            errors=[r[2] for r in rows if r[2]],
            meta={"homophily": ds.homophily, "k": k, "n": ds.graph.n}))
        log.info("%s", results[-1].summary())
    return results


# -- output -------------------------------------------------------------------

def result_rows(results) -> list:
    rows = []
    for r in results:
        for split, seed, acc, ms in zip(r.splits, r.seeds, r.accuracies, r.wall_ms):
            rows.append({
                "dataset": r.dataset, "method": r.method, "operator": r.operator or "",
                "L": r.L, "selection": r.selection, "split": split, "seed": seed,
                "accuracy": repr(float(acc)), "wall_ms": f"{ms:.3f}",
            })
    rows.sort(key=lambda d: (d["dataset"], d["method"], d["operator"], d["L"],
                             d["selection"], d["split"]))
    return rows


def emit_results(results, path, config: dict | None = None) -> tuple:
    """Write ``results.csv`` and ``results.json`` into directory ``path``.

    Rows are sorted, so the CSV is byte-identical across reruns except
    for the ``wall_ms`` column.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = path / "results.csv", path / "results.json"
    with open(csv_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(result_rows(results))
    doc = {
        "config": config or {},
        "environment": {
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "platform": platform.platform(),
        },
        "results": [
            {
                "dataset": r.dataset, "method": r.method, "operator": r.operator,
                "L": r.L, "selection": r.selection, "mean": _json_float(r.mean),
                "stderr": _json_float(r.stderr),
                "accuracies": [_json_float(a) for a in r.accuracies],
                "seeds": r.seeds, "errors": r.errors, "meta": r.meta,
            }
            for r in results
        ],
    }
    json_path.write_text(json.dumps(doc, indent=2, default=_json_default) + "\n")
    return csv_path, json_path


def _json_float(x):
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else x


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
