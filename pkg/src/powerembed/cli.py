"""Command-line entry point.

Every subcommand only parses arguments, loads files and calls into
:mod:`powerembed.harness`. Exit codes: 0 success, 1 usage error,
2 runtime error. Messages go to stderr; data goes to files.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import harness
from .config import load_config
from .embeddings import EmbeddingList, embed, select_features
from .graph import OperatorKind
from .linalg import pca_reduce
from .neuralnet import TrainConfig, accuracy, predict, save_model, train_inception, train_mlp
from .random_graphs import GaussianMixtureParams, make_2b_sbm, make_rng, sample_features, sample_sbm

log = logging.getLogger("powerembed")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_train_flags(p):
    p.add_argument("--epochs", type=int, default=100, help="training epochs (default: %(default)s)")
    p.add_argument("--lr", type=float, default=0.01, help="Adam learning rate (default: %(default)s)")
    p.add_argument("--dropout", type=float, default=0.5, help="dropout rate (default: %(default)s)")
    p.add_argument("--weight-decay", type=float, default=0.0,
                   help="L2 weight decay (default: %(default)s)")
    p.add_argument("--hidden", type=int, default=64,
                   help="hidden width k' (default: %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="powerembed", description="PowerEmbed experiments")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    ops = [k.value for k in OperatorKind]

    p = sub.add_parser("gen-sbm", help="sample a 2-block SBM dataset directory",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--n", type=int, default=500, help="number of nodes (even)")
    p.add_argument("--p", type=float, default=0.5, help="within-block edge probability")
    p.add_argument("--q", type=float, default=0.25, help="cross-block edge probability")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--feature-dim", type=int, default=2, help="feature dimension m")
    p.add_argument("--mean", type=float, default=1.0,
                   help="block 0 mean is MEAN * ones(m); block 1 is its negative")
    p.add_argument("--covariance-scale", type=float, default=1.0,
                   help="feature covariance is SCALE * I")
    p.add_argument("--splits", type=int, default=10, help="number of splits to write")
    p.add_argument("--train-fraction", type=float, default=0.1,
                   help="stratified training fraction per split")
    p.add_argument("--out", required=True, help="output dataset directory")

    p = sub.add_parser("embed", help="compute an embedding list for a dataset",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--dataset", required=True, help="dataset directory")
    p.add_argument("--method", default="power",
                   choices=["power", "sign", "sgc", "unnormalized", "ase", "cov", "a_x"],
                   help="embedding method")
    p.add_argument("--operator", choices=ops, default="lap",
                   help="graph operator: adj=A, lap=sym. Laplacian, rw=random walk")
    p.add_argument("--layers", type=int, default=10, help="message-passing iterations L")
    p.add_argument("--k", type=int, default=None,
                   help="embedding width; features are PCA-reduced when wider")
    p.add_argument("--qr-fallback", action="store_true",
                   help="orthonormalize by QR when the Gram matrix is singular")
    p.add_argument("--out", required=True, help="output embedding directory")

    p = sub.add_parser("train", help="train classifiers on embeddings over all splits",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--embeddings", required=True, help="embedding directory")
    p.add_argument("--dataset", required=True, help="dataset directory (labels, splits)")
    p.add_argument("--selection", choices=["all", "last", "input-last"], default="all",
                   help="which blocks feed the classifier")
    _add_train_flags(p)
    p.add_argument("--seed", type=int, default=0, help="base training seed")
    p.add_argument("--save-model", default=None,
                   help="directory for per-split model checkpoints")
    p.add_argument("--out", required=True, help="output results directory")

    for name, helptext in (("convergence", "PowerEmbed angle curves on sampled SBMs"),
                           ("bench", "classification benchmark (SBM grid or [data])"),
                           ("oversmooth", "over-smoothing diagnostic table")):
        p = sub.add_parser(name, help=helptext,
                           formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        p.add_argument("--config", required=True, help="TOML config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override [output] dir")
        p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    return parser


# -- subcommands ----------------------------------------------------------------

def _gen_sbm(args):
    params = make_2b_sbm(args.n, args.p, args.q)
    rng = make_rng(args.seed)
    g = sample_sbm(params, rng)
    mu = args.mean * np.ones(args.feature_dim)
    gm = GaussianMixtureParams.isotropic(np.stack([mu, -mu]), args.covariance_scale)
    X = sample_features(params.memberships, gm, rng)
    y = params.memberships
    splits = [harness.stratified_split(y, (args.train_fraction, 1 - args.train_fraction),
                                       args.seed + i) for i in range(args.splits)]
    ds = harness.Dataset(g, X, y, splits, name=Path(args.out).name)
    harness.save_dataset(ds, args.out)
    log.info("wrote %s: n=%d edges=%d homophily=%.3f", args.out, g.n, g.num_edges,
             ds.homophily)


def _embed(args):
    ds = harness.load_dataset(args.dataset)
    X = ds.X
    k = args.k or X.shape[1]
    if k > X.shape[1]:
        raise ValueError(f"k={k} exceeds the feature dimension {X.shape[1]}")
    if k < X.shape[1]:
        X = pca_reduce(X, k)
    kind = OperatorKind.parse(args.operator)
    P = embed(args.method, ds.graph, X, L=args.layers, k=k, kind=kind,
              qr_fallback=args.qr_fallback)
    P.save(args.out)
    log.info("wrote %s: %d blocks of width %s", args.out, len(P), P.widths())


def _train(args):
    ds = harness.load_dataset(args.dataset)
    P = EmbeddingList.load(args.embeddings)
    if P.n != ds.graph.n:
        raise ValueError(f"embeddings have {P.n} rows, dataset has {ds.graph.n} nodes")
    is_list = P.method in ("power", "sign", "sgc", "unnormalized")
    if is_list:
        P = select_features(P, args.selection)
    results_acc, walls, seeds = [], [], []
    for i, split in enumerate(ds.splits):
        cfg = TrainConfig(epochs=args.epochs, lr=args.lr, dropout=args.dropout,
                          weight_decay=args.weight_decay, seed=args.seed + i,
                          hidden=args.hidden)
        t0 = time.perf_counter()
        tr, te = split.train_idx, split.test_idx
        if is_list:
            model = train_inception(P.rows(tr), ds.y[tr], cfg, ds.n_classes)
            acc = accuracy(predict(model, P.rows(te)), ds.y[te])
        else:
            model = train_mlp(P[0][tr], ds.y[tr], cfg, ds.n_classes)
            acc = accuracy(predict(model, P[0][te]), ds.y[te])
        walls.append((time.perf_counter() - t0) * 1e3)
        results_acc.append(acc)
        seeds.append(cfg.seed)
        if args.save_model:
            Path(args.save_model).mkdir(parents=True, exist_ok=True)
            save_model(model, Path(args.save_model) / f"model_{i}.json", cfg)
    res = harness.ExperimentResult(
        dataset=ds.name, method=P.method, operator=P.operator, L=P.L,
        selection=args.selection if is_list else "all", accuracies=results_acc,
        seeds=seeds, splits=list(range(len(ds.splits))), wall_ms=walls)
    harness.emit_results([res], args.out, config=vars(args))
    log.info("%s", res.summary())


def _train_config(cfg) -> TrainConfig:
    return TrainConfig(**cfg["train"])


def _sbm_grid(cfg) -> harness.SbmGrid:
    s = cfg["sbm"]
    common = dict(n=s["n"], trials=s["trials"], mean=tuple(s["means"]),
                  covariance_scale=s["covariance_scale"],
                  train_fraction=s["train_fraction"])
    if "scenarios" in s:
        sc = [harness.SbmScenario(d.get("name", f"p={d['p']},q={d['q']}"), d["p"], d["q"])
              for d in s["scenarios"]]
        return harness.SbmGrid(scenarios=sc, **common)
    if "densities" in s:
        return harness.SbmGrid.density_sweep(s["densities"],
                                             heterophilous=s.get("heterophilous", False),
                                             **common)
    return harness.SbmGrid(scenarios=[harness.SbmScenario(
        f"p={s['p']},q={s['q']}", s["p"], s["q"])], **common)


def _convergence(args, cfg):
    s, c = cfg["sbm"], cfg["convergence"]
    params = make_2b_sbm(s["n"], s["p"], s["q"])
    k = c["k"]
    mu = np.asarray(s["means"], dtype=np.float64)
    if mu.shape != (k,):
        mu = np.ones(k) * float(mu.ravel()[0])
    gm = GaussianMixtureParams.isotropic(np.stack([mu, -mu]), s["covariance_scale"])
    res = harness.convergence_experiment(params, c["operator"], k, c["L"], s["trials"],
                                         s["seed"], gm=gm, reference=c["reference"],
                                         jobs=args.jobs)
    out = Path(cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    res.to_csv(out / "convergence.csv")
    log.info("mean largest angle at t=%d: %.3e", c["L"], res.mean_largest[-1])


def _bench(args, cfg):
    tcfg = _train_config(cfg)
    methods = [harness.MethodSpec.parse(m, cfg["methods"].get("selection"))
               for m in cfg["methods"]["list"]]
    if "data" in cfg:
        ds = harness.load_dataset(cfg["data"]["path"], seed=cfg["sbm"]["seed"])
        results = harness.realdata_experiment(ds, methods, tcfg, k=cfg["data"].get("k"),
                                              jobs=args.jobs)
    else:
        results = harness.sbm_classification_experiment(_sbm_grid(cfg), methods,
                                                        cfg["sbm"]["seed"], tcfg,
                                                        jobs=args.jobs)
    harness.emit_results(results, cfg["output"]["dir"], config=cfg)
    for r in results:
        log.info("%s", r.summary())


def _oversmooth(args, cfg):
    s, o = cfg["sbm"], cfg["oversmooth"]
    if "data" in cfg:
        ds = harness.load_dataset(cfg["data"]["path"], seed=s["seed"])
        X = ds.X
        k = cfg["data"].get("k") or min(X.shape[1], 2)
        if k < X.shape[1]:
            X = pca_reduce(X, k)
        g, y, split = ds.graph, ds.y, ds.splits[0]
    else:
        params = make_2b_sbm(s["n"], s["p"], s["q"])
        rng = make_rng(s["seed"])
        g = sample_sbm(params, rng)
        mu = np.asarray(s["means"], dtype=np.float64)
        gm = GaussianMixtureParams.isotropic(np.stack([mu, -mu]), s["covariance_scale"])
        X = sample_features(params.memberships, gm, rng)
        y = params.memberships
        split = harness.stratified_split(y, (s["train_fraction"], 1 - s["train_fraction"]),
                                         s["seed"])
    rows = harness.oversmoothing_diagnostic(g, X, o["depths"], o["operator"], y=y,
                                            split=split, cfg=_train_config(cfg))
    out = Path(cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "oversmooth.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    log.info("wrote %s", out / "oversmooth.csv")


def _load_cli_config(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["sbm"]["seed"] = args.seed
        cfg["train"]["seed"] = args.seed
    if args.out is not None:
        cfg["output"]["dir"] = args.out
    return cfg


def run(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        if args.command == "gen-sbm":
            _gen_sbm(args)
        elif args.command == "embed":
            _embed(args)
        elif args.command == "train":
            _train(args)
        else:
            cfg = _load_cli_config(args)
            {"convergence": _convergence, "bench": _bench,
             "oversmooth": _oversmooth}[args.command](args, cfg)
    except Exception as exc:  # noqa: BLE001 - reported, mapped to exit code 2
        print(f"powerembed {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
