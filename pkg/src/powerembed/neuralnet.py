"""Small numpy neural networks with hand-written backward passes.

Three models share one training loop:

* :class:`Mlp`, a 2-layer ReLU perceptron,
* :class:`InceptionModel`, one MLP per feature block whose outputs are
  concatenated and fed to an affine classifier,
* :class:`GcnModel`, a graph convolutional network ``relu(S h W + b)``.

Everything is float64 and full batch. Training is deterministic for a
given :attr:`TrainConfig.seed`.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidLabel, ShapeError
from .random_graphs import make_rng

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class TrainConfig:
    epochs: int = 100
    lr: float = 0.01
    dropout: float = 0.5
    weight_decay: float = 0.0
    seed: int = 0
    hidden: int = 64

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must lie in [0, 1)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


def _linear_init(rng, fan_in: int, fan_out: int):
    # uniform(+-1/sqrt(fan_in)) for weight and bias, the usual Linear default
    bound = 1.0 / np.sqrt(fan_in)
    W = rng.uniform(-bound, bound, size=(fan_in, fan_out))
    b = rng.uniform(-bound, bound, size=fan_out)
    return W, b


def dropout_mask(rng, shape, rate: float) -> np.ndarray | None:
    """Inverted-dropout multiplier: 0 with prob ``rate``, else ``1/(1-rate)``."""
    if rate <= 0:
        return None
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


# -- MLP ----------------------------------------------------------------------

@dataclass
class Mlp:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    @classmethod
    def init(cls, n_in: int, n_hidden: int, n_out: int, rng) -> "Mlp":
        W1, b1 = _linear_init(rng, n_in, n_hidden)
        W2, b2 = _linear_init(rng, n_hidden, n_out)
        return cls(W1, b1, W2, b2)

    @property
    def in_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def out_dim(self) -> int:
        return self.W2.shape[1]

    def params(self) -> list:
        return [self.W1, self.b1, self.W2, self.b2]

    def forward(self, X, mask=None):
        return mlp_forward(self, X, mask)

    def backward(self, cache, dout):
        return mlp_backward(self, cache, dout)

    def hidden_shape(self, m: int):
        return (m, self.hidden_dim)


def mlp_forward(m: Mlp, X, dropout_mask=None):
    """``relu(X W1 + b1) [* mask] W2 + b2``; returns ``(out, cache)``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != m.in_dim:
        raise ShapeError(f"MLP expects {m.in_dim} input columns, got shape {X.shape}")
    Z1 = X @ m.W1 + m.b1
    H = np.maximum(Z1, 0.0)
    if dropout_mask is not None:
        H = H * dropout_mask
    out = H @ m.W2 + m.b2
    return out, (X, Z1, H, dropout_mask)


def mlp_backward(m: Mlp, cache, dout):
    """Gradients ``[dW1, db1, dW2, db2]`` and the input gradient ``dX``."""
    X, Z1, H, mask = cache
    dW2 = H.T @ dout
    db2 = dout.sum(axis=0)
    dH = dout @ m.W2.T
    if mask is not None:
        dH = dH * mask
    dZ1 = dH * (Z1 > 0)
    dW1 = X.T @ dZ1
    db1 = dZ1.sum(axis=0)
    dX = dZ1 @ m.W1.T
    return [dW1, db1, dW2, db2], dX


# -- inception network --------------------------------------------------------

@dataclass
class InceptionModel:
    """Per-block MLPs ``k_i -> k' -> k'`` feeding an affine ``(B k') -> K`` head."""

    block_mlps: list
    W: np.ndarray
    b: np.ndarray
    dropout_rate: float = 0.0
    loss_history: list = field(default_factory=list, repr=False)

    @classmethod
    def init(cls, widths: Sequence[int], hidden: int, n_classes: int, rng,
             dropout_rate: float = 0.0) -> "InceptionModel":
        mlps = [Mlp.init(w, hidden, hidden, rng) for w in widths]
        W, b = _linear_init(rng, hidden * len(widths), n_classes)
        return cls(mlps, W, b, dropout_rate)

    def params(self) -> list:
        out = []
        for mlp in self.block_mlps:
            out.extend(mlp.params())
        return out + [self.W, self.b]

    def sample_masks(self, rng, m: int):
        if self.dropout_rate <= 0:
            return None
        return {
            "blocks": [dropout_mask(rng, mlp.hidden_shape(m), self.dropout_rate)
                       for mlp in self.block_mlps],
            "concat": dropout_mask(rng, (m, self.W.shape[0]), self.dropout_rate),
        }

    def forward(self, blocks, masks=None):
        return inception_forward(self, blocks, masks)

    def backward(self, cache, dlogits):
        return inception_backward(self, cache, dlogits)


def inception_forward(model: InceptionModel, blocks, masks=None):
    """Logits ``g(concat(f_0(P[0]), ..., f_L(P[L])))``; returns ``(logits, cache)``."""
    blocks = list(blocks)
    if len(blocks) != len(model.block_mlps):
        raise ShapeError(f"model has {len(model.block_mlps)} block MLPs, "
                         f"got {len(blocks)} feature blocks")
    caches, outs = [], []
    for i, (mlp, P) in enumerate(zip(model.block_mlps, blocks)):
        bm = masks["blocks"][i] if masks else None
        o, c = mlp_forward(mlp, P, bm)
        outs.append(o)
        caches.append(c)
    H = np.hstack(outs)
    cm = masks["concat"] if masks else None
    Hd = H * cm if cm is not None else H
    logits = Hd @ model.W + model.b
    return logits, (caches, Hd, cm)


def inception_backward(model: InceptionModel, cache, dlogits):
    caches, Hd, cm = cache
    dW = Hd.T @ dlogits
    db = dlogits.sum(axis=0)
    dH = dlogits @ model.W.T
    if cm is not None:
        dH = dH * cm
    grads = []
    offset = 0
    for mlp, c in zip(model.block_mlps, caches):
        w = mlp.out_dim
        g, _ = mlp_backward(mlp, c, dH[:, offset:offset + w])
        grads.extend(g)
        offset += w
    return grads + [dW, db]


# -- GCN ----------------------------------------------------------------------

@dataclass
class GcnModel:
    """``h_l = relu(S h_{l-1} W_l + b_l)`` for each layer, then ``h_L W + b``.

    ``S`` is supplied at call time (sparse symmetric Laplacian in practice).
    """

    weights: list
    biases: list
    W_out: np.ndarray
    b_out: np.ndarray
    dropout_rate: float = 0.0
    loss_history: list = field(default_factory=list, repr=False)

    @classmethod
    def init(cls, n_in: int, hidden: int, n_classes: int, depth: int, rng,
             dropout_rate: float = 0.0) -> "GcnModel":
        if depth < 1:
            raise ValueError("GCN depth must be >= 1")
        weights, biases = [], []
        width = n_in
        for _ in range(depth):
            W, b = _linear_init(rng, width, hidden)
            weights.append(W)
            biases.append(b)
            width = hidden
        W_out, b_out = _linear_init(rng, hidden, n_classes)
        return cls(weights, biases, W_out, b_out, dropout_rate)

    @property
    def depth(self) -> int:
        return len(self.weights)

    def params(self) -> list:
        out = []
        for W, b in zip(self.weights, self.biases):
            out.extend([W, b])
        return out + [self.W_out, self.b_out]

    def sample_masks(self, rng, n: int):
        if self.dropout_rate <= 0:
            return None
        return [dropout_mask(rng, (n, W.shape[1]), self.dropout_rate)
                for W in self.weights]

    def forward(self, S, X, masks=None):
        h = np.asarray(X, dtype=np.float64)
        if h.shape[1] != self.weights[0].shape[0]:
            raise ShapeError("feature width does not match the first GCN layer")
        cache = []
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            Sh = np.asarray(S @ h)
            Z = Sh @ W + b
            a = np.maximum(Z, 0.0)
            mask = masks[l] if masks else None
            if mask is not None:
                a = a * mask
            cache.append((Sh, Z, mask))
            h = a
        logits = h @ self.W_out + self.b_out
        return logits, (cache, h)

    def backward(self, S, cache, dlogits):
        layers, h = cache
        dW_out = h.T @ dlogits
        db_out = dlogits.sum(axis=0)
        dh = dlogits @ self.W_out.T
        grads = []
        for l in range(self.depth - 1, -1, -1):
            Sh, Z, mask = layers[l]
            if mask is not None:
                dh = dh * mask
            dZ = dh * (Z > 0)
            grads.append([Sh.T @ dZ, dZ.sum(axis=0)])
            # S is symmetric, so S^T dZ = S dZ
            dh = np.asarray(S.T @ (dZ @ self.weights[l].T))
        flat = []
        for pair in reversed(grads):
            flat.extend(pair)
        return flat + [dW_out, db_out]


# -- loss, optimizer, metrics -------------------------------------------------

def cross_entropy(logits, labels, n_classes: int | None = None):
    """Mean softmax cross-entropy and its gradient ``(softmax - onehot) / m``."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    m, K = logits.shape
    if labels.shape != (m,):
        raise ShapeError(f"expected {m} labels, got shape {labels.shape}")
    if m and (labels.min() < 0 or labels.max() >= K):
        raise InvalidLabel(f"labels must lie in [0, {K})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1))
    logp = shifted - logsumexp[:, None]
    loss = -logp[np.arange(m), labels].mean()
    grad = np.exp(logp)
    grad[np.arange(m), labels] -= 1.0
    return float(loss), grad / m


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls([np.zeros_like(p) for p in params],
                   [np.zeros_like(p) for p in params])


def adam_step(params, grads, state: AdamState, lr: float, t: int | None = None,
              weight_decay: float = 0.0) -> AdamState:
    """One in-place Adam update with bias correction.

    ``t`` is the 1-based step count; by default ``state.t + 1``. Weight
    decay is added to the gradient as a plain L2 term.
    """
    t = state.t + 1 if t is None else t
    b1c = 1.0 - ADAM_BETA1 ** t
    b2c = 1.0 - ADAM_BETA2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if weight_decay:
            g = g + weight_decay * p
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g * g
        p -= lr * (m / b1c) / (np.sqrt(v / b2c) + ADAM_EPS)
    state.t = t
    return state


def predict(model, blocks) -> np.ndarray:
    """Argmax class per row; ties go to the lowest class index."""
    if isinstance(model, Mlp):
        X = blocks[0] if isinstance(blocks, (list, tuple)) else blocks
        logits, _ = mlp_forward(model, X)
    else:
        logits, _ = inception_forward(model, blocks)
    return np.argmax(logits, axis=1)


def accuracy(pred, truth) -> float:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.size == 0:
        return float("nan")
    return float(np.mean(pred == truth))


# -- training -----------------------------------------------------------------

def _n_classes(y, n_classes):
    return int(n_classes) if n_classes is not None else int(np.max(y)) + 1


def train_inception(blocks, y, cfg: TrainConfig, n_classes: int | None = None
                    ) -> InceptionModel:
    """Full-batch Adam on the inception network over the training rows."""
    blocks = [np.asarray(b, dtype=np.float64) for b in blocks]
    y = np.asarray(y, dtype=np.int64)
    if not len(y):
        raise ShapeError("no training rows")
    rng = make_rng(cfg.seed)
    model = InceptionModel.init([b.shape[1] for b in blocks], cfg.hidden,
                                _n_classes(y, n_classes), rng, cfg.dropout)
    params = model.params()
    state = AdamState.zeros_like(params)
    for _ in range(cfg.epochs):
        masks = model.sample_masks(rng, len(y))
        logits, cache = inception_forward(model, blocks, masks)
        loss, dlogits = cross_entropy(logits, y)
        model.loss_history.append(loss)
        adam_step(params, inception_backward(model, cache, dlogits), state, cfg.lr,
                  weight_decay=cfg.weight_decay)
    return model


def train_mlp(X, y, cfg: TrainConfig, n_classes: int | None = None) -> Mlp:
    """Plain 2-layer ReLU MLP ``k -> k' -> K`` for single-matrix embeddings."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    rng = make_rng(cfg.seed)
    model = Mlp.init(X.shape[1], cfg.hidden, _n_classes(y, n_classes), rng)
    params = model.params()
    state = AdamState.zeros_like(params)
    model.loss_history = []
    for _ in range(cfg.epochs):
        mask = dropout_mask(rng, model.hidden_shape(len(y)), cfg.dropout)
        logits, cache = mlp_forward(model, X, mask)
        loss, dlogits = cross_entropy(logits, y)
        model.loss_history.append(loss)
        grads, _ = mlp_backward(model, cache, dlogits)
        adam_step(params, grads, state, cfg.lr, weight_decay=cfg.weight_decay)
    return model


def train_gcn(S, X, y, train_idx, depth: int, cfg: TrainConfig,
              n_classes: int | None = None) -> GcnModel:
    """End-to-end GCN; the loss only sees ``train_idx`` rows."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    train_idx = np.asarray(train_idx, dtype=np.int64)
    rng = make_rng(cfg.seed)
    K = _n_classes(y[train_idx], n_classes)
    model = GcnModel.init(X.shape[1], cfg.hidden, K, depth, rng, cfg.dropout)
    params = model.params()
    state = AdamState.zeros_like(params)
    n = X.shape[0]
    for _ in range(cfg.epochs):
        masks = model.sample_masks(rng, n)
        logits, cache = model.forward(S, X, masks)
        loss, dtrain = cross_entropy(logits[train_idx], y[train_idx], K)
        model.loss_history.append(loss)
        dlogits = np.zeros_like(logits)
        dlogits[train_idx] = dtrain
        adam_step(params, model.backward(S, cache, dlogits), state, cfg.lr,
                  weight_decay=cfg.weight_decay)
    return model


def gcn_train_eval(g, X, y, split, depth: int, cfg: TrainConfig,
                   n_classes: int | None = None) -> float:
    """Train a GCN on ``split.train_idx`` and return test accuracy.

    ``split`` is any object with ``train_idx`` and ``test_idx``.
    """
    from .graph import DENSE_LIMIT, OperatorKind, operator_sparse

    S = operator_sparse(OperatorKind.SYM_LAPLACIAN, g)
    if g.n <= DENSE_LIMIT and S.nnz > 0.05 * g.n * g.n:
        # BLAS beats scipy's single-threaded sparse product on dense graphs
        S = S.toarray()
    y = np.asarray(y, dtype=np.int64)
    K = _n_classes(y, n_classes)
    model = train_gcn(S, X, y, split.train_idx, depth, cfg, K)
    logits, _ = model.forward(S, X)
    test = np.asarray(split.test_idx, dtype=np.int64)
    return accuracy(np.argmax(logits[test], axis=1), y[test])


# -- gradient verification --------------------------------------------------

def numerical_gradient(f, p: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of the scalar ``f()`` w.r.t. ``p``.

    ``p`` is perturbed in place and restored.
    """
    grad = np.zeros_like(p)
    flat, gflat = p.reshape(-1), grad.reshape(-1)
    for j in range(flat.size):
        old = flat[j]
        flat[j] = old + eps
        fp = f()
        flat[j] = old - eps
        fm = f()
        flat[j] = old
        gflat[j] = (fp - fm) / (2 * eps)
    return grad


def gradient_check(f, params, grads, eps: float = 1e-5) -> float:
    """Largest per-tensor relative error between ``grads`` and central differences.

    Relative error of a tensor is ``|g - g_num| / max(|g|, |g_num|)`` in the
    Frobenius norm; tensors whose gradients are both below 1e-12 count as 0.
    """
    worst = 0.0
    for p, g in zip(params, grads):
        num = numerical_gradient(f, p, eps)
        scale = max(np.linalg.norm(g), np.linalg.norm(num))
        if scale < 1e-12:
            continue
        worst = max(worst, float(np.linalg.norm(g - num) / scale))
    return worst


# -- checkpoints --------------------------------------------------------------

def save_model(model, path, config: TrainConfig | None = None) -> None:
    """JSON header (type, shapes, config) plus flat parameter lists.

    Floats are written with ``repr`` so the round trip is exact.
    """
    if isinstance(model, InceptionModel):
        kind = "inception"
        extra = {"num_blocks": len(model.block_mlps), "dropout": model.dropout_rate}
    elif isinstance(model, GcnModel):
        kind = "gcn"
        extra = {"depth": model.depth, "dropout": model.dropout_rate}
    elif isinstance(model, Mlp):
        kind, extra = "mlp", {}
    else:
        raise TypeError(f"cannot checkpoint {type(model).__name__}")
    params = model.params()
    doc = {
        "type": kind,
        **extra,
        "config": asdict(config) if config is not None else None,
        "shapes": [list(p.shape) for p in params],
        "params": [p.ravel().tolist() for p in params],
    }
    Path(path).write_text(json.dumps(doc))


def load_model(path):
    doc = json.loads(Path(path).read_text())
    arrays = [np.asarray(flat, dtype=np.float64).reshape(shape)
              for flat, shape in zip(doc["params"], doc["shapes"])]
    kind = doc["type"]
    if kind == "mlp":
        return Mlp(*arrays)
    if kind == "inception":
        nb = doc["num_blocks"]
        mlps = [Mlp(*arrays[4 * i:4 * i + 4]) for i in range(nb)]
        return InceptionModel(mlps, arrays[-2], arrays[-1], doc["dropout"])
    if kind == "gcn":
        d = doc["depth"]
        return GcnModel(arrays[0:2 * d:2], arrays[1:2 * d:2], arrays[-2], arrays[-1],
                        doc["dropout"])
    raise ValueError(f"unknown checkpoint type {kind!r}")
