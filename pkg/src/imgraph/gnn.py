"""Small graph convolutional classifier with hand-written gradients.

Each layer computes ``H' = ReLU(norm(Ahat H W))`` where
``Ahat = D^{-1/2} (A + I) D^{-1/2}``.  ``norm`` standardizes every channel
over the nodes of one graph and applies a learned scale and shift
(``norm="node"``), or only adds a learned shift (``norm="none"``).  Graph
logits come from mean pooling over nodes followed by a linear layer.

Mini-batches are evaluated as one block-diagonal propagation; losses are
summed over graphs by :meth:`GCN.loss_and_grads` and averaged per batch by
:func:`train`.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import EmptyDataset, InputContractError, ShapeMismatch

NORM_VARIANTS = ("node", "none")


@dataclass(frozen=True)
class GcnConfig:
    layer_dims: tuple = (64, 64, 64)
    num_classes: int = 10
    learning_rate: float = 1e-3
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0
    weight_init_scale: float = 1.0
    norm: str = "node"
    eps: float = 1e-5
    dtype: str = "float64"

    def __post_init__(self):
        object.__setattr__(self, "layer_dims", tuple(int(d) for d in self.layer_dims))
        if not self.layer_dims:
            raise InputContractError("layer_dims must be non-empty")
        if self.learning_rate <= 0:
            raise InputContractError("learning_rate must be positive")
        if self.norm not in NORM_VARIANTS:
            raise InputContractError(f"norm must be one of {NORM_VARIANTS}")
        if self.dtype not in ("float32", "float64"):
            raise InputContractError("dtype must be float32 or float64")
        if self.batch_size < 1 or self.epochs < 0:
            raise InputContractError("batch_size must be >= 1 and epochs >= 0")

    @classmethod
    def pyramid(cls, **kw) -> "GcnConfig":
        """The seven-layer 64 -> 1024 pyramid; far too slow for desk runs."""
        return cls(layer_dims=(64, 128, 256, 512, 1024, 1024, 1024), **kw)


def normalize_adjacency(A) -> np.ndarray:
    """Dense ``D^{-1/2} (A + I) D^{-1/2}``; existing self-loops end up weighted 2."""
    A = np.asarray(A, dtype=np.float64)
    A_hat = A + np.eye(len(A))
    d = 1.0 / np.sqrt(A_hat.sum(axis=1))
    return d[:, None] * A_hat * d[None, :]


def normalize_adjacency_sparse(A) -> sp.csr_matrix:
    A = sp.csr_matrix(A, dtype=np.float64)
    A_hat = A + sp.identity(A.shape[0], format="csr")
    d = 1.0 / np.sqrt(np.asarray(A_hat.sum(axis=1)).ravel())
    return sp.csr_matrix(sp.diags(d) @ A_hat @ sp.diags(d))


@dataclass
class NormalizedGraph:
    adj: sp.csr_matrix  # normalized adjacency
    x: object  # (n, f) ndarray or anything supporting ``x @ W`` and ``x.T``
    y: int = 0

    @classmethod
    def from_adjacency(cls, A, x, y: int = 0) -> "NormalizedGraph":
        return cls(normalize_adjacency_sparse(A), x, int(y))

    @property
    def num_nodes(self) -> int:
        return self.adj.shape[0]

    def astype(self, dtype) -> "NormalizedGraph":
        if self.adj.dtype == dtype and self.x.dtype == dtype:
            return self
        return NormalizedGraph(self.adj.astype(dtype), self.x.astype(dtype), self.y)

    @property
    def feature_dim(self) -> int:
        return self.x.shape[1]


@dataclass
class Batch:
    adj: sp.csr_matrix
    xs: list
    counts: np.ndarray
    starts: np.ndarray
    y: np.ndarray

    @classmethod
    def collate(cls, graphs) -> "Batch":
        counts = np.array([g.num_nodes for g in graphs])
        for g in graphs:
            if g.x.shape[0] != g.num_nodes:
                raise ShapeMismatch(f"{g.x.shape[0]} feature rows for {g.num_nodes} nodes")
        adj = graphs[0].adj if len(graphs) == 1 else sp.block_diag([g.adj for g in graphs], format="csr")
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        return cls(adj, [g.x for g in graphs], counts, starts, np.array([g.y for g in graphs]))

    @property
    def uniform(self) -> bool:
        return bool((self.counts == self.counts[0]).all())

    def seg_mean(self, Z):
        """Per-graph mean over nodes, shape (B, d)."""
        if self.uniform:
            return Z.reshape(len(self.counts), self.counts[0], -1).mean(axis=1)
        return np.add.reduceat(Z, self.starts, axis=0) / self.counts[:, None].astype(Z.dtype)

    def expand(self, per_graph):
        return np.repeat(per_graph, self.counts, axis=0)

    def combine(self, Z, per_graph, op):
        """``op(Z, per_graph broadcast to the nodes of each graph)``."""
        if self.uniform:
            B, n = len(self.counts), self.counts[0]
            return op(Z.reshape(B, n, -1), per_graph[:, None, :]).reshape(B * n, -1)
        return op(Z, self.expand(per_graph))


def _softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits, labels) -> np.ndarray:
    """Per-row softmax cross-entropy."""
    logits = np.atleast_2d(logits)
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return -logp[np.arange(len(logits)), np.asarray(labels)]


class GCN:
    def __init__(self, in_dim: int, cfg: GcnConfig, params: dict | None = None):
        self.in_dim = in_dim
        self.cfg = cfg
        self.params = params if params is not None else self.init_params(in_dim, cfg)

    @staticmethod
    def init_params(in_dim, cfg: GcnConfig, rng=None) -> dict:
        rng = np.random.default_rng(cfg.seed) if rng is None else rng

        def glorot(fan_in, fan_out):
            s = cfg.weight_init_scale * np.sqrt(6.0 / (fan_in + fan_out))
            return rng.uniform(-s, s, size=(fan_in, fan_out))

        params = {}
        dims = (in_dim,) + cfg.layer_dims
        for l, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
            params[f"W{l}"] = glorot(a, b)
            if cfg.norm == "node":
                params[f"gamma{l}"] = np.ones(b)
            params[f"beta{l}"] = np.zeros(b)
        params["W_out"] = glorot(dims[-1], cfg.num_classes)
        params["b_out"] = np.zeros(cfg.num_classes)
        return {k: v.astype(cfg.dtype) for k, v in params.items()}

    @property
    def num_layers(self) -> int:
        return len(self.cfg.layer_dims)

    def forward(self, batch: Batch, keep_cache: bool = False):
        p, cfg = self.params, self.cfg
        if batch.xs[0].shape[1] != p["W0"].shape[0]:
            raise ShapeMismatch(f"feature dim {batch.xs[0].shape[1]} but W0 expects {p['W0'].shape[0]}")
        cache = []
        H = None
        for l in range(self.num_layers):
            W = p[f"W{l}"]
            if l == 0:
                P = np.vstack([x @ W for x in batch.xs])
            else:
                P = H @ W
            Z = batch.adj @ P
            if cfg.norm == "node":
                centered = batch.combine(Z, batch.seg_mean(Z), np.subtract)
                inv_std = 1.0 / np.sqrt(batch.seg_mean(centered * centered) + cfg.eps)
                Zhat = batch.combine(centered, inv_std, np.multiply)
                Y = Zhat * p[f"gamma{l}"]
                Y += p[f"beta{l}"]
            else:
                Zhat, inv_std = None, None
                Y = Z + p[f"beta{l}"]
            H_in = H
            H = np.maximum(Y, 0, out=Z)
            if keep_cache:
                cache.append((H_in, Zhat, inv_std, Y))
        R = batch.seg_mean(H)
        logits = R @ p["W_out"] + p["b_out"]
        if keep_cache:
            return logits, (cache, H, R)
        return logits

    def loss_and_grads(self, batch: Batch):
        """Summed cross-entropy over the batch, its gradients and the logits."""
        p, cfg = self.params, self.cfg
        logits, (cache, H_last, R) = self.forward(batch, keep_cache=True)
        losses = cross_entropy(logits, batch.y)
        dlogits = _softmax(logits)
        dlogits[np.arange(len(batch.y)), batch.y] -= 1.0

        grads = {"W_out": R.T @ dlogits, "b_out": dlogits.sum(axis=0)}
        dR = (dlogits @ p["W_out"].T) / batch.counts[:, None].astype(dlogits.dtype)
        dH = batch.combine(np.zeros((batch.counts.sum(), dR.shape[1]), dtype=dR.dtype), dR, np.add)
        for l in reversed(range(self.num_layers)):
            H_in, Zhat, inv_std, Y = cache[l]
            dY = np.where(Y > 0, dH, 0).astype(dH.dtype, copy=False)
            grads[f"beta{l}"] = dY.sum(axis=0)
            if cfg.norm == "node":
                grads[f"gamma{l}"] = (dY * Zhat).sum(axis=0)
                dZhat = dY * p[f"gamma{l}"]
                m1 = batch.seg_mean(dZhat)
                m2 = batch.seg_mean(dZhat * Zhat)
                dZ = batch.combine(dZhat, m1, np.subtract)
                dZ -= batch.combine(Zhat, m2, np.multiply)
                dZ = batch.combine(dZ, inv_std, np.multiply)
            else:
                dZ = dY
            # the normalized adjacency is symmetric
            dP = batch.adj @ dZ
            W = p[f"W{l}"]
            if l == 0:
                grads["W0"] = sum(x.T @ dP[s:s + n] for x, s, n in zip(batch.xs, batch.starts, batch.counts))
            else:
                grads[f"W{l}"] = H_in.T @ dP
                dH = dP @ W.T
        return float(losses.sum()), grads, logits

    def predict(self, graphs, batch_size: int = 64) -> np.ndarray:
        out = []
        dtype = np.dtype(self.cfg.dtype)
        for k in range(0, len(graphs), batch_size):
            chunk = [g.astype(dtype) for g in graphs[k:k + batch_size]]
            out.append(self.forward(Batch.collate(chunk)))
        return np.vstack(out)


def gcn_forward(g: NormalizedGraph, params: dict, cfg: GcnConfig | None = None) -> np.ndarray:
    cfg = cfg or GcnConfig()
    return GCN(g.feature_dim, cfg, params).forward(Batch.collate([g]))[0]


def gcn_backward(g: NormalizedGraph, params: dict, label: int, cfg: GcnConfig | None = None) -> dict:
    cfg = cfg or GcnConfig()
    g = NormalizedGraph(g.adj, g.x, int(label))
    _, grads, _ = GCN(g.feature_dim, cfg, params).loss_and_grads(Batch.collate([g]))
    return grads


class Adam:
    def __init__(self, params: dict, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for k in sorted(params):
            g = grads[k]
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            m_hat = self.m[k] / (1 - b1 ** self.t)
            v_hat = self.v[k] / (1 - b2 ** self.t)
            params[k] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class TrainReport:
    config: GcnConfig
    epoch_loss: list = field(default_factory=list)
    epoch_train_acc: list = field(default_factory=list)
    test_accuracy: float | None = None
    seconds: float = 0.0
    tags: dict = field(default_factory=dict)

    TSV_COLUMNS = ("graph_type", "feature_type", "seed", "layers", "lr", "epochs",
                   "batch", "norm", "final_train_loss", "final_train_acc", "test_acc")

    def tsv_row(self) -> str:
        c = self.config
        vals = (self.tags.get("graph_type", ""), self.tags.get("feature_type", ""), c.seed,
                "x".join(map(str, c.layer_dims)), repr(c.learning_rate), c.epochs, c.batch_size,
                c.norm, repr(self.epoch_loss[-1]) if self.epoch_loss else "",
                repr(self.epoch_train_acc[-1]) if self.epoch_train_acc else "",
                repr(self.test_accuracy))
        return "\t".join(map(str, vals))

    def to_text(self) -> str:
        """Key-value report; wall-clock time is left out so reruns are byte-identical."""
        lines = [f"{k}={v}" for k, v in sorted(self.tags.items())]
        for k, v in asdict(self.config).items():
            lines.append(f"config.{k}={','.join(map(str, v)) if isinstance(v, tuple) else v!r}")
        for e, (loss, acc) in enumerate(zip(self.epoch_loss, self.epoch_train_acc), 1):
            lines.append(f"epoch.{e}=loss:{loss!r} train_acc:{acc!r}")
        lines.append(f"test_acc={self.test_accuracy!r}")
        lines.append("tsv.header=" + "\t".join(self.TSV_COLUMNS))
        lines.append("tsv.row=" + self.tsv_row())
        return "\n".join(lines) + "\n"


def evaluate(model: GCN, test) -> float:
    """Fraction of graphs whose argmax logit (lowest class on ties) is the label."""
    if len(test) == 0:
        raise EmptyDataset("cannot evaluate on an empty test set")
    logits = model.predict(test)
    return float(np.mean(np.argmax(logits, axis=1) == np.array([g.y for g in test])))


def train(dataset, cfg: GcnConfig, test=None, tags: dict | None = None, log=None):
    """Adam on shuffled mini-batches; batch order is a pure function of ``cfg.seed``.

    Returns ``(model, report)``.
    """
    if len(dataset) == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    dims = {g.feature_dim for g in dataset}
    if len(dims) != 1:
        raise ShapeMismatch(f"graphs disagree on feature dim: {sorted(dims)}")
    t0 = time.perf_counter()
    dtype = np.dtype(cfg.dtype)
    dataset = [g.astype(dtype) for g in dataset]
    rng = np.random.default_rng(cfg.seed)
    model = GCN(dims.pop(), cfg, GCN.init_params(dataset[0].feature_dim, cfg, rng))
    opt = Adam(model.params, cfg.learning_rate)
    report = TrainReport(cfg, tags=dict(tags or {}))
    n = len(dataset)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total_loss, correct = 0.0, 0
        for k in range(0, n, cfg.batch_size):
            batch = Batch.collate([dataset[i] for i in order[k:k + cfg.batch_size]])
            loss, grads, logits = model.loss_and_grads(batch)
            scale = dtype.type(1.0 / len(batch.y))
            opt.step(model.params, {name: g * scale for name, g in grads.items()})
            total_loss += loss
            correct += int((np.argmax(logits, axis=1) == batch.y).sum())
        report.epoch_loss.append(total_loss / n)
        report.epoch_train_acc.append(correct / n)
        if log:
            log(f"epoch {epoch + 1}/{cfg.epochs} loss={total_loss / n:.4f} train_acc={correct / n:.4f}")
    if test is not None:
        report.test_accuracy = evaluate(model, test)
    report.seconds = time.perf_counter() - t0
    return model, report
