"""Three-layer heterogeneous GNN for per-node speaking classification.

Node features are projected by a node-type specific matrix, then each layer
combines a self transform with one aggregated message per edge kind::

    h_i <- relu(W_self h_i + sum_k AGG_{j in N_k(i)} (W_k h_j) + b)

AGG is an elementwise mean or max chosen per layer. Gradients are derived by
hand; the module has no autodiff dependency.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from . import kernels
from .types import EDGE_KINDS, HeteroGraph

log = logging.getLogger(__name__)

MEAN, MAX = "mean", "max"
NUM_LAYERS = 3
CKPT_HEADER = "STHG-CKPT v1"


@dataclass(frozen=True)
class ModelConfig:
    d_av: int
    d_a: int
    d_h: int = 16
    agg_schedule: tuple[str, ...] = (MEAN, MEAN, MAX)
    learning_rate: float = 1e-2
    epochs: int = 30
    l2_weight: float = 1e-4
    momentum: float = 0.9
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "agg_schedule", tuple(self.agg_schedule))
        if min(self.d_av, self.d_a, self.d_h) <= 0:
            raise ValueError("dimensions must be positive")
        if len(self.agg_schedule) != NUM_LAYERS:
            raise ValueError(f"agg_schedule needs exactly {NUM_LAYERS} entries")
        if set(self.agg_schedule) != {MEAN, MAX}:
            raise ValueError("agg_schedule must use both 'mean' and 'max'")
        if self.learning_rate < 0 or self.epochs < 0 or self.l2_weight < 0:
            raise ValueError("learning_rate, epochs and l2_weight must be non-negative")


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    h = cfg.d_h
    shapes = {
        "P_vis": (h, cfg.d_av), "b_vis": (h,),
        "P_cw": (h, cfg.d_a), "b_cw": (h,),
    }
    for l in range(1, NUM_LAYERS + 1):
        shapes[f"W_self_{l}"] = (h, h)
        for k in EDGE_KINDS:
            shapes[f"W_{k.name}_{l}"] = (h, h)
        shapes[f"b_{l}"] = (h,)
    shapes["w_out"] = (1, h)
    shapes["b_out"] = (1,)
    return shapes


@dataclass
class ModelParams:
    tensors: dict[str, np.ndarray]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def names(self) -> list[str]:
        return list(self.tensors)

    def copy(self) -> "ModelParams":
        return ModelParams({k: v.copy() for k, v in self.tensors.items()})

    def zeros_like(self) -> "ModelParams":
        return ModelParams({k: np.zeros_like(v) for k, v in self.tensors.items()})

    def sq_norm(self) -> float:
        return float(sum(np.sum(v * v) for v in self.tensors.values()))

    def flat(self) -> np.ndarray:
        return np.concatenate([v.ravel() for v in self.tensors.values()])

    def equal(self, other: "ModelParams") -> bool:
        return self.names() == other.names() and all(
            np.array_equal(self[k], other[k]) for k in self.tensors
        )


def init_params(cfg: ModelConfig) -> ModelParams:
    """Glorot-uniform weights, zero biases; deterministic in ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    tensors = {}
    for name, shape in param_shapes(cfg).items():
        if len(shape) == 1:
            tensors[name] = np.zeros(shape)
        else:
            s = np.sqrt(6.0 / (shape[0] + shape[1]))
            tensors[name] = rng.uniform(-s, s, size=shape)
    return ModelParams(tensors)


def _check_inputs(g: HeteroGraph, cfg: ModelConfig) -> None:
    if len(g.vis_index) and g.x_vis.shape[1] != cfg.d_av:
        raise ValueError(f"visible feature dim {g.x_vis.shape[1]} != d_av {cfg.d_av}")
    if len(g.cw_index) and g.x_cw.shape[1] != cfg.d_a:
        raise ValueError(f"wearer feature dim {g.x_cw.shape[1]} != d_a {cfg.d_a}")
    if not (np.isfinite(g.x_vis).all() and np.isfinite(g.x_cw).all()):
        raise ValueError("non-finite node features")


@dataclass
class _Cache:
    pre0: np.ndarray
    hs: list = field(default_factory=list)  # layer inputs h^{l-1}
    pres: list = field(default_factory=list)
    args: list = field(default_factory=list)  # per layer: {kind: argmax or None}
    h_last: Optional[np.ndarray] = None


def _forward(g: HeteroGraph, p: ModelParams, cfg: ModelConfig) -> tuple[np.ndarray, _Cache]:
    _check_inputs(g, cfg)
    n = g.num_nodes
    pre0 = np.zeros((n, cfg.d_h))
    if len(g.vis_index):
        pre0[g.vis_index] = g.x_vis @ p["P_vis"].T + p["b_vis"]
    if len(g.cw_index):
        pre0[g.cw_index] = g.x_cw @ p["P_cw"].T + p["b_cw"]
    cache = _Cache(pre0)
    h = np.maximum(pre0, 0.0)
    for l, agg in enumerate(cfg.agg_schedule, 1):
        pre = h @ p[f"W_self_{l}"].T + p[f"b_{l}"]
        args = {}
        for k in EDGE_KINDS:
            indptr, src = g.incoming(k)
            if len(src) == 0:
                continue
            msg = h @ p[f"W_{k.name}_{l}"].T
            if agg == MEAN:
                pre += kernels.csr_mean(indptr, src, msg)
                args[k] = None
            else:
                out, arg = kernels.csr_max(indptr, src, msg)
                pre += out
                args[k] = arg
        cache.hs.append(h)
        cache.pres.append(pre)
        cache.args.append(args)
        h = np.maximum(pre, 0.0)
    cache.h_last = h
    logits = h @ p["w_out"][0] + p["b_out"][0]
    return logits, cache


def forward(g: HeteroGraph, p: ModelParams, cfg: ModelConfig) -> np.ndarray:
    """One logit per node, in node order."""
    return _forward(g, p, cfg)[0]


def predict(g: HeteroGraph, p: ModelParams, cfg: ModelConfig) -> np.ndarray:
    return expit(forward(g, p, cfg))


def _softplus_bce(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    z = logits
    return np.maximum(z, 0.0) - z * labels + np.log1p(np.exp(-np.abs(z)))


def bce_loss(logits, labels, params: Optional[ModelParams] = None, l2_weight: float = 0.0) -> float:
    """Mean binary cross-entropy on logits, plus ``l2_weight/2 * ||params||^2``."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if logits.shape != labels.shape:
        raise ValueError("logits and labels differ in length")
    if logits.size == 0:
        raise ValueError("empty input")
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("labels must be 0 or 1")
    loss = float(np.mean(_softplus_bce(logits, labels)))
    if params is not None and l2_weight:
        loss += 0.5 * l2_weight * params.sq_norm()
    return loss


def _require_labels(g: HeteroGraph, labels) -> np.ndarray:
    y = g.labels if labels is None else np.asarray(labels, dtype=np.float64)
    if y is None:
        raise ValueError("graph has no labels")
    if len(y) != g.num_nodes:
        raise ValueError("labels must cover every node")
    return y


def loss_and_grad(g: HeteroGraph, p: ModelParams, cfg: ModelConfig, labels=None) -> tuple[float, ModelParams]:
    y = _require_labels(g, labels)
    logits, c = _forward(g, p, cfg)
    loss = bce_loss(logits, y, p, cfg.l2_weight)
    n = g.num_nodes
    grads: dict[str, np.ndarray] = {}

    dz = (expit(logits) - y) / n
    grads["w_out"] = (dz @ c.h_last)[None, :]
    grads["b_out"] = np.array([dz.sum()])
    dh = np.outer(dz, p["w_out"][0])

    for l in range(NUM_LAYERS, 0, -1):
        h_in, pre, args = c.hs[l - 1], c.pres[l - 1], c.args[l - 1]
        dpre = dh * (pre > 0)
        grads[f"b_{l}"] = dpre.sum(axis=0)
        grads[f"W_self_{l}"] = dpre.T @ h_in
        dh_in = dpre @ p[f"W_self_{l}"]
        for k in EDGE_KINDS:
            name = f"W_{k.name}_{l}"
            if k not in args:
                grads[name] = np.zeros_like(p[name])
                continue
            if args[k] is None:
                indptr, src = g.incoming(k)
                dmsg = kernels.csr_mean_backward(indptr, src, dpre, n)
            else:
                dmsg = kernels.csr_max_backward(args[k], dpre, n)
            grads[name] = dmsg.T @ h_in
            dh_in += dmsg @ p[name]
        dh = dh_in

    dpre0 = dh * (c.pre0 > 0)
    for node_kind, idx, x in (("vis", g.vis_index, g.x_vis), ("cw", g.cw_index, g.x_cw)):
        pname, bname = f"P_{node_kind}", f"b_{node_kind}"
        if len(idx):
            grads[pname] = dpre0[idx].T @ x
            grads[bname] = dpre0[idx].sum(axis=0)
        else:
            grads[pname] = np.zeros_like(p[pname])
            grads[bname] = np.zeros_like(p[bname])

    if cfg.l2_weight:
        for k in grads:
            grads[k] = grads[k] + cfg.l2_weight * p[k]
    return loss, ModelParams({k: grads[k] for k in p.names()})


def backward(g: HeteroGraph, p: ModelParams, cfg: ModelConfig, labels=None) -> ModelParams:
    """Gradient of :func:`bce_loss` (with L2) with respect to every parameter."""
    return loss_and_grad(g, p, cfg, labels)[1]


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    train_ap: float


@dataclass
class TrainHistory:
    epochs: list[EpochRecord]
    params: ModelParams
    best_epoch: int


def _pooled_ap(scores: np.ndarray, labels: np.ndarray) -> float:
    from .metrics import average_precision

    if not labels.any():
        return float("nan")
    return average_precision(list(zip(scores, labels)))


def evaluate(graphs: Sequence[HeteroGraph], p: ModelParams, cfg: ModelConfig) -> tuple[float, float]:
    """Mean per-graph loss and pooled AP."""
    losses, scores, labels = [], [], []
    for g in graphs:
        z = forward(g, p, cfg)
        losses.append(bce_loss(z, g.labels, p, cfg.l2_weight))
        scores.append(expit(z))
        labels.append(g.labels)
    return float(np.mean(losses)), _pooled_ap(np.concatenate(scores), np.concatenate(labels))


def train(graphs: Sequence[HeteroGraph], cfg: ModelConfig, params: Optional[ModelParams] = None) -> tuple[ModelParams, TrainHistory]:
    """Full-batch momentum SGD, one step per graph per epoch; returns the lowest-loss params."""
    graphs = [g for g in graphs if g.num_nodes]
    if not graphs:
        raise ValueError("no labeled graphs")
    if any(g.labels is None for g in graphs):
        raise ValueError("every training graph must be labeled")
    p = init_params(cfg) if params is None else params.copy()
    velocity = p.zeros_like()
    rng = np.random.default_rng([cfg.seed, 1])
    best, best_loss, best_epoch = p.copy(), np.inf, 0
    records = []
    for epoch in range(1, cfg.epochs + 1):
        for gi in rng.permutation(len(graphs)):
            _, grad = loss_and_grad(graphs[gi], p, cfg)
            for name in p.names():
                v = velocity.tensors[name]
                v *= cfg.momentum
                v -= cfg.learning_rate * grad[name]
                p.tensors[name] += v
        loss, ap = evaluate(graphs, p, cfg)
        if not np.isfinite(loss):
            raise FloatingPointError(f"loss diverged at epoch {epoch}")
        records.append(EpochRecord(epoch, loss, ap))
        log.debug("epoch %d loss %.6f ap %.4f", epoch, loss, ap)
        if loss < best_loss:
            best, best_loss, best_epoch = p.copy(), loss, epoch
    return best, TrainHistory(records, best, best_epoch)


# checkpoints

def save_checkpoint(path, params: ModelParams, cfg: ModelConfig, metadata: Optional[dict] = None) -> None:
    """Write a text checkpoint; floats use ``repr`` so the round trip is bit-exact.

    ``metadata`` entries are stored as ``meta.<key>=<value>`` in the config block.
    """
    lines = [CKPT_HEADER, "[config]"]
    for key, val in asdict(cfg).items():
        if key == "agg_schedule":
            val = ",".join(val)
        lines.append(f"{key}={val!r}" if isinstance(val, float) else f"{key}={val}")
    for key, val in (metadata or {}).items():
        lines.append(f"meta.{key}={val}")
    for name in params.names():
        t = params[name]
        lines.append(f"[tensor {name} {' '.join(map(str, t.shape))}]")
        rows = t.reshape(t.shape[0], -1) if t.ndim > 1 else t[None, :]
        for row in rows:
            lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _read_config_block(path) -> tuple[list[str], int, dict[str, str]]:
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != CKPT_HEADER:
        raise ValueError(f"{path}: not a checkpoint (expected header {CKPT_HEADER!r})")
    i = 1
    if text[i].strip() != "[config]":
        raise ValueError(f"{path}:{i + 1}: expected [config]")
    i += 1
    raw = {}
    while i < len(text) and not text[i].startswith("[tensor"):
        key, _, val = text[i].partition("=")
        raw[key.strip()] = val.strip()
        i += 1
    return text, i, raw


def checkpoint_metadata(path) -> dict[str, str]:
    _, _, raw = _read_config_block(path)
    return {k[5:]: v for k, v in raw.items() if k.startswith("meta.")}


def load_checkpoint(path) -> tuple[ModelParams, ModelConfig]:
    text, i, raw = _read_config_block(path)
    kw = {}
    for f in ModelConfig.__dataclass_fields__.values():
        if f.name not in raw:
            continue
        v = raw[f.name]
        if f.name == "agg_schedule":
            kw[f.name] = tuple(v.split(","))
        elif f.type in ("int",):
            kw[f.name] = int(v)
        else:
            kw[f.name] = float(v)
    cfg = ModelConfig(**kw)
    tensors = {}
    while i < len(text):
        head = text[i].strip()
        if not head:
            i += 1
            continue
        if not (head.startswith("[tensor ") and head.endswith("]")):
            raise ValueError(f"{path}:{i + 1}: expected tensor header")
        parts = head[1:-1].split()
        name, shape = parts[1], tuple(int(s) for s in parts[2:])
        nrows = shape[0] if len(shape) > 1 else 1
        rows = [np.array([float(v) for v in text[i + 1 + r].split()]) for r in range(nrows)]
        tensors[name] = np.concatenate(rows).reshape(shape)
        i += 1 + nrows
    expected = param_shapes(cfg)
    if list(tensors) != list(expected) or any(tensors[k].shape != expected[k] for k in expected):
        raise ValueError(f"{path}: tensor set does not match config")
    return ModelParams(tensors), cfg
