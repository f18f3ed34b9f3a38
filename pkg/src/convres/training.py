"""End-to-end optimization: cross-entropy, minibatched Adam, early stopping.

Training is bit-reproducible from TrainConfig.seed: the validation split,
parameter init, epoch shuffles, dropout masks and Gibbs chains all consume
dedicated derived streams in a fixed order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from . import crbm as crbm_ops
from .encoder import encode_batch_backward
from .exceptions import ConfigError, LabelMismatchError, TrainingError
from .metrics import RankedPrediction, metric_report, precision_at_k
from .model import Model, ModelSpec
from .numeric import SeededRng, adam_step
from .text import TokenizedDoc, build_vocab, encode_doc, tokenize

CLAMP = 1e-12


@dataclass
class TrainConfig:
    lr: float = 2e-4
    minibatch: int = 50
    dropout_keep: float = 0.5
    val_fraction: float = 0.10
    patience: int = 5
    max_epochs: int = 100
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.val_fraction < 1.0:
            raise ConfigError("val_fraction must be in (0, 1)")
        if self.minibatch < 1:
            raise ConfigError("minibatch must be >= 1")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")


@dataclass
class EpochReport:
    epoch: int
    train_loss: float
    val_loss: float
    val_p_at_1: float
    seconds: float

    def history_line(self) -> dict:
        # wall time is excluded so history files are identical across reruns
        return {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
            "val_p_at_1": self.val_p_at_1,
        }


def cross_entropy(P: np.ndarray, y: np.ndarray) -> float:
    """Mean binary cross-entropy over the label vector, clamped before logs."""
    P = np.clip(np.asarray(P, dtype=np.float64), CLAMP, 1.0 - CLAMP)
    y = np.asarray(y, dtype=np.float64)
    return float(-np.mean(y * np.log(P) + (1.0 - y) * np.log(1.0 - P)))


def _ce_batch(P: np.ndarray, Y: np.ndarray) -> tuple[float, np.ndarray]:
    """Summed cross-entropy over a batch plus the gradient w.r.t. pre-sigmoid z.

    The gradient is for the batch MEAN loss: (P - Y) / (L * B), zeroed where
    the probability clamp is active.
    """
    L = P.shape[1]
    B = P.shape[0]
    Pc = np.clip(P, CLAMP, 1.0 - CLAMP)
    losses = -np.mean(Y * np.log(Pc) + (1.0 - Y) * np.log(1.0 - Pc), axis=1)
    inside = (P > CLAMP) & (P < 1.0 - CLAMP)
    dZ = np.where(inside, P - Y, 0.0) / (L * B)
    return float(losses.sum()), dZ


def validation_split(docs: list, fraction: float, seed: int) -> tuple[list, list]:
    """Deterministic shuffle; the last ceil(fraction * N) items are validation."""
    n = len(docs)
    n_val = int(np.ceil(fraction * n))
    if n_val < 1 or n - n_val < 1:
        raise ConfigError(
            f"corpus of {n} documents cannot support a {fraction:.2f} validation split"
        )
    idx = list(range(n))
    SeededRng(seed).shuffle(idx)
    train_idx, val_idx = idx[: n - n_val], idx[n - n_val :]
    return [docs[i] for i in train_idx], [docs[i] for i in val_idx]


def collect_labels(docs: Sequence[dict]) -> list[str]:
    labels = set()
    for doc in docs:
        labels.update(doc["labels"])
    return sorted(labels)


def prepare_docs(
    docs: Sequence[dict], vocab, labels: list[str], max_len: int
) -> list[TokenizedDoc]:
    label_id = {name: i for i, name in enumerate(labels)}
    out = []
    for doc in docs:
        ids = []
        for name in doc["labels"]:
            if name not in label_id:
                raise LabelMismatchError(f"label {name!r} not in the label vocabulary")
            ids.append(label_id[name])
        out.append(encode_doc(tokenize(doc["text"]), vocab, max_len, tuple(sorted(ids))))
    return out


@dataclass
class TrainResult:
    model: Model
    history: list[EpochReport]
    best_epoch: int
    best_val_loss: float


def train(
    docs: list[dict],
    spec: ModelSpec,
    cfg: TrainConfig,
    val_docs: list[dict] | None = None,
    log: Callable[[str], None] | None = None,
) -> TrainResult:
    """Train a model of the requested type from raw {"text", "labels"} docs."""
    if val_docs is None:
        train_raw, val_raw = validation_split(docs, cfg.val_fraction, cfg.seed)
    else:
        train_raw, val_raw = list(docs), list(val_docs)
    labels = collect_labels(train_raw + val_raw)
    if not labels:
        raise ConfigError("corpus carries no labels at all")

    token_lists = [tokenize(d["text"]) for d in train_raw]
    vocab = build_vocab(token_lists)
    train_docs = prepare_docs(train_raw, vocab, labels, spec.max_len)
    val_docs_t = prepare_docs(val_raw, vocab, labels, spec.max_len)

    if spec.model_type == "crbm":
        return _train_crbm(spec, cfg, vocab, labels, train_docs, val_docs_t, log)

    rng = SeededRng(cfg.seed)
    model = Model.build(spec, vocab, labels, rng)
    history, best_epoch, best_val = _optimize_backprop(
        model, train_docs, val_docs_t, cfg, rng, log
    )
    return TrainResult(model, history, best_epoch, best_val)


def _val_metrics(model: Model, val_docs: list[TokenizedDoc]) -> tuple[float, float]:
    P = model.predict_batch(val_docs)
    L = model.n_labels
    losses = [cross_entropy(P[i], d.label_vector(L)) for i, d in enumerate(val_docs)]
    labeled = [
        precision_at_k(RankedPrediction(P[i], d.label_vector(L)), 1)
        for i, d in enumerate(val_docs)
        if d.label_ids
    ]
    p1 = float(np.mean(labeled)) if labeled else 0.0
    return float(np.mean(losses)), p1


def _snapshot(model: Model) -> list[np.ndarray]:
    return [p.value.copy() for p in model.params()]


def _restore(model: Model, snap: list[np.ndarray]) -> None:
    for p, v in zip(model.params(), snap):
        p.value[...] = v


def _optimize_backprop(
    model: Model,
    train_docs: list[TokenizedDoc],
    val_docs: list[TokenizedDoc],
    cfg: TrainConfig,
    rng: SeededRng,
    log: Callable[[str], None] | None,
) -> tuple[list[EpochReport], int, float]:
    shuffle_rng = rng.spawn(201)
    dropout_rng = rng.spawn(202)
    L = model.n_labels
    Y_all = np.stack([d.label_vector(L) for d in train_docs])

    history: list[EpochReport] = []
    best_val = np.inf
    best_epoch = -1
    best_snap = _snapshot(model)
    stall = 0

    for epoch in range(cfg.max_epochs):
        t0 = time.perf_counter()
        order = list(range(len(train_docs)))
        shuffle_rng.shuffle(order)
        total_loss = 0.0
        for b_start in range(0, len(order), cfg.minibatch):
            batch_idx = order[b_start : b_start + cfg.minibatch]
            batch = [train_docs[i] for i in batch_idx]
            Y = Y_all[batch_idx]
            model.zero_grads()
            x, _, enc_cache = model.encode_docs(
                batch, train_mode=True, dropout_rng=dropout_rng, keep_prob=cfg.dropout_keep
            )
            P, head_cache = model.head.forward(x)
            loss_sum, dZ = _ce_batch(P, Y)
            if not np.isfinite(loss_sum):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch {b_start // cfg.minibatch}"
                )
            total_loss += loss_sum
            dx = model.head.backward(head_cache, dZ)
            encode_batch_backward(enc_cache, dx, model.embedding, model.banks)
            model.embedding.weights.grad[0, :] = 0.0  # pad row stays frozen
            for p in model.params():
                adam_step(p, lr=cfg.lr)
            model.embedding.freeze_pad()
        val_loss, val_p1 = _val_metrics(model, val_docs)
        report = EpochReport(
            epoch=epoch,
            train_loss=total_loss / len(train_docs),
            val_loss=val_loss,
            val_p_at_1=val_p1,
            seconds=time.perf_counter() - t0,
        )
        history.append(report)
        if log:
            log(
                f"epoch {epoch}: train {report.train_loss:.4f} "
                f"val {val_loss:.4f} p@1 {val_p1:.3f} ({report.seconds:.1f}s)"
            )
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_snap = _snapshot(model)
            stall = 0
        else:
            stall += 1
            if stall >= cfg.patience:
                break
    _restore(model, best_snap)
    return history, best_epoch, best_val


def _train_crbm(
    spec: ModelSpec,
    cfg: TrainConfig,
    vocab,
    labels: list[str],
    train_docs: list[TokenizedDoc],
    val_docs: list[TokenizedDoc],
    log: Callable[[str], None] | None,
) -> TrainResult:
    """Two stages: fit a logistic CNN, then CD-k over its frozen encodings."""
    base_spec = replace(spec, model_type="logistic")
    rng = SeededRng(cfg.seed)
    base = Model.build(base_spec, vocab, labels, rng)
    history, _, _ = _optimize_backprop(base, train_docs, val_docs, cfg, rng, log)

    L = len(labels)
    J = spec.crbm_hidden if spec.crbm_hidden is not None else L
    head = crbm_ops.CrbmHead(L, spec.encoder.output_dim, J, rng.spawn(301))
    model = Model(spec, vocab, labels, base.embedding, base.banks, head)

    X_train, _, _ = model.encode_docs(train_docs, train_mode=False)
    Y_train = np.stack([d.label_vector(L) for d in train_docs])
    cd_rng = rng.spawn(302)
    shuffle_rng = rng.spawn(303)

    best_val = np.inf
    best_epoch = -1
    best_snap = [p.value.copy() for p in head.params()]
    stall = 0
    epoch_base = len(history)
    for epoch in range(cfg.max_epochs):
        t0 = time.perf_counter()
        order = list(range(len(train_docs)))
        shuffle_rng.shuffle(order)
        total_nll = 0.0
        for b_start in range(0, len(order), cfg.minibatch):
            batch_idx = order[b_start : b_start + cfg.minibatch]
            for p in head.params():
                p.zero_grad()
            for i in batch_idx:
                g = crbm_ops.crbm_cd_gradient(X_train[i], Y_train[i], head, rng=cd_rng)
                head.W.grad -= g.dW
                head.G.grad -= g.dG
                head.b.grad -= g.db
                head.c.grad -= g.dc
            for p in head.params():
                p.grad /= len(batch_idx)
                adam_step(p, lr=cfg.lr)
        P_train = np.stack(
            [crbm_ops.predict_marginals(X_train[i], head) for i in range(len(train_docs))]
        )
        train_loss = float(
            np.mean([cross_entropy(P_train[i], Y_train[i]) for i in range(len(train_docs))])
        )
        val_loss, val_p1 = _val_metrics(model, val_docs)
        report = EpochReport(
            epoch=epoch_base + epoch,
            train_loss=train_loss,
            val_loss=val_loss,
            val_p_at_1=val_p1,
            seconds=time.perf_counter() - t0,
        )
        history.append(report)
        if log:
            log(
                f"epoch {report.epoch} (crbm): train {train_loss:.4f} "
                f"val {val_loss:.4f} p@1 {val_p1:.3f} ({report.seconds:.1f}s)"
            )
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch_base + epoch
            best_snap = [p.value.copy() for p in head.params()]
            stall = 0
        else:
            stall += 1
            if stall >= cfg.patience:
                break
    for p, v in zip(head.params(), best_snap):
        p.value[...] = v
    return TrainResult(model, history, best_epoch, best_val)


def evaluate(model: Model, docs: list[dict]) -> dict:
    """Metric report over raw documents, dropout off."""
    tokenized = prepare_docs(docs, model.vocab, model.labels, model.spec.max_len)
    P = model.predict_batch(tokenized)
    L = model.n_labels
    preds = [
        RankedPrediction(P[i], tokenized[i].label_vector(L)) for i in range(len(tokenized))
    ]
    return metric_report(preds)
