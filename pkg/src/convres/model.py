"""Model assembly: embedding table + CNN encoder + one of the label heads."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import crbm as crbm_ops
from .encoder import EncoderConfig, FilterBank, encode_batch, make_banks
from .exceptions import ConfigError
from .heads import LogisticHead, PlainHead, ResidualHead
from .numeric import ParamTensor, SeededRng
from .text import EmbeddingTable, TokenizedDoc, Vocabulary, load_embeddings

MODEL_TYPES = ("logistic", "plain", "residual", "crbm")


@dataclass
class ModelSpec:
    model_type: str = "residual"
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    max_len: int = 600
    n_layers: int = 1
    hidden_sizes: tuple[int, ...] | None = None
    crbm_hidden: int | None = None
    embeddings_path: str | None = None

    def __post_init__(self):
        if self.model_type not in MODEL_TYPES:
            raise ConfigError(f"unknown model type {self.model_type!r}")
        if self.max_len < max(self.encoder.windows):
            raise ConfigError(
                f"max_len {self.max_len} is smaller than the widest filter window "
                f"{max(self.encoder.windows)}"
            )


class Model:
    """A trained or trainable classifier over tokenized documents."""

    def __init__(
        self,
        spec: ModelSpec,
        vocab: Vocabulary,
        labels: list[str],
        embedding: EmbeddingTable,
        banks: list[FilterBank],
        head,
    ):
        self.spec = spec
        self.vocab = vocab
        self.labels = labels
        self.embedding = embedding
        self.banks = banks
        self.head = head

    @classmethod
    def build(cls, spec: ModelSpec, vocab: Vocabulary, labels: list[str], rng: SeededRng) -> "Model":
        emb_rng = rng.spawn(101)
        conv_rng = rng.spawn(102)
        head_rng = rng.spawn(103)
        embedding = load_embeddings(spec.embeddings_path, vocab, emb_rng, dim=spec.encoder.embedding_dim)
        banks = make_banks(spec.encoder, conv_rng)
        L = len(labels)
        vw = spec.encoder.output_dim
        if spec.model_type == "logistic":
            head = LogisticHead(L, vw, head_rng)
        elif spec.model_type == "residual":
            head = ResidualHead(L, vw, spec.n_layers, spec.hidden_sizes, head_rng)
        elif spec.model_type == "plain":
            head = PlainHead(L, vw, spec.n_layers, spec.hidden_sizes, head_rng)
        else:
            J = spec.crbm_hidden if spec.crbm_hidden is not None else L
            head = crbm_ops.CrbmHead(L, vw, J, head_rng)
        return cls(spec, vocab, labels, embedding, banks, head)

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    def params(self) -> list[ParamTensor]:
        out = [self.embedding.weights]
        for bank in self.banks:
            out.extend(bank.params())
        out.extend(self.head.params())
        return out

    def param_count(self) -> int:
        return sum(p.size for p in self.params())

    def zero_grads(self) -> None:
        for p in self.params():
            p.zero_grad()

    def _batch_ids(self, docs: list[TokenizedDoc]) -> tuple[np.ndarray, np.ndarray]:
        lens = np.array([d.valid_len for d in docs], dtype=np.int64)
        width = int(max(lens.max(), max(self.spec.encoder.windows)))
        ids = np.stack([d.ids[:width] for d in docs])
        return ids, lens

    def encode_docs(
        self,
        docs: list[TokenizedDoc],
        train_mode: bool = False,
        dropout_rng: SeededRng | None = None,
        keep_prob: float = 0.5,
    ):
        ids, lens = self._batch_ids(docs)
        return encode_batch(
            ids, lens, self.embedding, self.banks, train_mode, dropout_rng, keep_prob
        )

    def predict_batch(self, docs: list[TokenizedDoc], chunk: int = 256) -> np.ndarray:
        """Eval-mode label marginals, row per document."""
        out = np.zeros((len(docs), self.n_labels))
        for lo in range(0, len(docs), chunk):
            part = docs[lo : lo + chunk]
            x, _, _ = self.encode_docs(part, train_mode=False)
            if self.spec.model_type == "crbm":
                for i in range(x.shape[0]):
                    out[lo + i] = crbm_ops.predict_marginals(x[i], self.head)
            else:
                p, _ = self.head.forward(x)
                out[lo : lo + x.shape[0]] = p
        return out
