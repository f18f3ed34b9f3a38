"""Text pipeline: tokenization, vocabulary, embeddings, index encoding.

Documents are kept as raw as possible: lowercased and split, with typos,
jargon and abbreviations (s/p, d/o, hx, ...) passed through untouched.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, EmptyDocumentError, ParseError
from .numeric import ParamTensor, SeededRng

PAD_ID = 0
UNK_ID = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

# Characters that stay inside a token when flanked by alphanumerics,
# so clinical shorthand like "s/p", "d/o" or "x-ray" survives.
_JOINERS = set("/-'")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, split punctuation into its own tokens."""
    if not text or not text.strip():
        raise EmptyDocumentError("document has no tokens")
    out: list[str] = []
    for chunk in text.lower().split():
        cur: list[str] = []
        for i, ch in enumerate(chunk):
            if ch.isalnum():
                cur.append(ch)
            elif (
                ch in _JOINERS
                and 0 < i < len(chunk) - 1
                and chunk[i - 1].isalnum()
                and chunk[i + 1].isalnum()
            ):
                cur.append(ch)
            else:
                if cur:
                    out.append("".join(cur))
                    cur = []
                out.append(ch)
        if cur:
            out.append("".join(cur))
    return out


@dataclass
class Vocabulary:
    token_to_id: dict[str, int]
    id_to_token: list[str]

    def __len__(self) -> int:
        return len(self.id_to_token)

    def lookup(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id


def build_vocab(corpus_tokens: list[list[str]], min_count: int = 1) -> Vocabulary:
    """Vocabulary over all tokens with frequency >= min_count.

    Ids are assigned by (frequency desc, token asc) after the fixed pad and
    unknown entries, so two builds over the same corpus agree exactly.
    """
    if not corpus_tokens:
        raise ConfigError("cannot build a vocabulary from an empty corpus")
    counts: dict[str, int] = {}
    for tokens in corpus_tokens:
        for t in tokens:
            counts[t] = counts.get(t, 0) + 1
    kept = sorted(
        (t for t, c in counts.items() if c >= min_count),
        key=lambda t: (-counts[t], t),
    )
    id_to_token = [PAD_TOKEN, UNK_TOKEN] + kept
    token_to_id = {t: i for i, t in enumerate(id_to_token)}
    return Vocabulary(token_to_id, id_to_token)


@dataclass
class EmbeddingTable:
    """Trainable word vectors, one row per vocabulary id; pad row frozen at zero."""

    weights: ParamTensor
    dim: int

    @property
    def vocab_size(self) -> int:
        return self.weights.value.shape[0]

    def freeze_pad(self) -> None:
        """Keep the pad row out of training: zero its value and gradient."""
        self.weights.value[PAD_ID, :] = 0.0
        self.weights.grad[PAD_ID, :] = 0.0


def _random_table(vocab: Vocabulary, dim: int, rng: SeededRng) -> np.ndarray:
    mat = rng.uniform(-0.25, 0.25, (len(vocab), dim))
    mat[PAD_ID, :] = 0.0
    return mat


def load_embeddings(
    path: str | Path | None,
    vocab: Vocabulary,
    rng: SeededRng,
    dim: int = 300,
) -> EmbeddingTable:
    """Embedding table from a text vector file, or random if no file is given.

    File format: optional "<count> <dim>" header line, then one line per
    token: the token followed by `dim` decimal reals. Vocabulary tokens not
    in the file get entries drawn uniformly from [-0.25, 0.25), matching the
    variance of typical pretrained vectors. The pad row is zero.
    """
    mat = _random_table(vocab, dim, rng)
    if path is not None:
        file_vecs = _read_embedding_file(Path(path), dim)
        for token, vec in file_vecs.items():
            if token in vocab:
                mat[vocab.token_to_id[token], :] = vec
    table = EmbeddingTable(ParamTensor("embedding", mat), dim)
    table.freeze_pad()
    return table


def _read_embedding_file(path: Path, dim: int) -> dict[str, np.ndarray]:
    vectors: dict[str, np.ndarray] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2:
                try:
                    int(parts[0]), int(parts[1])
                    continue  # header line
                except ValueError:
                    pass
            if len(parts) != dim + 1:
                raise ParseError(
                    f"{path}: expected token plus {dim} values, got {len(parts)} fields",
                    line=lineno,
                )
            try:
                vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
            except ValueError:
                raise ParseError(f"{path}: non-numeric embedding entry", line=lineno)
            vectors[parts[0]] = vec
    return vectors


@dataclass
class TokenizedDoc:
    tokens: list[str]
    ids: np.ndarray
    valid_len: int
    label_ids: tuple[int, ...] = field(default_factory=tuple)

    def label_vector(self, n_labels: int) -> np.ndarray:
        y = np.zeros(n_labels, dtype=np.float64)
        for l in self.label_ids:
            y[l] = 1.0
        return y


def encode_doc(
    tokens: list[str],
    vocab: Vocabulary,
    max_len: int = 600,
    label_ids: tuple[int, ...] = (),
) -> TokenizedDoc:
    """Map tokens to ids, truncating at max_len and padding with the pad id."""
    if max_len < 1:
        raise ConfigError(f"max_len must be >= 1, got {max_len}")
    if not tokens:
        raise EmptyDocumentError("cannot encode a document with no tokens")
    ids = np.full(max_len, PAD_ID, dtype=np.int64)
    valid = min(len(tokens), max_len)
    for i in range(valid):
        ids[i] = vocab.lookup(tokens[i])
    return TokenizedDoc(tokens=tokens, ids=ids, valid_len=valid, label_ids=tuple(label_ids))


def embed(doc: TokenizedDoc, table: EmbeddingTable) -> np.ndarray:
    """Sentence matrix with one embedding column per position (dim x max_len)."""
    if doc.ids.max(initial=0) >= table.vocab_size:
        raise ConfigError("token id out of range of the embedding table")
    return table.weights.value[doc.ids].T.copy()


def load_corpus(path: str | Path) -> list[dict]:
    """JSON Lines corpus: one {"text": ..., "labels": [...]} object per line."""
    docs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"{path}: invalid JSON ({e.msg})", line=lineno)
            if "text" not in obj or "labels" not in obj:
                raise ParseError(f"{path}: document needs 'text' and 'labels'", line=lineno)
            docs.append({"text": obj["text"], "labels": list(obj["labels"])})
    if not docs:
        raise ParseError(f"{path}: corpus is empty")
    return docs


def read_label_file(path: str | Path) -> list[str]:
    """Label vocabulary: one label per line, line number (0-based) is the id."""
    with open(path, "r", encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh if line.rstrip("\n")]


def write_label_file(path: str | Path, labels: list[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for label in labels:
            fh.write(label + "\n")
