"""Versioned single-file checkpoints: a JSON header plus decimal tensor payloads.

The file is one JSON object written with fixed key order and separators, so
saving, reloading and saving again produces byte-identical output. Tensors
are stored row-major; a vector of length n is recorded with rows=n, cols=0.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .encoder import EncoderConfig
from .exceptions import ParseError
from .model import Model, ModelSpec
from .numeric import SeededRng
from .text import Vocabulary

FORMAT_VERSION = 1


def _tensor_entry(name: str, value: np.ndarray) -> dict:
    if value.ndim == 1:
        rows, cols = value.shape[0], 0
    else:
        rows, cols = value.shape
    return {
        "name": name,
        "rows": int(rows),
        "cols": int(cols),
        "values": [float(v) for v in value.reshape(-1)],
    }


def save_checkpoint(model: Model, path: str | Path) -> None:
    spec = model.spec
    obj = {
        "format_version": FORMAT_VERSION,
        "model_type": spec.model_type,
        "n_layers": spec.n_layers,
        "hidden_sizes": list(spec.hidden_sizes) if spec.hidden_sizes else None,
        "crbm_hidden": spec.crbm_hidden,
        "encoder": {
            "windows": list(spec.encoder.windows),
            "filters_per_window": spec.encoder.filters_per_window,
            "embedding_dim": spec.encoder.embedding_dim,
        },
        "max_len": spec.max_len,
        "vocab": model.vocab.id_to_token,
        "labels": model.labels,
        "tensors": [_tensor_entry(p.name, p.value) for p in model.params()],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, separators=(",", ":"))
        fh.write("\n")


def load_checkpoint(path: str | Path) -> Model:
    path = Path(path)
    if not path.exists():
        raise ParseError(f"checkpoint file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}: invalid checkpoint JSON ({e.msg})")
    if obj.get("format_version") != FORMAT_VERSION:
        raise ParseError(f"{path}: unsupported checkpoint version {obj.get('format_version')}")

    enc = obj["encoder"]
    spec = ModelSpec(
        model_type=obj["model_type"],
        encoder=EncoderConfig(
            windows=tuple(enc["windows"]),
            filters_per_window=enc["filters_per_window"],
            embedding_dim=enc["embedding_dim"],
        ),
        max_len=obj["max_len"],
        n_layers=obj["n_layers"],
        hidden_sizes=tuple(obj["hidden_sizes"]) if obj["hidden_sizes"] else None,
        crbm_hidden=obj["crbm_hidden"],
    )
    tokens = obj["vocab"]
    vocab = Vocabulary({t: i for i, t in enumerate(tokens)}, list(tokens))
    model = Model.build(spec, vocab, list(obj["labels"]), SeededRng(0))

    by_name = {}
    for entry in obj["tensors"]:
        if entry["name"] in by_name:
            raise ParseError(f"{path}: duplicate tensor name {entry['name']!r}")
        by_name[entry["name"]] = entry
    for p in model.params():
        if p.name not in by_name:
            raise ParseError(f"{path}: missing tensor {p.name!r}")
        entry = by_name.pop(p.name)
        shape = (entry["rows"],) if entry["cols"] == 0 else (entry["rows"], entry["cols"])
        values = np.array(entry["values"], dtype=np.float64)
        if values.size != int(np.prod(shape)) or shape != p.value.shape:
            raise ParseError(
                f"{path}: tensor {p.name!r} has shape {shape}, expected {p.value.shape}"
            )
        p.value[...] = values.reshape(shape)
    if by_name:
        raise ParseError(f"{path}: unexpected tensors {sorted(by_name)}")
    return model
