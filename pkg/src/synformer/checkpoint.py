"""Versioned binary checkpoints: JSON manifest plus raw little-endian tensors.

Layout: an 8-byte magic, a little-endian uint32 format version, a uint64
manifest length, the UTF-8 JSON manifest, then each tensor's raw bytes at the
offsets the manifest records. Raw bytes round-trip bit-exactly. The manifest
also embeds the vocabulary, merge rules, and tagset so a checkpoint decodes
text with no side files.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from .annotate import PosTagSet
from .bert import BertConfig, BertModel
from .bpe import MergeTable, Vocab
from .errors import DataFormatError
from .model import ModelConfig, TransformerModel

MAGIC = b"SYNFCKPT"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    kind: str                    # "transformer" | "bert"
    config: dict
    arrays: dict[str, np.ndarray]
    extras: dict


def save_checkpoint(path, kind: str, config: dict, params: dict,
                    extras: dict | None = None) -> None:
    """``params`` maps names to Tensors or numpy arrays."""
    tensors = []
    offset = 0
    blobs = []
    for name in sorted(params):
        arr = params[name]
        data = np.ascontiguousarray(getattr(arr, "data", arr))
        dtype = data.dtype.newbyteorder("<")
        raw = data.astype(dtype, copy=False).tobytes()
        tensors.append({
            "name": name,
            "shape": list(data.shape),
            "dtype": dtype.str,
            "offset": offset,
            "nbytes": len(raw),
        })
        blobs.append(raw)
        offset += len(raw)
    manifest = json.dumps({
        "kind": kind,
        "config": config,
        "extras": extras or {},
        "tensors": tensors,
    }, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        f.write(struct.pack("<Q", len(manifest)))
        f.write(manifest)
        for raw in blobs:
            f.write(raw)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != MAGIC:
            raise DataFormatError(f"{path}: not a checkpoint (bad magic {magic!r})")
        (version,) = struct.unpack("<I", f.read(4))
        if version != FORMAT_VERSION:
            raise DataFormatError(
                f"{path}: unsupported checkpoint version {version}")
        (length,) = struct.unpack("<Q", f.read(8))
        manifest = json.loads(f.read(length).decode("utf-8"))
        payload = f.read()
    arrays = {}
    for t in manifest["tensors"]:
        raw = payload[t["offset"]: t["offset"] + t["nbytes"]]
        if len(raw) != t["nbytes"]:
            raise DataFormatError(f"{path}: truncated tensor {t['name']!r}")
        arrays[t["name"]] = np.frombuffer(raw, dtype=t["dtype"]).reshape(t["shape"]).copy()
    return Checkpoint(kind=manifest["kind"], config=manifest["config"],
                      arrays=arrays, extras=manifest["extras"])


def _tokenizer_extras(vocab: Vocab, merges: MergeTable, tagset: PosTagSet) -> dict:
    return {
        "vocab": list(vocab.symbols),
        "merges": [list(m) for m in merges.merges],
        "tagset": list(tagset.tags),
    }


def _tokenizer_from_extras(extras: dict):
    vocab = Vocab(tuple(extras["vocab"]))
    merges = MergeTable(tuple((l, r) for l, r in extras["merges"]))
    tagset = PosTagSet(tuple(extras["tagset"]))
    return vocab, merges, tagset


def save_transformer(path, model: TransformerModel, vocab: Vocab,
                     merges: MergeTable, tagset: PosTagSet,
                     extra: dict | None = None) -> None:
    extras = _tokenizer_extras(vocab, merges, tagset)
    extras["seed"] = model.seed
    extras.update(extra or {})
    save_checkpoint(path, "transformer", asdict(model.cfg), model.params, extras)


def load_transformer(path):
    """Returns (model, vocab, merges, tagset); parameters are bit-exact."""
    ckpt = load_checkpoint(path)
    if ckpt.kind != "transformer":
        raise DataFormatError(f"{path}: expected a transformer checkpoint, "
                              f"got {ckpt.kind!r}")
    config = dict(ckpt.config)
    if config.get("feature_dims") is not None:
        config["feature_dims"] = tuple(config["feature_dims"])
    cfg = ModelConfig(**config)
    model = TransformerModel(cfg, seed=int(ckpt.extras.get("seed", 0)))
    _restore_params(model, ckpt, path)
    vocab, merges, tagset = _tokenizer_from_extras(ckpt.extras)
    return model, vocab, merges, tagset


def save_bert(path, model: BertModel, vocab: Vocab, merges: MergeTable,
              tagset: PosTagSet, extra: dict | None = None) -> None:
    extras = _tokenizer_extras(vocab, merges, tagset)
    extras["seed"] = model.seed
    extras.update(extra or {})
    save_checkpoint(path, "bert", asdict(model.cfg), model.params, extras)


def load_bert(path):
    ckpt = load_checkpoint(path)
    if ckpt.kind != "bert":
        raise DataFormatError(f"{path}: expected a bert checkpoint, "
                              f"got {ckpt.kind!r}")
    cfg = BertConfig(**ckpt.config)
    model = BertModel(cfg, seed=int(ckpt.extras.get("seed", 0)))
    _restore_params(model, ckpt, path)
    vocab, merges, tagset = _tokenizer_from_extras(ckpt.extras)
    return model, vocab, merges, tagset


def _restore_params(model, ckpt: Checkpoint, path) -> None:
    if set(model.params) != set(ckpt.arrays):
        missing = set(model.params) ^ set(ckpt.arrays)
        raise DataFormatError(
            f"{path}: parameter names do not match the config "
            f"(mismatched: {sorted(missing)[:4]}...)")
    for name, arr in ckpt.arrays.items():
        model.params[name].data = arr.copy()
