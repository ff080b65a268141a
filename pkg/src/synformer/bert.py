"""Encoder-only classifier with POS-infused token embeddings.

Token embeddings are combined with a trainable POS embedding either by
addition (widths equal) or by concatenation followed by a learned affine map
back to the model width. The first position's final representation feeds a
softmax classification head. The encoder stack is shared with the
translation model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .bpe import Vocab
from .errors import ShapeError
from .model import PAD_ID, encoder_forward, key_padding_mask
from .optim import Adam, glorot_init, seeded_rng

UNK_POS_ID = 0  # PosTagSet pins the unknown tag to id 0


@dataclass
class BertConfig:
    """Encoder-classifier shapes. Sum fusion requires the POS width to equal
    the model width; concat-affine learns a (D+d) x D projection."""

    vocab_size: int
    pos_vocab_size: int = 18
    d_model: int = 48
    layers: int = 2
    heads: int = 4
    ffn_width: int = 128
    pos_dim: int | None = None
    fusion: str = "sum"        # sum | concat-affine | none
    num_classes: int = 2
    max_positions: int = 128
    dropout: float = 0.1

    def __post_init__(self):
        if self.fusion not in ("sum", "concat-affine", "none"):
            raise ValueError(f"unknown fusion mode {self.fusion!r}")
        if self.d_model % self.heads != 0:
            raise ValueError(
                f"d_model {self.d_model} not divisible by heads {self.heads}")
        if self.fusion == "sum":
            if self.pos_dim is None:
                self.pos_dim = self.d_model
            if self.pos_dim != self.d_model:
                raise ValueError(
                    f"sum fusion needs pos_dim == d_model, got {self.pos_dim} "
                    f"!= {self.d_model}")
        elif self.fusion == "concat-affine":
            if self.pos_dim is None:
                self.pos_dim = max(self.d_model // 4, 1)
            if self.pos_dim <= 0:
                raise ValueError("concat-affine fusion needs pos_dim > 0")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.heads


class BertModel:
    """Parameters for the embedding path, encoder stack, and classifier head."""

    def __init__(self, cfg: BertConfig, seed: int):
        self.cfg = cfg
        self.seed = seed
        self.frozen: set[str] = set()
        self.params: dict[str, Tensor] = {}
        self._build_params()

    def _param(self, name, shape, kind="glorot"):
        if kind == "glorot":
            data = glorot_init(shape, seeded_rng(self.seed, name))
        elif kind == "ones":
            data = np.ones(shape)
        else:
            data = np.zeros(shape)
        self.params[name] = ad.parameter(data, name)

    def _build_params(self):
        cfg = self.cfg
        self._param("tok_embed", (cfg.vocab_size, cfg.d_model))
        if cfg.fusion != "none":
            self._param("pos_feat", (cfg.pos_vocab_size, cfg.pos_dim))
        if cfg.fusion == "concat-affine":
            self._param("fuse.w", (cfg.d_model + cfg.pos_dim, cfg.d_model))
            self._param("fuse.b", (cfg.d_model,), kind="zeros")
        self._param("seg_embed", (2, cfg.d_model))
        self._param("position_embed", (cfg.max_positions, cfg.d_model))
        for i in range(cfg.layers):
            for h in range(cfg.heads):
                for w in ("wk", "wq", "wv"):
                    self._param(f"enc{i}.self.h{h}.{w}",
                                (cfg.d_model, cfg.head_dim))
            self._param(f"enc{i}.self.wo", (cfg.d_model, cfg.d_model))
            self._param(f"enc{i}.self.norm.gain", (cfg.d_model,), kind="ones")
            self._param(f"enc{i}.self.norm.bias", (cfg.d_model,), kind="zeros")
            self._param(f"enc{i}.ffn.w1", (cfg.d_model, cfg.ffn_width))
            self._param(f"enc{i}.ffn.b1", (cfg.ffn_width,), kind="zeros")
            self._param(f"enc{i}.ffn.w2", (cfg.ffn_width, cfg.d_model))
            self._param(f"enc{i}.ffn.b2", (cfg.d_model,), kind="zeros")
            self._param(f"enc{i}.ffn.norm.gain", (cfg.d_model,), kind="ones")
            self._param(f"enc{i}.ffn.norm.bias", (cfg.d_model,), kind="zeros")
        self._param("cls.w", (cfg.d_model, cfg.num_classes))
        self._param("cls.b", (cfg.num_classes,), kind="zeros")

    def trainable_params(self) -> dict[str, Tensor]:
        return {k: v for k, v in self.params.items() if k not in self.frozen}

    def freeze(self, names) -> None:
        self.frozen.update(names)

    def zero_pos_table(self) -> None:
        if "pos_feat" in self.params:
            self.params["pos_feat"].data[:] = 0.0


def build_input(seq_a: tuple, seq_b: tuple | None, cfg: BertConfig,
                vocab: Vocab):
    """Assemble [CLS] a [SEP] (b [SEP]) with POS and segment ids.

    ``seq_a``/``seq_b`` are (token id list, POS id list). Special tokens get
    the unknown POS. On overflow the longer sequence is truncated (from its
    end) first, one token at a time.
    """
    a_ids, a_pos = list(seq_a[0]), list(seq_a[1])
    if len(a_ids) != len(a_pos):
        raise ShapeError(
            f"sequence A has {len(a_ids)} tokens but {len(a_pos)} POS ids")
    if seq_b is not None and len(seq_b[0]) == 0:
        seq_b = None
    b_ids, b_pos = (list(seq_b[0]), list(seq_b[1])) if seq_b else ([], [])
    if seq_b and len(b_ids) != len(b_pos):
        raise ShapeError(
            f"sequence B has {len(b_ids)} tokens but {len(b_pos)} POS ids")

    n_special = 2 + (1 if b_ids else 0)
    budget = cfg.max_positions - n_special
    if budget < (2 if b_ids else 1):
        raise ValueError(
            f"max_positions {cfg.max_positions} leaves no room for content")
    while len(a_ids) + len(b_ids) > budget:
        if len(a_ids) >= len(b_ids) and len(a_ids) > 1 or not b_ids:
            a_ids.pop(), a_pos.pop()
        else:
            b_ids.pop(), b_pos.pop()

    ids = [vocab.cls_id] + a_ids + [vocab.sep_id]
    pos = [UNK_POS_ID] + a_pos + [UNK_POS_ID]
    seg = [0] * (len(a_ids) + 2)
    if b_ids:
        ids += b_ids + [vocab.sep_id]
        pos += b_pos + [UNK_POS_ID]
        seg += [1] * (len(b_ids) + 1)
    return (np.asarray(ids, dtype=np.int64), np.asarray(pos, dtype=np.int64),
            np.asarray(seg, dtype=np.int64))


def embed_with_pos(model: BertModel, ids, pos_ids, segment_ids,
                   training=False, rng=None) -> Tensor:
    """Token embedding fused with POS, plus segment and learned position rows."""
    cfg = model.cfg
    ids = np.asarray(ids, dtype=np.int64)
    pos_ids = np.asarray(pos_ids, dtype=np.int64)
    segment_ids = np.asarray(segment_ids, dtype=np.int64)
    if ids.shape != pos_ids.shape or ids.shape != segment_ids.shape:
        raise ShapeError(
            f"ids {ids.shape}, pos {pos_ids.shape} and segments "
            f"{segment_ids.shape} must agree")
    length = ids.shape[-1]
    if length > cfg.max_positions:
        raise ValueError(
            f"sequence length {length} exceeds max_positions {cfg.max_positions}")

    e = ad.embedding_lookup(model.params["tok_embed"], ids)
    if cfg.fusion == "sum":
        h = ad.add(e, ad.embedding_lookup(model.params["pos_feat"], pos_ids))
    elif cfg.fusion == "concat-affine":
        f = ad.embedding_lookup(model.params["pos_feat"], pos_ids)
        h = ad.add(ad.matmul(ad.concat([e, f], axis=-1), model.params["fuse.w"]),
                   model.params["fuse.b"])
    else:
        h = e
    h = ad.add(h, ad.embedding_lookup(model.params["seg_embed"], segment_ids))
    h = ad.add(h, ad.embedding_lookup(model.params["position_embed"],
                                      np.arange(length)))
    return ad.dropout(h, cfg.dropout, training, rng)


def encode(model: BertModel, ids, pos_ids, segment_ids, training=False,
           rng=None, records=None) -> Tensor:
    batched = np.asarray(ids).ndim == 2
    mask = key_padding_mask(np.atleast_2d(ids)) if batched else None
    h = embed_with_pos(model, ids, pos_ids, segment_ids, training, rng)
    return encoder_forward(h, model, src_mask=mask, training=training,
                           rng=rng, records=records)


def _class_logits(model, ids, pos_ids, segment_ids, training, rng) -> Tensor:
    if np.asarray(ids).ndim == 1:
        ids, pos_ids, segment_ids = (np.atleast_2d(a)
                                     for a in (ids, pos_ids, segment_ids))
    enc = encode(model, ids, pos_ids, segment_ids, training=training, rng=rng)
    first = ad.reshape(ad.take(enc, [0], axis=1), (-1, model.cfg.d_model))
    return ad.add(ad.matmul(first, model.params["cls.w"]), model.params["cls.b"])


def classify(model: BertModel, ids, pos_ids, segment_ids) -> np.ndarray:
    """Class probabilities from the first position's final representation."""
    batched = np.asarray(ids).ndim == 2
    with ad.no_grad():
        logits = _class_logits(model, ids, pos_ids, segment_ids,
                               training=False, rng=None)
        probs = ad.softmax(logits, axis=-1).data
    return probs if batched else probs[0]


def finetune_step(model: BertModel, batch: dict, optimizer: Adam,
                  learning_rate: float, rng) -> float:
    """One supervised batch: cross entropy on the classifier softmax, one
    Adam update. Every parameter trains, the POS table included."""
    logits = _class_logits(model, batch["ids"], batch["pos_ids"],
                           batch["segment_ids"], training=True, rng=rng)
    loss = ad.cross_entropy_label_smoothed(
        logits, np.asarray(batch["labels"], dtype=np.int64), eps=0.0)
    ad.backward(loss)
    optimizer.step(learning_rate)
    optimizer.zero_grad()
    return loss.item()


def pad_classification_batch(items, pad_id: int = PAD_ID) -> dict:
    """Right-pad (ids, pos_ids, segment_ids, label) tuples into arrays."""
    n = len(items)
    width = max(len(ids) for ids, _, _, _ in items)
    batch = {
        "ids": np.full((n, width), pad_id, dtype=np.int64),
        "pos_ids": np.zeros((n, width), dtype=np.int64),
        "segment_ids": np.zeros((n, width), dtype=np.int64),
        "labels": np.zeros(n, dtype=np.int64),
    }
    for i, (ids, pos, seg, label) in enumerate(items):
        batch["ids"][i, : len(ids)] = ids
        batch["pos_ids"][i, : len(pos)] = pos
        batch["segment_ids"][i, : len(seg)] = seg
        batch["labels"][i] = label
    return batch
