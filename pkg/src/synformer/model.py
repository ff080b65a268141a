"""Encoder-decoder Transformer with syntax-infused source embeddings.

Source subword embeddings (width D-d) are concatenated with a d-wide block
built from the three syntactic features; the decoder embeds target subwords
at the full width D. Attention weights can be captured per layer/head/kind
for later heatmap export.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ShapeError
from .optim import Adam, glorot_init, seeded_rng

PAD_ID, BOS_ID, EOS_ID = 0, 1, 2  # specials are pinned by the vocabulary

CASE_VOCAB = 2
POSTAG_VOCAB = 4

MASKED_SCORE = -1e9  # drives softmax weights to exactly 0.0 in float64


@dataclass
class ModelConfig:
    """Shape configuration; width invariants are enforced at construction."""

    vocab_size: int
    pos_vocab_size: int = 18
    d_model: int = 48          # total embedding width D
    feature_dim: int = 4       # syntax block width d
    layers: int = 2
    heads: int = 4
    ffn_width: int = 128
    dropout: float = 0.1
    label_smoothing: float = 0.1
    features: str = "sum"      # sum | concat | none | zero-pad
    feature_dims: tuple[int, int, int] | None = None  # concat mode widths
    max_len: int = 512

    def __post_init__(self):
        if self.features not in ("sum", "concat", "none", "zero-pad"):
            raise ValueError(f"unknown feature mode {self.features!r}")
        if self.d_model % self.heads != 0:
            raise ValueError(
                f"d_model {self.d_model} not divisible by heads {self.heads}")
        if self.features != "none":
            if self.feature_dim <= 0 or self.feature_dim >= self.d_model:
                raise ValueError(
                    f"feature width {self.feature_dim} must leave a positive "
                    f"word-embedding width below d_model {self.d_model}")
        if self.features == "concat":
            if self.feature_dims is None:
                base = self.feature_dim // 3
                self.feature_dims = (self.feature_dim - 2 * base, base, base)
            if sum(self.feature_dims) != self.feature_dim:
                raise ValueError(
                    f"per-feature widths {self.feature_dims} must sum to "
                    f"{self.feature_dim}")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.heads

    @property
    def word_dim(self) -> int:
        if self.features == "none":
            return self.d_model
        return self.d_model - self.feature_dim

    @property
    def has_feature_tables(self) -> bool:
        return self.features in ("sum", "concat")


@dataclass
class AttentionRecord:
    """Softmax weights captured from one attention site."""

    layer: int
    head: int
    kind: str                  # self-enc | self-dec | cross
    weights: np.ndarray        # query steps x key positions

    def __post_init__(self):
        self.weights = np.asarray(self.weights)


@lru_cache(maxsize=8)
def sinusoidal_encoding(max_len: int, dim: int) -> np.ndarray:
    """Classic sin/cos positional table of shape (max_len, dim)."""
    pe = np.zeros((max_len, dim))
    position = np.arange(max_len)[:, None].astype(np.float64)
    div = np.exp(np.arange(0, dim, 2) * (-math.log(10000.0) / dim))
    pe[:, 0::2] = np.sin(position * div)
    pe[:, 1::2] = np.cos(position * div[: dim // 2])
    return pe


class TransformerModel:
    """Trainable parameters plus forward passes for training and decoding."""

    def __init__(self, cfg: ModelConfig, seed: int):
        self.cfg = cfg
        self.seed = seed
        self.frozen: set[str] = set()
        self.params: dict[str, Tensor] = {}
        self._build_params()

    def _param(self, name: str, shape, kind="glorot"):
        if kind == "glorot":
            data = glorot_init(shape, seeded_rng(self.seed, name))
        elif kind == "ones":
            data = np.ones(shape)
        else:
            data = np.zeros(shape)
        self.params[name] = ad.parameter(data, name)

    def _build_params(self):
        cfg = self.cfg
        self._param("src_embed", (cfg.vocab_size, cfg.word_dim))
        if cfg.has_feature_tables:
            if cfg.features == "sum":
                dims = (cfg.feature_dim,) * 3
            else:
                dims = cfg.feature_dims
            self._param("feat_pos", (cfg.pos_vocab_size, dims[0]))
            self._param("feat_case", (CASE_VOCAB, dims[1]))
            self._param("feat_postag", (POSTAG_VOCAB, dims[2]))
        self._param("tgt_embed", (cfg.vocab_size, cfg.d_model))
        for i in range(cfg.layers):
            self._attention_block(f"enc{i}.self")
            self._ffn_block(f"enc{i}")
        for i in range(cfg.layers):
            self._attention_block(f"dec{i}.self")
            self._attention_block(f"dec{i}.cross")
            self._ffn_block(f"dec{i}")
        self._param("out_proj.w", (cfg.d_model, cfg.vocab_size))
        self._param("out_proj.b", (cfg.vocab_size,), kind="zeros")

    def _attention_block(self, prefix: str):
        cfg = self.cfg
        for h in range(cfg.heads):
            for w in ("wk", "wq", "wv"):
                self._param(f"{prefix}.h{h}.{w}", (cfg.d_model, cfg.head_dim))
        self._param(f"{prefix}.wo", (cfg.d_model, cfg.d_model))
        self._param(f"{prefix}.norm.gain", (cfg.d_model,), kind="ones")
        self._param(f"{prefix}.norm.bias", (cfg.d_model,), kind="zeros")

    def _ffn_block(self, prefix: str):
        cfg = self.cfg
        self._param(f"{prefix}.ffn.w1", (cfg.d_model, cfg.ffn_width))
        self._param(f"{prefix}.ffn.b1", (cfg.ffn_width,), kind="zeros")
        self._param(f"{prefix}.ffn.w2", (cfg.ffn_width, cfg.d_model))
        self._param(f"{prefix}.ffn.b2", (cfg.d_model,), kind="zeros")
        self._param(f"{prefix}.ffn.norm.gain", (cfg.d_model,), kind="ones")
        self._param(f"{prefix}.ffn.norm.bias", (cfg.d_model,), kind="zeros")

    def trainable_params(self) -> dict[str, Tensor]:
        return {k: v for k, v in self.params.items() if k not in self.frozen}

    def freeze(self, names) -> None:
        self.frozen.update(names)

    def zero_feature_tables(self) -> None:
        for name in ("feat_pos", "feat_case", "feat_postag"):
            if name in self.params:
                self.params[name].data[:] = 0.0


# ---------------------------------------------------------------------------
# embeddings
# ---------------------------------------------------------------------------

def embed_source(model: TransformerModel, subword_ids, features, training=False,
                 rng=None) -> Tensor:
    """Word block (scaled by sqrt D) fused with the syntax block, plus the
    positional encoding over the full width.

    ``features`` maps "pos"/"case"/"postag" to int arrays shaped like
    ``subword_ids``.
    """
    cfg = model.cfg
    subword_ids = np.asarray(subword_ids, dtype=np.int64)
    if cfg.has_feature_tables:
        for key in ("pos", "case", "postag"):
            if np.asarray(features[key]).shape != subword_ids.shape:
                raise ShapeError(
                    f"feature array {key!r} has shape "
                    f"{np.asarray(features[key]).shape}, expected "
                    f"{subword_ids.shape}")
    word = ad.scale(ad.embedding_lookup(model.params["src_embed"], subword_ids),
                    math.sqrt(cfg.d_model))
    if cfg.features == "sum":
        feat = ad.add(
            ad.add(ad.embedding_lookup(model.params["feat_pos"], features["pos"]),
                   ad.embedding_lookup(model.params["feat_case"], features["case"])),
            ad.embedding_lookup(model.params["feat_postag"], features["postag"]))
        h = ad.concat([word, feat], axis=-1)
    elif cfg.features == "concat":
        feat = ad.concat(
            [ad.embedding_lookup(model.params["feat_pos"], features["pos"]),
             ad.embedding_lookup(model.params["feat_case"], features["case"]),
             ad.embedding_lookup(model.params["feat_postag"], features["postag"])],
            axis=-1)
        h = ad.concat([word, feat], axis=-1)
    elif cfg.features == "zero-pad":
        pad_block = Tensor(np.zeros(subword_ids.shape + (cfg.feature_dim,)))
        h = ad.concat([word, pad_block], axis=-1)
    else:
        h = word
    pe = Tensor(sinusoidal_encoding(cfg.max_len, cfg.d_model)[: subword_ids.shape[-1]])
    h = ad.add(h, pe)
    return ad.dropout(h, cfg.dropout, training, rng)


def embed_target(model: TransformerModel, subword_ids, training=False,
                 rng=None) -> Tensor:
    """Full-width target lookup plus positional encoding; no syntax features."""
    cfg = model.cfg
    subword_ids = np.asarray(subword_ids, dtype=np.int64)
    h = ad.scale(ad.embedding_lookup(model.params["tgt_embed"], subword_ids),
                 math.sqrt(cfg.d_model))
    pe = Tensor(sinusoidal_encoding(cfg.max_len, cfg.d_model)[: subword_ids.shape[-1]])
    return ad.dropout(ad.add(h, pe), cfg.dropout, training, rng)


# ---------------------------------------------------------------------------
# attention
# ---------------------------------------------------------------------------

def attention(h: Tensor, w_k: Tensor, w_q: Tensor, w_v: Tensor, mask=None,
              context: Tensor | None = None) -> tuple[Tensor, Tensor]:
    """Scaled dot-product attention block.

    Queries come from ``h``; keys and values from ``context`` when given
    (cross-attention) or from ``h`` itself. ``mask`` is boolean with True
    marking *disallowed* key positions; masked scores are pushed to -1e9,
    which underflows to exactly zero weight after the softmax.
    Returns the attention output and the softmax weights.
    """
    source = context if context is not None else h
    k = ad.matmul(source, w_k)
    q = ad.matmul(h, w_q)
    v = ad.matmul(source, w_v)
    scores = ad.scale(ad.matmul(q, ad.transpose(k)), 1.0 / math.sqrt(w_k.shape[-1]))
    if mask is not None:
        scores = ad.masked_fill(scores, mask, MASKED_SCORE)
    weights = ad.softmax(scores, axis=-1)
    return ad.matmul(weights, v), weights


def multi_head(model: TransformerModel, h: Tensor, prefix: str, mask=None,
               context: Tensor | None = None, records=None, layer=0,
               kind="self-enc") -> Tensor:
    """Independent heads over the shared input, concatenated then projected."""
    params = model.params
    outputs = []
    for head in range(model.cfg.heads):
        base = f"{prefix}.h{head}"
        out, weights = attention(
            h, params[f"{base}.wk"], params[f"{base}.wq"], params[f"{base}.wv"],
            mask=mask, context=context)
        outputs.append(out)
        if records is not None:
            w = weights.data
            records.append(AttentionRecord(
                layer=layer, head=head, kind=kind,
                weights=w[0] if w.ndim == 3 and w.shape[0] == 1 else w))
    return ad.matmul(ad.concat(outputs, axis=-1), params[f"{prefix}.wo"])


def _sublayer(model, prefix, x, sub_out, training, rng):
    """Residual + layer norm around a sublayer output (post-norm)."""
    params = model.params
    dropped = ad.dropout(sub_out, model.cfg.dropout, training, rng)
    return ad.layer_norm(ad.add(x, dropped),
                         params[f"{prefix}.gain"], params[f"{prefix}.bias"])


def _ffn(model, prefix, x):
    params = model.params
    inner = ad.relu(ad.add(ad.matmul(x, params[f"{prefix}.w1"]),
                           params[f"{prefix}.b1"]))
    return ad.add(ad.matmul(inner, params[f"{prefix}.w2"]), params[f"{prefix}.b2"])


def encoder_forward(embedded: Tensor, model: TransformerModel, src_mask=None,
                    training=False, rng=None, records=None) -> Tensor:
    """Stack of self-attention + feed-forward subunits, post-norm residuals."""
    x = embedded
    for i in range(model.cfg.layers):
        attn = multi_head(model, x, f"enc{i}.self", mask=src_mask,
                          records=records, layer=i, kind="self-enc")
        x = _sublayer(model, f"enc{i}.self.norm", x, attn, training, rng)
        x = _sublayer(model, f"enc{i}.ffn.norm", x, _ffn(model, f"enc{i}.ffn", x),
                      training, rng)
    return x


def decoder_forward(tgt_embedded: Tensor, enc_out: Tensor,
                    model: TransformerModel, self_mask=None, cross_mask=None,
                    training=False, rng=None, records=None) -> Tensor:
    """Causal self-attention, cross-attention over the encoder, feed-forward;
    final projection to vocabulary logits."""
    x = tgt_embedded
    for i in range(model.cfg.layers):
        self_attn = multi_head(model, x, f"dec{i}.self", mask=self_mask,
                               records=records, layer=i, kind="self-dec")
        x = _sublayer(model, f"dec{i}.self.norm", x, self_attn, training, rng)
        cross = multi_head(model, x, f"dec{i}.cross", mask=cross_mask,
                           context=enc_out, records=records, layer=i, kind="cross")
        x = _sublayer(model, f"dec{i}.cross.norm", x, cross, training, rng)
        x = _sublayer(model, f"dec{i}.ffn.norm", x, _ffn(model, f"dec{i}.ffn", x),
                      training, rng)
    return ad.add(ad.matmul(x, model.params["out_proj.w"]),
                  model.params["out_proj.b"])


# ---------------------------------------------------------------------------
# masks
# ---------------------------------------------------------------------------

def causal_mask(t: int) -> np.ndarray:
    """True above the diagonal: position i may not attend to keys j > i."""
    return np.triu(np.ones((t, t), dtype=bool), k=1)


def key_padding_mask(ids: np.ndarray, pad_id: int = PAD_ID) -> np.ndarray:
    """(B, 1, M) True where the key position is padding."""
    ids = np.asarray(ids)
    return (ids == pad_id)[:, None, :]


def decoder_self_mask(tgt_ids: np.ndarray, pad_id: int = PAD_ID) -> np.ndarray:
    t = np.asarray(tgt_ids).shape[-1]
    return causal_mask(t) | key_padding_mask(tgt_ids, pad_id)


# ---------------------------------------------------------------------------
# training and decoding
# ---------------------------------------------------------------------------

def forward_logits(model: TransformerModel, batch: dict, training=False,
                   rng=None, records=None) -> Tensor:
    """Teacher-forced forward pass over a padded batch."""
    src_mask = key_padding_mask(batch["src_ids"])
    src = embed_source(model, batch["src_ids"],
                       {k: batch[f"{k}_ids"] for k in ("pos", "case", "postag")}
                       if model.cfg.has_feature_tables else None,
                       training=training, rng=rng)
    enc_out = encoder_forward(src, model, src_mask=src_mask, training=training,
                              rng=rng, records=records)
    tgt = embed_target(model, batch["tgt_in"], training=training, rng=rng)
    return decoder_forward(
        tgt, enc_out, model,
        self_mask=decoder_self_mask(batch["tgt_in"]),
        cross_mask=src_mask,
        training=training, rng=rng, records=records)


@dataclass
class AccumState:
    """Gradient-accumulation bookkeeping: step the optimizer every N batches,
    normalizing summed gradients by the total token count."""

    every: int = 2
    count: int = 0
    tokens: int = 0


def train_step(model: TransformerModel, batch: dict, optimizer: Adam,
               accum: AccumState, learning_rate: float, rng) -> float:
    """One teacher-forced batch: label-smoothed loss, backward, and an Adam
    update on every ``accum.every``-th call. Returns the per-token loss."""
    logits = forward_logits(model, batch, training=True, rng=rng)
    loss = ad.cross_entropy_label_smoothed(
        logits, batch["tgt_out"], eps=model.cfg.label_smoothing,
        pad_id=PAD_ID, reduction="sum")
    ad.backward(loss)
    n_tokens = int((batch["tgt_out"] != PAD_ID).sum())
    accum.count += 1
    accum.tokens += n_tokens
    if accum.count % accum.every == 0:
        optimizer.step(learning_rate, scale=1.0 / max(accum.tokens, 1))
        optimizer.zero_grad()
        accum.tokens = 0
    return loss.item() / n_tokens


def greedy_decode(model: TransformerModel, src_ids, features, max_len: int,
                  collect_attention=False):
    """BOS-seeded argmax decoding until EOS or ``max_len`` tokens.

    Returns (generated ids without BOS/EOS, attention records). Deterministic:
    the same model and input always produce the same output.
    """
    if max_len <= 0:
        return [], []
    src_ids = np.asarray(src_ids, dtype=np.int64)[None, :]
    feats = None
    if model.cfg.has_feature_tables:
        feats = {k: np.asarray(v, dtype=np.int64)[None, :]
                 for k, v in features.items()}
    records: list[AttentionRecord] = []
    with ad.no_grad():
        enc_records = records if collect_attention else None
        src = embed_source(model, src_ids, feats)
        enc_out = encoder_forward(src, model, records=enc_records)
        generated = [BOS_ID]
        for _ in range(max_len):
            tgt_in = np.asarray(generated, dtype=np.int64)[None, :]
            logits = decoder_forward(
                embed_target(model, tgt_in), enc_out, model,
                self_mask=causal_mask(len(generated)))
            next_id = int(np.argmax(logits.data[0, -1]))
            generated.append(next_id)
            if next_id == EOS_ID:
                break
        if collect_attention:
            tgt_in = np.asarray(generated[:-1], dtype=np.int64)[None, :]
            decoder_forward(embed_target(model, tgt_in), enc_out, model,
                            self_mask=causal_mask(len(generated) - 1),
                            records=records)
    out = generated[1:]
    if out and out[-1] == EOS_ID:
        out = out[:-1]
    return out, records
