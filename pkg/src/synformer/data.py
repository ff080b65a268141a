"""Parallel corpus ingestion, id conversion, padded batching, and subsampling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .annotate import AnnotatedSentence, PosTagSet, annotate
from .bpe import BOS, EOS, MergeTable, Vocab, build_vocab, encode_sentence
from .errors import DataFormatError
from .annotate import read_annotated


def load_parallel(src_path, tgt_path) -> list[tuple[AnnotatedSentence, str]]:
    """Pair an annotated source TSV with a line-aligned plain-text target file."""
    sources = read_annotated(src_path)
    with open(tgt_path, encoding="utf-8") as f:
        targets = [line.rstrip("\n") for line in f]
    while targets and not targets[-1].strip():
        targets.pop()
    if len(sources) != len(targets):
        raise DataFormatError(
            f"{src_path} has {len(sources)} sentences but {tgt_path} has "
            f"{len(targets)} lines")
    for i, t in enumerate(targets):
        if not t.strip():
            raise DataFormatError(f"{tgt_path}:{i + 1}: empty target sentence")
    return list(zip(sources, targets))


@dataclass
class Example:
    """One sentence pair converted to padded-ready id arrays."""

    src_ids: np.ndarray
    pos_ids: np.ndarray
    case_ids: np.ndarray
    postag_ids: np.ndarray
    tgt_in: np.ndarray          # BOS + target ids
    tgt_out: np.ndarray         # target ids + EOS
    src_subwords: list[str]
    tgt_subwords: list[str]
    source: AnnotatedSentence

    @property
    def tokens(self) -> int:
        return len(self.tgt_out)


def prepare_examples(pairs, merges: MergeTable, tagset: PosTagSet,
                     vocab: Vocab | None = None):
    """Annotate sources, segment targets, and map everything to ids.

    When ``vocab`` is None a shared vocabulary is built from the subwords of
    both sides. Returns (examples, vocab).
    """
    annotated = []
    tgt_segmented = []
    for src, tgt_text in pairs:
        annotate(src, merges, tagset)
        annotated.append(src)
        tgt_segmented.append(encode_sentence(tgt_text, merges))
    if vocab is None:
        vocab = build_vocab([s.subwords for s in annotated] + tgt_segmented)

    examples = []
    for src, tgt_subwords in zip(annotated, tgt_segmented):
        tgt_ids = vocab.ids_of(tgt_subwords)
        examples.append(Example(
            src_ids=np.asarray(vocab.ids_of(src.subwords), dtype=np.int64),
            pos_ids=np.asarray([f.pos_id for f in src.features], dtype=np.int64),
            case_ids=np.asarray([f.case_id for f in src.features], dtype=np.int64),
            postag_ids=np.asarray([f.position_id for f in src.features], dtype=np.int64),
            tgt_in=np.asarray([vocab.bos_id] + tgt_ids, dtype=np.int64),
            tgt_out=np.asarray(tgt_ids + [vocab.eos_id], dtype=np.int64),
            src_subwords=list(src.subwords),
            tgt_subwords=list(tgt_subwords),
            source=src,
        ))
    return examples, vocab


def pad_batch(examples: list[Example], pad_id: int = 0) -> dict:
    """Right-pad a group of examples into rectangular int arrays."""
    b = len(examples)
    m = max(len(e.src_ids) for e in examples)
    t = max(len(e.tgt_in) for e in examples)
    batch = {
        "src_ids": np.full((b, m), pad_id, dtype=np.int64),
        "pos_ids": np.zeros((b, m), dtype=np.int64),
        "case_ids": np.zeros((b, m), dtype=np.int64),
        "postag_ids": np.zeros((b, m), dtype=np.int64),
        "tgt_in": np.full((b, t), pad_id, dtype=np.int64),
        "tgt_out": np.full((b, t), pad_id, dtype=np.int64),
    }
    for i, e in enumerate(examples):
        batch["src_ids"][i, : len(e.src_ids)] = e.src_ids
        batch["pos_ids"][i, : len(e.pos_ids)] = e.pos_ids
        batch["case_ids"][i, : len(e.case_ids)] = e.case_ids
        batch["postag_ids"][i, : len(e.postag_ids)] = e.postag_ids
        batch["tgt_in"][i, : len(e.tgt_in)] = e.tgt_in
        batch["tgt_out"][i, : len(e.tgt_out)] = e.tgt_out
    return batch


def batch_iterator(examples: list[Example], batch_tokens: int,
                   rng: np.random.Generator):
    """Shuffle, then group examples until the target-token budget is filled."""
    order = rng.permutation(len(examples))
    group: list[Example] = []
    count = 0
    for idx in order:
        e = examples[idx]
        if group and count + e.tokens > batch_tokens:
            yield pad_batch(group)
            group, count = [], 0
        group.append(e)
        count += e.tokens
    if group:
        yield pad_batch(group)


def subsample(corpus: list, fraction: float, seed: int) -> list:
    """Seeded sample of ceil(fraction * n) items.

    Samples are nested: with the same seed, a smaller fraction is a prefix of
    a larger fraction's shuffled order. fraction=1 returns the corpus as-is.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    if fraction == 1.0:
        return list(corpus)
    n = len(corpus)
    keep = math.ceil(fraction * n)
    order = np.random.default_rng(seed).permutation(n)
    return [corpus[i] for i in order[:keep]]
