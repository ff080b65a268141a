"""Deterministic synthetic parallel corpora for experiments, tests, and demos.

Two generators: a word-mapping language (each source word has one fixed
target word) and a homograph language where one token per sentence is
ambiguous and its correct translation depends only on the POS tag supplied
with the corpus.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .annotate import AnnotatedSentence, fallback_pos

_SRC_ALPHABET = "abcdefghij"
_TGT_ALPHABET = "klmnopqrst"
_FILLER_POS_POOL = ("DET", "ADJ", "ADP", "ADV", "PRON")


def _make_words(rng: np.random.Generator, alphabet: str, count: int,
                min_len=3, max_len=6) -> list[str]:
    words: list[str] = []
    seen = set()
    while len(words) < count:
        length = int(rng.integers(min_len, max_len + 1))
        word = "".join(alphabet[i] for i in rng.integers(0, len(alphabet), length))
        if word not in seen:
            seen.add(word)
            words.append(word)
    return words


def mapping_corpus(n_pairs: int, seed: int, vocab_words: int = 30,
                   sent_len=(3, 8)) -> list[tuple[AnnotatedSentence, str]]:
    """Sentences in a toy language with a fixed word-for-word translation."""
    rng = np.random.default_rng([seed, 101])
    src_words = _make_words(rng, _SRC_ALPHABET, vocab_words)
    tgt_words = _make_words(rng, _TGT_ALPHABET, vocab_words)
    mapping = dict(zip(src_words, tgt_words))
    pairs = []
    for _ in range(n_pairs):
        length = int(rng.integers(sent_len[0], sent_len[1] + 1))
        chosen = [src_words[i] for i in rng.integers(0, vocab_words, length)]
        src = AnnotatedSentence(words=[(w, fallback_pos(w)) for w in chosen])
        tgt = " ".join(mapping[w] for w in chosen)
        pairs.append((src, tgt))
    return pairs


@dataclass
class HomographLexicon:
    """Sense-dependent targets: surface -> (noun translation, verb translation)."""

    senses: dict[str, tuple[str, str]]
    fillers: dict[str, str]          # filler surface -> target
    filler_pos: dict[str, str]       # filler surface -> fixed POS tag

    def expected_target(self, surface: str, pos: str) -> str:
        noun_t, verb_t = self.senses[surface]
        return noun_t if pos == "NOUN" else verb_t

    def wrong_target(self, surface: str, pos: str) -> str:
        noun_t, verb_t = self.senses[surface]
        return verb_t if pos == "NOUN" else noun_t


def homograph_corpus(n_pairs: int, seed: int, n_homographs: int = 8,
                     n_fillers: int = 24, sent_len=(3, 6)):
    """Corpus where exactly one source token per sentence is a homograph.

    The homograph's surface form is identical for both senses; only the POS
    column (NOUN or VERB, 50/50) determines which target word is correct, so
    a model without access to POS cannot beat the majority rate.

    Returns (pairs, lexicon); each pair is (annotated source, target text).
    """
    rng = np.random.default_rng([seed, 202])
    homographs = _make_words(rng, _SRC_ALPHABET, n_homographs)
    fillers = _make_words(rng, _SRC_ALPHABET, n_fillers + n_homographs)
    fillers = [w for w in fillers if w not in set(homographs)][:n_fillers]
    tgt = _make_words(rng, _TGT_ALPHABET, 2 * n_homographs + n_fillers)
    lexicon = HomographLexicon(
        senses={h: (tgt[2 * i], tgt[2 * i + 1]) for i, h in enumerate(homographs)},
        fillers=dict(zip(fillers, tgt[2 * n_homographs:])),
        filler_pos={w: _FILLER_POS_POOL[i % len(_FILLER_POS_POOL)]
                    for i, w in enumerate(fillers)},
    )
    pairs = []
    for _ in range(n_pairs):
        length = int(rng.integers(sent_len[0], sent_len[1] + 1))
        slot = int(rng.integers(0, length))
        homograph = homographs[int(rng.integers(0, n_homographs))]
        sense = "NOUN" if rng.random() < 0.5 else "VERB"
        words = []
        tgt_words = []
        for i in range(length):
            if i == slot:
                words.append((homograph, sense))
                tgt_words.append(lexicon.expected_target(homograph, sense))
            else:
                filler = fillers[int(rng.integers(0, n_fillers))]
                words.append((filler, lexicon.filler_pos[filler]))
                tgt_words.append(lexicon.fillers[filler])
        pairs.append((AnnotatedSentence(words=words), " ".join(tgt_words)))
    return pairs, lexicon


def homograph_slots(pair) -> list[tuple[str, str]]:
    """(surface, POS) of the homograph tokens in one source sentence."""
    src, _ = pair
    return [(w, p) for w, p in src.words if p in ("NOUN", "VERB")]


def score_homographs(pairs, hypotheses, lexicon: HomographLexicon) -> float:
    """Fraction of sentences whose decode contains the correct homograph
    target and not the wrong-sense target."""
    assert len(pairs) == len(hypotheses)
    hits = 0
    total = 0
    for pair, hyp in zip(pairs, hypotheses):
        tokens = set(hyp.split())
        for surface, pos in homograph_slots(pair):
            total += 1
            good = lexicon.expected_target(surface, pos)
            bad = lexicon.wrong_target(surface, pos)
            if good in tokens and bad not in tokens:
                hits += 1
    return hits / max(total, 1)


def write_parallel(pairs, src_path, tgt_path) -> None:
    """Write the annotated-TSV source file and the line-aligned target file."""
    with open(src_path, "w", encoding="utf-8") as f:
        for src, _ in pairs:
            for surface, pos in src.words:
                f.write(f"{surface}\t{pos}\n")
            f.write("\n")
    with open(tgt_path, "w", encoding="utf-8") as f:
        for _, tgt in pairs:
            f.write(tgt + "\n")
