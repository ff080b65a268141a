"""Corpus BLEU-4: clipped n-gram precisions, geometric mean, brevity penalty.

Tokenization is whitespace splitting, case-sensitive, and identical for
hypotheses and references, so score deltas between two systems evaluated here
are directly comparable. Scores live in [0, 1].
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

MAX_ORDER = 4


@dataclass
class SentenceStats:
    """Clipped match and candidate counts per n-gram order for one sentence."""

    matches: list[int]
    totals: list[int]
    hyp_length: int
    ref_length: int


@dataclass
class BleuReport:
    score: float
    precisions: list[float]
    brevity_penalty: float
    hyp_length: int
    ref_length: int
    per_sentence: list[SentenceStats] = field(default_factory=list)


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def sentence_stats(hypothesis: str, reference: str) -> SentenceStats:
    h, r = hypothesis.split(), reference.split()
    matches, totals = [], []
    for n in range(1, MAX_ORDER + 1):
        hc = _ngram_counts(h, n)
        rc = _ngram_counts(r, n)
        matches.append(sum(min(c, rc[g]) for g, c in hc.items()))
        totals.append(max(len(h) - n + 1, 0))
    return SentenceStats(matches, totals, len(h), len(r))


def corpus_bleu(hypotheses, references) -> BleuReport:
    """Corpus-level BLEU-4 with brevity penalty.

    Orders with no candidate n-grams anywhere in the corpus are skipped; a
    zero match count at any remaining order makes the whole score 0 (strict
    geometric mean, no smoothing).
    """
    hypotheses = list(hypotheses)
    references = list(references)
    if not hypotheses:
        raise ValueError("cannot score an empty corpus")
    if len(hypotheses) != len(references):
        raise ValueError(
            f"{len(hypotheses)} hypotheses vs {len(references)} references")

    per_sentence = [sentence_stats(h, r) for h, r in zip(hypotheses, references)]
    matches = [sum(s.matches[n] for s in per_sentence) for n in range(MAX_ORDER)]
    totals = [sum(s.totals[n] for s in per_sentence) for n in range(MAX_ORDER)]
    hyp_len = sum(s.hyp_length for s in per_sentence)
    ref_len = sum(s.ref_length for s in per_sentence)

    precisions = [m / t if t else 0.0 for m, t in zip(matches, totals)]
    log_terms = []
    for m, t in zip(matches, totals):
        if t == 0:
            continue
        if m == 0:
            log_terms = None
            break
        log_terms.append(math.log(m / t))

    if hyp_len == 0 or not log_terms:
        score = 0.0
        bp = 0.0 if hyp_len == 0 else _brevity_penalty(hyp_len, ref_len)
    else:
        bp = _brevity_penalty(hyp_len, ref_len)
        score = bp * math.exp(sum(log_terms) / len(log_terms))
    return BleuReport(score=score, precisions=precisions, brevity_penalty=bp,
                      hyp_length=hyp_len, ref_length=ref_len,
                      per_sentence=per_sentence)


def _brevity_penalty(hyp_len: int, ref_len: int) -> float:
    if hyp_len >= ref_len:
        return 1.0
    return math.exp(1.0 - ref_len / hyp_len)


def bleu(hypotheses, references) -> float:
    """Corpus BLEU-4 score in [0, 1]."""
    return corpus_bleu(hypotheses, references).score
