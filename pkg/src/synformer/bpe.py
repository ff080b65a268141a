"""Byte-pair-encoding subword segmentation with a shared source/target vocabulary.

Merges are learned by iteratively fusing the most frequent adjacent symbol
pair; ties are broken lexicographically on the pair so learning is fully
deterministic. The final subword of every word carries an end-of-word marker,
which makes segmentation invertible.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .errors import DataFormatError

END_OF_WORD = "</w>"

PAD, BOS, EOS, UNK, CLS, SEP, MASK = SPECIAL_SYMBOLS = (
    "<pad>", "<bos>", "<eos>", "<unk>", "<cls>", "<sep>", "<mask>",
)


@dataclass(frozen=True)
class MergeTable:
    """Ordered BPE merge rules. Immutable, safe to share across threads."""

    merges: tuple[tuple[str, str], ...]

    @property
    def num_merges(self) -> int:
        return len(self.merges)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for left, right in self.merges:
                f.write(f"{left} {right}\n")

    @classmethod
    def load(cls, path) -> "MergeTable":
        merges = []
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split(" ")
                if len(parts) != 2:
                    raise DataFormatError(
                        f"{path}:{lineno}: expected 'left right', got {line!r}"
                    )
                merges.append((parts[0], parts[1]))
        return cls(tuple(merges))


@dataclass(frozen=True)
class Segmentation:
    """One word split into subword symbols; the last symbol ends with the marker."""

    word: str
    subwords: tuple[str, ...]
    end_of_word_marker: tuple[bool, ...]

    def __len__(self) -> int:
        return len(self.subwords)


class Vocab:
    """Bijective symbol<->id map with the special symbols pinned to ids 0..6."""

    def __init__(self, symbols):
        symbols = tuple(symbols)
        if symbols[: len(SPECIAL_SYMBOLS)] != SPECIAL_SYMBOLS:
            raise DataFormatError(
                f"vocabulary must start with the special symbols {SPECIAL_SYMBOLS}"
            )
        self.symbols = symbols
        self._ids = {s: i for i, s in enumerate(symbols)}
        if len(self._ids) != len(symbols):
            raise DataFormatError("vocabulary contains duplicate symbols")

    pad_id, bos_id, eos_id, unk_id, cls_id, sep_id, mask_id = range(7)

    def __len__(self) -> int:
        return len(self.symbols)

    @property
    def size(self) -> int:
        return len(self.symbols)

    def id_of(self, symbol: str) -> int:
        return self._ids.get(symbol, self.unk_id)

    def symbol_of(self, idx: int) -> str:
        return self.symbols[idx]

    def ids_of(self, symbols) -> list[int]:
        return [self.id_of(s) for s in symbols]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for i, s in enumerate(self.symbols):
                f.write(f"{s}\t{i}\n")

    @classmethod
    def load(cls, path) -> "Vocab":
        entries = []
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 2 or not parts[1].isdigit():
                    raise DataFormatError(
                        f"{path}:{lineno}: expected 'symbol<TAB>id', got {line!r}"
                    )
                entries.append((int(parts[1]), parts[0]))
        entries.sort()
        if [i for i, _ in entries] != list(range(len(entries))):
            raise DataFormatError(f"{path}: vocabulary ids are not contiguous from 0")
        return cls(tuple(s for _, s in entries))


def _merge_pass(symbols: list[str], left: str, right: str) -> list[str]:
    """Replace every adjacent (left, right) occurrence left-to-right."""
    out = []
    i = 0
    n = len(symbols)
    while i < n:
        if i + 1 < n and symbols[i] == left and symbols[i + 1] == right:
            out.append(left + right)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return out


def _word_symbols(word: str) -> list[str]:
    return list(word[:-1]) + [word[-1] + END_OF_WORD]


def learn_bpe(corpus, num_merges: int) -> MergeTable:
    """Learn up to ``num_merges`` merge rules from an iterable of sentences.

    Each sentence is whitespace-split into words; the most frequent adjacent
    symbol pair is merged per round, breaking frequency ties by taking the
    lexicographically smallest pair. Stops early when no mergeable pair
    remains, so exactly ``min(num_merges, available pairs)`` rules come back.
    """
    if num_merges < 0:
        raise ValueError(f"num_merges must be >= 0, got {num_merges}")
    word_freq = Counter()
    for sentence in corpus:
        word_freq.update(sentence.split())
    if not word_freq:
        raise ValueError("cannot learn merges from an empty corpus")

    for word in word_freq:
        if END_OF_WORD in word:
            raise DataFormatError(
                f"corpus word {word!r} contains the reserved marker {END_OF_WORD!r}"
            )

    seqs = {word: _word_symbols(word) for word in word_freq}
    merges: list[tuple[str, str]] = []
    used = set()
    for _ in range(num_merges):
        pair_freq = Counter()
        for word, freq in word_freq.items():
            syms = seqs[word]
            for pair in zip(syms, syms[1:]):
                pair_freq[pair] += freq
        candidates = [(f, p) for p, f in pair_freq.items() if p not in used]
        if not candidates:
            break
        best = min(candidates, key=lambda fp: (-fp[0], fp[1]))[1]
        merges.append(best)
        used.add(best)
        left, right = best
        for word, syms in seqs.items():
            if left in syms:
                seqs[word] = _merge_pass(syms, left, right)
    return MergeTable(tuple(merges))


def encode_word(word: str, merges: MergeTable) -> Segmentation:
    """Segment one word by applying the merge rules in learned order to a fixpoint."""
    if not word:
        raise ValueError("cannot encode an empty word")
    if any(ch.isspace() for ch in word):
        raise ValueError(f"word must be whitespace-free, got {word!r}")
    if END_OF_WORD in word:
        raise DataFormatError(
            f"word {word!r} contains the reserved marker {END_OF_WORD!r}"
        )
    syms = _word_symbols(word)
    changed = True
    while changed:
        changed = False
        present = set(syms)
        for left, right in merges.merges:
            if left not in present or right not in present:
                continue
            new = _merge_pass(syms, left, right)
            if len(new) != len(syms):
                syms = new
                present = set(syms)
                changed = True
    markers = tuple(i == len(syms) - 1 for i in range(len(syms)))
    return Segmentation(word=word, subwords=tuple(syms), end_of_word_marker=markers)


def encode_sentence(sentence: str, merges: MergeTable) -> list[str]:
    """Segment a whitespace-tokenized sentence into a flat subword list."""
    out: list[str] = []
    for word in sentence.split():
        out.extend(encode_word(word, merges).subwords)
    return out


def decode(subwords) -> str:
    """Invert segmentation: strip markers, rejoin subwords into space-separated words."""
    words = []
    current: list[str] = []
    for s in subwords:
        if s.endswith(END_OF_WORD):
            current.append(s[: -len(END_OF_WORD)])
            words.append("".join(current))
            current = []
        else:
            current.append(s)
    if current:
        words.append("".join(current))
    return " ".join(words)


def build_vocab(segmented_corpus) -> Vocab:
    """Build the shared vocabulary from segmented sentences of both languages."""
    seen = set()
    for subwords in segmented_corpus:
        seen.update(subwords)
    return Vocab(SPECIAL_SYMBOLS + tuple(sorted(seen - set(SPECIAL_SYMBOLS))))
