"""Per-subword syntactic features: POS propagated from words, capitalization,
and B/M/E/O subword-position tags.

POS tags normally arrive with the corpus (annotated TSV, one ``surface<TAB>POS``
line per token, blank line between sentences). ``fallback_pos`` supplies a
deterministic heuristic tag when a corpus ships without POS columns.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .bpe import MergeTable, Segmentation, encode_word
from .errors import DataFormatError

UNK_POS = "UNK"

# Universal POS inventory (17 tags); UNK is pinned to id 0 so custom tagsets
# keep the unknown row stable.
UNIVERSAL_TAGS = (
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
)

POSITION_TAGS = ("B", "M", "E", "O")
POS_B, POS_M, POS_E, POS_O = range(4)


class PosTagSet:
    """Bijective POS tag <-> id map with UNK always present at id 0."""

    def __init__(self, tags=UNIVERSAL_TAGS):
        tags = tuple(t for t in tags if t != UNK_POS)
        self.tags = (UNK_POS,) + tags
        self._ids = {t: i for i, t in enumerate(self.tags)}
        if len(self._ids) != len(self.tags):
            raise DataFormatError("tagset contains duplicate tags")

    unk_id = 0

    def __len__(self) -> int:
        return len(self.tags)

    def id_of(self, tag: str) -> int:
        return self._ids.get(tag, self.unk_id)

    def tag_of(self, idx: int) -> str:
        return self.tags[idx]


@dataclass(frozen=True)
class FeatureTriple:
    """Syntactic features of one subword: POS id, case bit, position tag id."""

    pos_id: int
    case_id: int
    position_id: int


@dataclass
class AnnotatedSentence:
    """A sentence at word level plus, once annotated, aligned subword features."""

    words: list[tuple[str, str]]            # (surface, POS tag string)
    subwords: list[str] = field(default_factory=list)
    features: list[FeatureTriple] = field(default_factory=list)
    word_ids: list[int] = field(default_factory=list)  # originating word per subword

    @property
    def num_subwords(self) -> int:
        return len(self.subwords)

    def text(self) -> str:
        return " ".join(surface for surface, _ in self.words)


def case_feature(word: str) -> int:
    """1 iff the first character is an uppercase letter, else 0."""
    if not word:
        raise ValueError("cannot compute case of an empty word")
    return int(word[0].isupper())


def propagate_pos(word_pos: int, segmentation: Segmentation) -> list[int]:
    """Every subword inherits the POS id of the word it came from."""
    if len(segmentation) == 0:
        raise ValueError("segmentation is empty")
    return [word_pos] * len(segmentation)


def subword_position_tags(segmentation: Segmentation) -> list[int]:
    """B/M/E tags for multi-subword words, O when the subword is the whole word."""
    k = len(segmentation)
    if k == 0:
        raise ValueError("segmentation is empty")
    if k == 1:
        return [POS_O]
    return [POS_B] + [POS_M] * (k - 2) + [POS_E]


_FALLBACK_LEXICON = {
    "DET": {"the", "a", "an", "this", "that", "these", "those", "every", "each"},
    "ADP": {"of", "in", "on", "at", "to", "for", "with", "from", "by", "over", "under"},
    "CCONJ": {"and", "or", "but", "nor", "yet"},
    "SCONJ": {"if", "because", "while", "although", "whether", "since"},
    "PRON": {"i", "you", "he", "she", "it", "we", "they",
             "me", "him", "her", "us", "them", "who", "what"},
    "AUX": {"is", "am", "are", "was", "were", "be", "been", "being",
            "have", "has", "had", "do", "does", "did",
            "will", "would", "can", "could", "shall", "should", "may", "might", "must"},
    "PART": {"not"},
}

_FALLBACK_SUFFIXES = (
    ("ly", "ADV"),
    ("ing", "VERB"), ("ed", "VERB"), ("ize", "VERB"), ("ise", "VERB"), ("ify", "VERB"),
    ("tion", "NOUN"), ("sion", "NOUN"), ("ment", "NOUN"), ("ness", "NOUN"), ("ity", "NOUN"),
    ("ous", "ADJ"), ("ful", "ADJ"), ("ive", "ADJ"), ("able", "ADJ"), ("ible", "ADJ"),
    ("al", "ADJ"), ("ic", "ADJ"),
)


def fallback_pos(word: str) -> str:
    """Deterministic heuristic POS tag for corpora without POS columns.

    Rules, first match wins:
      1. no alphanumeric characters        -> PUNCT
      2. contains a digit, no letters      -> NUM
      3. closed-class lexicon (lowercased) -> its class
      4. known derivational suffix         -> suffix class (longest suffix first)
      5. first character uppercase         -> PROPN
      6. otherwise                         -> NOUN
    """
    if not word:
        return UNK_POS
    if not any(ch.isalnum() for ch in word):
        return "PUNCT"
    if any(ch.isdigit() for ch in word) and not any(ch.isalpha() for ch in word):
        return "NUM"
    lowered = word.lower()
    for tag, words in _FALLBACK_LEXICON.items():
        if lowered in words:
            return tag
    for suffix, tag in sorted(_FALLBACK_SUFFIXES, key=lambda st: -len(st[0])):
        if len(lowered) > len(suffix) + 1 and lowered.endswith(suffix):
            return tag
    if word[0].isupper():
        return "PROPN"
    return "NOUN"


def annotate(sentence: AnnotatedSentence, merges: MergeTable,
             tagset: PosTagSet) -> AnnotatedSentence:
    """Fill the subword-level fields: segmentation plus aligned feature triples."""
    if not sentence.words:
        raise ValueError("sentence has no words to annotate")
    subwords: list[str] = []
    features: list[FeatureTriple] = []
    word_ids: list[int] = []
    for w, (surface, pos) in enumerate(sentence.words):
        seg = encode_word(surface, merges)
        pos_id = tagset.id_of(pos if pos is not None else fallback_pos(surface))
        case_id = case_feature(surface)
        for p_id, s_id, subword in zip(
            propagate_pos(pos_id, seg), subword_position_tags(seg), seg.subwords
        ):
            subwords.append(subword)
            features.append(FeatureTriple(pos_id=p_id, case_id=case_id, position_id=s_id))
            word_ids.append(w)
    sentence.subwords = subwords
    sentence.features = features
    sentence.word_ids = word_ids
    return sentence


def read_annotated(path) -> list[AnnotatedSentence]:
    """Read word-level sentences from annotated TSV.

    One token per line as ``surface<TAB>POS``; a line with only a surface form
    gets a heuristic tag from ``fallback_pos``. Sentences are separated by
    blank lines. Raises :class:`DataFormatError` with the line number on
    malformed lines.
    """
    sentences: list[AnnotatedSentence] = []
    words: list[tuple[str, str]] = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                if words:
                    sentences.append(AnnotatedSentence(words=words))
                    words = []
                continue
            parts = line.split("\t")
            if len(parts) == 1:
                words.append((parts[0], fallback_pos(parts[0])))
            elif len(parts) == 2:
                if not parts[0]:
                    raise DataFormatError(f"{path}:{lineno}: empty surface form")
                words.append((parts[0], parts[1]))
            else:
                raise DataFormatError(
                    f"{path}:{lineno}: expected 1 or 2 tab-separated columns, "
                    f"got {len(parts)}"
                )
    if words:
        sentences.append(AnnotatedSentence(words=words))
    return sentences


def write_annotated_subwords(sentences, path, tagset: PosTagSet) -> None:
    """Write subword-level annotation: ``subword<TAB>pos<TAB>case<TAB>postag``."""
    with open(path, "w", encoding="utf-8") as f:
        for sentence in sentences:
            for subword, feat in zip(sentence.subwords, sentence.features):
                f.write(
                    f"{subword}\t{tagset.tag_of(feat.pos_id)}\t{feat.case_id}"
                    f"\t{POSITION_TAGS[feat.position_id]}\n"
                )
            f.write("\n")
