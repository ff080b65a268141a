"""POS propagation, case bits, B/M/E/O position tags, and the TSV reader."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synformer.annotate import (
    POS_B,
    POS_E,
    POS_M,
    POS_O,
    POSITION_TAGS,
    AnnotatedSentence,
    PosTagSet,
    UNIVERSAL_TAGS,
    annotate,
    case_feature,
    fallback_pos,
    propagate_pos,
    read_annotated,
    subword_position_tags,
    write_annotated_subwords,
)
from synformer.bpe import MergeTable, encode_word, learn_bpe
from synformer.errors import DataFormatError


@pytest.fixture
def tagset():
    return PosTagSet()


class TestPosTagSet:
    def test_unk_always_present(self, tagset):
        assert tagset.tag_of(0) == "UNK"
        assert tagset.id_of("NOT-A-TAG") == tagset.unk_id

    def test_bijective(self, tagset):
        assert len(tagset) == 18  # 17 universal tags + UNK
        for tag in UNIVERSAL_TAGS:
            assert tagset.tag_of(tagset.id_of(tag)) == tag

    def test_custom_tags(self):
        custom = PosTagSet(("NN", "VB"))
        assert custom.id_of("NN") == 1
        assert custom.id_of("VB") == 2
        assert custom.id_of("whatever") == 0


class TestPropagatePos:
    def test_broadcast_to_all_subwords(self, tagset):
        merges = MergeTable((("s", "u"), ("su", "n"), ("s", "h"),
                             ("i", "n"), ("in", "e</w>")))
        seg = encode_word("sunshine", merges)
        noun = tagset.id_of("NOUN")
        assert propagate_pos(noun, seg) == [noun, noun, noun]

    def test_single_subword(self, tagset):
        seg = encode_word("run", MergeTable((("r", "u"), ("ru", "n</w>"))))
        verb = tagset.id_of("VERB")
        assert propagate_pos(verb, seg) == [verb]

    def test_three_way_broadcast(self, tagset):
        merges = MergeTable((("u", "n"), ("b", "e"), ("be", "l"), ("bel", "i"),
                             ("beli", "e"), ("belie", "v"),
                             ("a", "b"), ("ab", "l"), ("abl", "e</w>")))
        seg = encode_word("unbelievable", merges)
        adj = tagset.id_of("ADJ")
        assert seg.subwords == ("un", "believ", "able</w>")
        assert propagate_pos(adj, seg) == [adj, adj, adj]


class TestCaseFeature:
    def test_capitalized_proper_noun(self):
        assert case_feature("Bwelle") == 1

    def test_lowercase(self):
        assert case_feature("father") == 0

    def test_digits_are_uncapitalized(self):
        assert case_feature("42") == 0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            case_feature("")

    @given(st.text(min_size=1, max_size=12))
    @settings(max_examples=100, deadline=None)
    def test_depends_on_word_alone(self, word):
        assert case_feature(word) == case_feature(word)
        assert case_feature(word) in (0, 1)


class TestPositionTags:
    def test_three_subwords(self):
        merges = MergeTable((("s", "u"), ("su", "n"), ("s", "h"),
                             ("i", "n"), ("in", "e</w>")))
        seg = encode_word("sunshine", merges)
        assert subword_position_tags(seg) == [POS_B, POS_M, POS_E]

    def test_whole_word_is_o(self):
        seg = encode_word("run", MergeTable((("r", "u"), ("ru", "n</w>"))))
        assert subword_position_tags(seg) == [POS_O]

    def test_two_subwords_no_middle(self):
        seg = encode_word("lower", MergeTable((("l", "o"),
                                               ("w", "e"), ("we", "r</w>"))))
        assert seg.subwords == ("lo", "wer</w>")
        assert subword_position_tags(seg) == [POS_B, POS_E]

    @given(word=st.text(alphabet="abcdef", min_size=1, max_size=12),
           n=st.integers(0, 20))
    @settings(max_examples=60, deadline=None)
    def test_grammar(self, word, n):
        # every word's tag sequence is exactly O, or B E, or B M... M E
        table = learn_bpe([word + " padding text"], num_merges=n)
        tags = subword_position_tags(encode_word(word, table))
        if len(tags) == 1:
            assert tags == [POS_O]
        else:
            assert tags[0] == POS_B and tags[-1] == POS_E
            assert all(t == POS_M for t in tags[1:-1])


class TestFallbackPos:
    @pytest.mark.parametrize("word,expected", [
        ("...", "PUNCT"),
        ("42", "NUM"),
        ("the", "DET"),
        ("and", "CCONJ"),
        ("quickly", "ADV"),
        ("running", "VERB"),
        ("happiness", "NOUN"),
        ("wonderful", "ADJ"),
        ("Berlin", "PROPN"),
        ("breakable", "ADJ"),
        ("table", "NOUN"),  # too short for the -able suffix rule to fire
        ("dog", "NOUN"),
    ])
    def test_rule_table(self, word, expected):
        assert fallback_pos(word) == expected

    @given(st.text(min_size=0, max_size=10))
    @settings(max_examples=100, deadline=None)
    def test_never_fails_and_deterministic(self, word):
        tag = fallback_pos(word)
        assert tag == fallback_pos(word)
        assert tag in UNIVERSAL_TAGS + ("UNK",)


class TestAnnotate:
    def test_alignment_invariant(self, tagset):
        corpus = ["The sun shines warmly", "a lower bound holds"]
        table = learn_bpe(corpus, num_merges=15)
        for text in corpus:
            sentence = AnnotatedSentence(
                words=[(w, fallback_pos(w)) for w in text.split()])
            annotate(sentence, table, tagset)
            assert len(sentence.features) == len(sentence.subwords)
            assert len(sentence.word_ids) == len(sentence.subwords)

    def test_pos_and_case_constant_within_word(self, tagset):
        table = learn_bpe(["Sunshine sunshine shine"], num_merges=3)
        sentence = AnnotatedSentence(words=[("Sunshine", "NOUN"), ("shine", "VERB")])
        annotate(sentence, table, tagset)
        by_word = {}
        for feat, wid in zip(sentence.features, sentence.word_ids):
            by_word.setdefault(wid, []).append(feat)
        for wid, feats in by_word.items():
            assert len({f.pos_id for f in feats}) == 1
            assert len({f.case_id for f in feats}) == 1
        assert by_word[0][0].case_id == 1
        assert by_word[1][0].case_id == 0

    def test_unknown_pos_string_maps_to_unk(self, tagset):
        sentence = AnnotatedSentence(words=[("blorp", "MYSTERY-TAG")])
        annotate(sentence, MergeTable(()), tagset)
        assert sentence.features[0].pos_id == tagset.unk_id

    def test_position_grammar_per_word(self, tagset):
        corpus = ["internationalization is a very long word indeed"]
        table = learn_bpe(corpus, num_merges=10)
        sentence = AnnotatedSentence(
            words=[(w, fallback_pos(w)) for w in corpus[0].split()])
        annotate(sentence, table, tagset)
        groups = {}
        for feat, wid in zip(sentence.features, sentence.word_ids):
            groups.setdefault(wid, []).append(feat.position_id)
        for tags in groups.values():
            if len(tags) == 1:
                assert tags == [POS_O]
            else:
                assert tags[0] == POS_B and tags[-1] == POS_E
                assert all(t == POS_M for t in tags[1:-1])


class TestReadAnnotated:
    def test_blocks_and_columns(self, tmp_path):
        path = tmp_path / "corpus.src.tsv"
        path.write_text(
            "The\tDET\nsun\tNOUN\n\nIt\tPRON\nshines\tVERB\n\n",
            encoding="utf-8",
        )
        sentences = read_annotated(path)
        assert len(sentences) == 2
        assert sentences[0].words == [("The", "DET"), ("sun", "NOUN")]
        assert sentences[1].words == [("It", "PRON"), ("shines", "VERB")]

    def test_missing_pos_column_uses_fallback(self, tmp_path):
        path = tmp_path / "plain.tsv"
        path.write_text("Berlin\nis\n\n", encoding="utf-8")
        sentences = read_annotated(path)
        assert sentences[0].words == [("Berlin", "PROPN"), ("is", "AUX")]

    def test_malformed_line_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("fine\tNOUN\nbad\tX\tY\tZ\n", encoding="utf-8")
        with pytest.raises(DataFormatError, match="bad.tsv:2"):
            read_annotated(path)

    def test_subword_output_columns(self, tmp_path, tagset):
        src = tmp_path / "in.tsv"
        src.write_text("Sunshine\tNOUN\n\n", encoding="utf-8")
        sentences = read_annotated(src)
        table = learn_bpe(["sun shine Sunshine"], num_merges=4)
        annotate(sentences[0], table, tagset)
        out = tmp_path / "out.tsv"
        write_annotated_subwords(sentences, out, tagset)
        lines = out.read_text(encoding="utf-8").splitlines()
        body = [l for l in lines if l]
        assert all(len(l.split("\t")) == 4 for l in body)
        for line in body:
            _, pos, case, postag = line.split("\t")
            assert pos == "NOUN" and case == "1"
            assert postag in POSITION_TAGS
