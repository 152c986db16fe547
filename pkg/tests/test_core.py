import pytest
from hypothesis import given, strategies as st

from fewtag.core import (
    DataError,
    Label,
    LabelSet,
    LabeledSequence,
    Tag,
    parse_conll,
    read_conll,
    validate_bio,
    write_conll,
)

from helpers import seq_from, tags_from


def test_label_rejects_empty_and_whitespace():
    with pytest.raises(ValueError):
        Label("")
    with pytest.raises(ValueError):
        Label("two words")


def test_tag_construction_rules():
    assert Tag.outside().kind == "O"
    assert Tag.begin("x").label == Label("x")
    with pytest.raises(ValueError):
        Tag("O", Label("x"))
    with pytest.raises(ValueError):
        Tag("B")
    with pytest.raises(ValueError):
        Tag("Z", Label("x"))


def test_tag_parse_roundtrip():
    for text in ("O", "B-artist", "I-city", "B-a-b"):
        assert str(Tag.parse(text)) == text
    with pytest.raises(DataError):
        Tag.parse("B-")
    with pytest.raises(DataError):
        Tag.parse("X-foo")


class TestTagIndex:
    def setup_method(self):
        self.ls = LabelSet(["l1", "l2"])

    def test_outside_is_index_zero(self):
        assert self.ls.tag_index(Tag.outside()) == 0

    def test_begin_first_label(self):
        assert self.ls.tag_index(Tag.begin("l1")) == 1

    def test_inside_second_label(self):
        assert self.ls.tag_index(Tag.inside("l2")) == 4

    def test_unknown_label_names_the_label(self):
        with pytest.raises(KeyError, match="nope"):
            self.ls.tag_index(Tag.begin("nope"))

    def test_canonical_order(self):
        assert [str(t) for t in self.ls.tags] == ["O", "B-l1", "I-l1", "B-l2", "I-l2"]


@given(st.lists(st.text(alphabet="abcdef", min_size=1, max_size=4), min_size=1, max_size=6, unique=True))
def test_tag_index_bijection(names):
    ls = LabelSet(names)
    assert ls.num_tags == 2 * len(names) + 1
    for i in range(ls.num_tags):
        assert ls.tag_index(ls.tag_at(i)) == i


def test_labelset_rejects_duplicates():
    with pytest.raises(ValueError):
        LabelSet(["a", "a"])


def test_validate_bio_examples():
    assert validate_bio(tags_from("B-l1 I-l1 O")) == []
    assert validate_bio(tags_from("O I-l1")) == [1]
    assert validate_bio(tags_from("B-l1 I-l2")) == [1]
    assert validate_bio(tags_from("I-l1 I-l1")) == [0]


def test_labeled_sequence_invariants():
    with pytest.raises(ValueError):
        LabeledSequence(tokens=("a",), tags=())
    with pytest.raises(ValueError):
        LabeledSequence(tokens=(), tags=())


def test_labels_present_counts_once():
    seq = seq_from("a:B-x b:I-x c:O d:B-y")
    assert seq.labels_present() == {"x", "y"}


def test_parse_conll_roundtrip(tmp_path):
    text = "play\tO\nhey\tB-song\njude\tI-song\n\nstop\tO\n"
    sentences = parse_conll(text.splitlines(True))
    assert len(sentences) == 2
    assert sentences[0].tokens == ("play", "hey", "jude")
    path = tmp_path / "out.conll"
    write_conll(str(path), sentences)
    assert read_conll(str(path)) == sentences


def test_parse_conll_rejects_bio_violation():
    with pytest.raises(DataError, match=r"positions \[1\]"):
        parse_conll(["a\tO\n", "b\tI-x\n", "\n"])


def test_parse_conll_rejects_bad_columns():
    with pytest.raises(DataError, match="token<TAB>tag"):
        parse_conll(["just-one-column\n"])
