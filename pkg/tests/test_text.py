from hypothesis import given
from hypothesis import strategies as st

from owclib.text import STOPWORD_SET, STOPWORDS, is_stopword_span, normalize, tokenize


def test_normalize_lowercases_and_strips_punctuation():
    assert normalize("  An Accordion. ") == "an accordion"
    assert normalize("Boeing 737-300") == "boeing 737 300"
    assert normalize("«Crème brûlée»!") == "crème brûlée"


def test_normalize_compatibility_forms():
    # Fullwidth letters and the "ﬁ" ligature fold to their ASCII forms
    assert normalize("ＣＡＲ") == "car"
    assert normalize("ﬁsh") == "fish"


def test_normalize_empty():
    assert normalize("") == ""
    assert normalize(" ... ") == ""


@given(st.text())
def test_normalize_idempotent(text):
    assert normalize(normalize(text)) == normalize(text)


def test_tokenize():
    assert tokenize("") == []
    assert tokenize("a wooden barrel") == ["a", "wooden", "barrel"]


def test_stopwords():
    assert len(STOPWORDS) == len(STOPWORD_SET)
    assert list(STOPWORDS) == sorted(STOPWORDS)
    assert is_stopword_span(["this", "is", "an"])
    assert not is_stopword_span(["an", "anchor"])
