import pytest

from owclib.conceptsplitter import (
    NgramConceptSplitter,
    PrecomputedConceptSplitter,
    SplitterMode,
    ngram_concepts,
    split_concepts,
)
from owclib.errors import MissingSplitsError
from owclib.loaders import load_splits
from owclib.records import ScoreKey

from .conftest import fixture_path


def test_ngram_concepts_full_text_first():
    concepts = ngram_concepts("This is an anchor")
    assert concepts.concepts[0] == "this is an anchor"
    assert "anchor" in concepts.concepts
    assert "an anchor" in concepts.concepts
    # Spans made only of stopwords are not concepts
    assert "this is" not in concepts.concepts
    assert "is" not in concepts.concepts


def test_ngram_concepts_no_duplicates():
    concepts = ngram_concepts("dog dog dog")
    assert concepts.concepts == ("dog dog dog", "dog", "dog dog")


def test_ngram_concepts_empty_prediction():
    assert ngram_concepts("").concepts == ("",)
    assert ngram_concepts("?!").concepts == ("",)


def test_ngram_concepts_max_n():
    concepts = NgramConceptSplitter(max_n=1).split("a small red car")
    assert concepts.concepts == ("a small red car", "small", "red", "car")


def test_precomputed_splitter():
    splits = load_splits(fixture_path("splits.jsonl"))
    splitter = PrecomputedConceptSplitter(splits)
    key = ScoreKey("model-a", "C101", "c101-004", "base")
    concepts = splitter.split("a wooden barrel", key)
    assert concepts.concepts == ("a wooden barrel", "barrel")
    assert splitter.mode == SplitterMode.ExternalPrecomputed


def test_precomputed_splitter_missing_entry():
    splitter = PrecomputedConceptSplitter({})
    with pytest.raises(MissingSplitsError):
        splitter.split("camera", ScoreKey("model-a", "C101", "c101-007", "base"))


def test_split_concepts_modes():
    assert split_concepts("bonsai tree", SplitterMode.BuiltinNgram).concepts[0] == "bonsai tree"
    assert split_concepts("bonsai tree", SplitterMode.ExternalPrecomputed, ["Bonsai"]).concepts == (
        "bonsai tree",
        "bonsai",
    )
    assert split_concepts("", SplitterMode.ExternalPrecomputed, ["tree"]).concepts == ("",)
    with pytest.raises(MissingSplitsError):
        split_concepts("bonsai tree", SplitterMode.ExternalPrecomputed)
