from abc import ABC
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, Tuple

from .errors import MissingSplitsError
from .records import ScoreKey
from .text import is_stopword_span, normalize, tokenize


class SplitterMode(str, Enum):
    BuiltinNgram = "builtin_ngram"
    ExternalPrecomputed = "external_precomputed"


@dataclass(frozen=True)
class ConceptList:
    """
    Candidate concepts of a prediction. The full normalized prediction is always the first concept.
    An empty prediction yields the single degenerate concept "".
    """

    source_text: str
    concepts: Tuple[str, ...]


def _dedupe(spans: Iterable[str]) -> Tuple[str, ...]:
    seen = set()
    unique: List[str] = []
    for span in spans:
        if span not in seen:
            seen.add(span)
            unique.append(span)
    return tuple(unique)


def ngram_concepts(raw_text: str, max_n: int = 3) -> ConceptList:
    normalized = normalize(raw_text)
    if not normalized:
        return ConceptList(raw_text, ("",))
    tokens = tokenize(normalized)
    spans = [normalized]
    for n in range(1, max_n + 1):
        for start in range(len(tokens) - n + 1):
            gram = tokens[start : start + n]
            if not is_stopword_span(gram):
                spans.append(" ".join(gram))
    return ConceptList(raw_text, _dedupe(spans))


def precomputed_concepts(raw_text: str, spans: Iterable[str]) -> ConceptList:
    normalized = normalize(raw_text)
    extra = [span for span in (normalize(span) for span in spans) if span]
    if not normalized:
        # Empty prediction: the external spans are meaningless, keep the degenerate concept only
        return ConceptList(raw_text, ("",))
    return ConceptList(raw_text, _dedupe([normalized, *extra]))


def split_concepts(raw_text: str, splitter_mode: SplitterMode, spans: Optional[Iterable[str]] = None) -> ConceptList:
    if splitter_mode == SplitterMode.BuiltinNgram:
        return ngram_concepts(raw_text)
    if spans is None:
        raise MissingSplitsError("No precomputed splits entry for this prediction")
    return precomputed_concepts(raw_text, spans)


class ConceptSplitter(ABC):
    """
    Splits a prediction into the candidate concepts that concept similarity maximizes over
    """

    mode: SplitterMode

    def split(self, raw_text: str, key: Optional[ScoreKey] = None) -> ConceptList:
        raise NotImplementedError


class NgramConceptSplitter(ConceptSplitter):
    """
    Enumerates the full text followed by every token 1-, 2- and 3-gram that is not made only of stopwords.
    Stands in for a noun-chunk parser: the candidate set is a superset of typical noun chunks.
    """

    mode = SplitterMode.BuiltinNgram

    def __init__(self, max_n: int = 3):
        self.max_n = max_n

    def split(self, raw_text: str, key: Optional[ScoreKey] = None) -> ConceptList:
        return ngram_concepts(raw_text, self.max_n)


class PrecomputedConceptSplitter(ConceptSplitter):
    """
    Uses spans produced ahead of time by an external chunker, loaded from a splits file
    """

    mode = SplitterMode.ExternalPrecomputed

    def __init__(self, splits: Dict[ScoreKey, List[str]]):
        self.splits = splits

    def split(self, raw_text: str, key: Optional[ScoreKey] = None) -> ConceptList:
        spans = self.splits.get(key) if key is not None else None
        if spans is None:
            raise MissingSplitsError(f"No precomputed splits entry for prediction {'/'.join(key or ())}")
        return precomputed_concepts(raw_text, spans)
