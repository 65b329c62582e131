import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np

from .conceptsplitter import ConceptList, ConceptSplitter
from .config import DEFAULT_MAX_PROMPT_CHARS, TiMode
from .embeddings import Embeddings, cosine
from .errors import OwcError, ValidationError
from .judges import DEFAULT_QUESTION, MAX_VERDICT_ATTEMPTS, Judge, adjudicate, render_inclusion_prompt
from .records import PredictionRecord, SampleRecord, ScoreRecord
from .text import normalize, tokenize

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MetricVector:
    ti: int
    li: int
    ss_signed: float
    cs: float
    best_concept: str


def contains_contiguous(haystack: Sequence[str], needle: Sequence[str]) -> bool:
    if not needle:
        return False
    width = len(needle)
    return any(list(haystack[start : start + width]) == list(needle) for start in range(len(haystack) - width + 1))


def text_inclusion(ground_truth: str, prediction: str, mode: TiMode = TiMode.Token) -> int:
    """
    1 iff the normalized ground truth occurs in the normalized prediction: as a contiguous token
    subsequence in token mode, as a raw substring in char mode. The direction is ground truth in prediction.
    """
    target = normalize(ground_truth)
    answer = normalize(prediction)
    if not target:
        return 0
    if mode == TiMode.Char:
        return int(target in answer)
    return int(contains_contiguous(tokenize(answer), tokenize(target)))


def best_cosine(target: np.ndarray, candidates: Sequence[np.ndarray]) -> Tuple[float, int]:
    """Highest cosine to target and its index; the earliest candidate wins ties."""
    best_value = float("-inf")
    best_index = 0
    for index, candidate in enumerate(candidates):
        value = cosine(target, candidate)
        if value > best_value:
            best_value = value
            best_index = index
    return best_value, best_index


async def semantic_similarity(ground_truth: str, prediction: str, embedder: Embeddings) -> float:
    target, answer = await embedder.embed_batch([normalize(ground_truth), normalize(prediction)])
    return cosine(target, answer)


async def concept_similarity_over(
    ground_truth: str, concepts: ConceptList, embedder: Embeddings
) -> Tuple[float, str]:
    vectors = await embedder.embed_batch([normalize(ground_truth), *concepts.concepts])
    value, index = best_cosine(vectors[0], vectors[1:])
    return max(0.0, value), concepts.concepts[index]


async def concept_similarity(
    ground_truth: str,
    prediction: Union[str, PredictionRecord],
    embedder: Embeddings,
    splitter: ConceptSplitter,
) -> Tuple[float, str]:
    if isinstance(prediction, PredictionRecord):
        concepts = splitter.split(prediction.raw_text, prediction.key)
    else:
        concepts = splitter.split(prediction)
    return await concept_similarity_over(ground_truth, concepts, embedder)


async def llama_inclusion(
    ground_truth: str,
    prediction: str,
    judge: Judge,
    question: str = DEFAULT_QUESTION,
    max_prompt_chars: int = DEFAULT_MAX_PROMPT_CHARS,
    max_attempts: int = MAX_VERDICT_ATTEMPTS,
) -> Tuple[int, str]:
    # The raw prediction is judged verbatim
    prompt = render_inclusion_prompt(prediction, ground_truth, question, max_prompt_chars)
    return await adjudicate(judge, prompt, max_attempts)


async def compute_metrics(
    sample: SampleRecord,
    prediction: PredictionRecord,
    embedder: Embeddings,
    judge: Judge,
    splitter: ConceptSplitter,
    ti_mode: TiMode = TiMode.Token,
    max_prompt_chars: int = DEFAULT_MAX_PROMPT_CHARS,
) -> Tuple[MetricVector, str]:
    concepts = splitter.split(prediction.raw_text, prediction.key)
    # concepts[0] is the normalized prediction, so SS and CS come from a single embedding batch
    texts: List[str] = [normalize(sample.ground_truth), *concepts.concepts]
    vectors = await embedder.embed_batch(texts)
    ss = cosine(vectors[0], vectors[1])
    cs, index = best_cosine(vectors[0], vectors[1:])
    li, judge_raw = await llama_inclusion(
        sample.ground_truth, prediction.raw_text, judge, max_prompt_chars=max_prompt_chars
    )
    vector = MetricVector(
        ti=text_inclusion(sample.ground_truth, prediction.raw_text, ti_mode),
        li=li,
        ss_signed=ss,
        cs=max(0.0, cs),
        best_concept=concepts.concepts[index],
    )
    return vector, judge_raw


async def score_prediction(
    sample: SampleRecord,
    prediction: PredictionRecord,
    embedder: Embeddings,
    judge: Judge,
    splitter: ConceptSplitter,
    ti_mode: TiMode = TiMode.Token,
    max_prompt_chars: int = DEFAULT_MAX_PROMPT_CHARS,
) -> ScoreRecord:
    """
    Scores one prediction. Backend, judge and split failures do not propagate: they yield a failed record
    that a resumed run retries.
    """
    if (sample.dataset_id, sample.sample_id) != (prediction.dataset_id, prediction.sample_id):
        raise ValidationError(
            f"Prediction {'/'.join(prediction.key)} does not belong to sample {sample.dataset_id}/{sample.sample_id}"
        )
    try:
        vector, judge_raw = await compute_metrics(
            sample, prediction, embedder, judge, splitter, ti_mode, max_prompt_chars
        )
    except OwcError as error:
        logger.warning("Scoring %s failed: %s", "/".join(prediction.key), error)
        return ScoreRecord.failure(prediction.key, error, error.exit_code)
    return ScoreRecord(
        *prediction.key,
        ti=vector.ti,
        li=vector.li,
        ss=vector.ss_signed,
        cs=vector.cs,
        best_concept=vector.best_concept,
        judge_raw=judge_raw,
    )
