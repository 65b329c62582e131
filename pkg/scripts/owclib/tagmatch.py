import asyncio
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from .aggregate import successful
from .conceptsplitter import ConceptSplitter, NgramConceptSplitter
from .config import WrongBy
from .embeddings import Embeddings
from .errors import BackendError
from .metrics import concept_similarity_over
from .records import Diagnostic, PredictionRecord, ScoreKey, ScoreRecord, ThresholdConfig

logger = logging.getLogger(__name__)


@dataclass
class ModelTagMatch:
    wrong_count: int = 0
    matched_count: int = 0

    @property
    def fraction(self) -> float:
        return self.matched_count / self.wrong_count if self.wrong_count else 0.0


@dataclass
class TagMatchReport:
    """
    Share of each model's wrong predictions that match one of the image's multi-label tags
    """

    threshold: float
    wrong_by: WrongBy
    models: Dict[str, ModelTagMatch] = field(default_factory=dict)
    matches: Dict[ScoreKey, Tuple[bool, float, str]] = field(default_factory=dict)
    failures: Dict[ScoreKey, str] = field(default_factory=dict)
    diagnostics: List[Diagnostic] = field(default_factory=list)

    def to_dict(self) -> Dict[str, object]:
        return {
            "threshold": self.threshold,
            "wrong_by": self.wrong_by.value,
            "models": {
                model_id: {
                    "wrong_count": counts.wrong_count,
                    "matched_count": counts.matched_count,
                    "fraction": counts.fraction,
                }
                for model_id, counts in sorted(self.models.items())
            },
            "failures": {"/".join(key): error for key, error in sorted(self.failures.items())},
        }


def is_wrong(score: ScoreRecord, wrong_by: WrongBy) -> bool:
    return (score.ti if wrong_by == WrongBy.TI else score.li) == 0


async def best_tag_similarity(
    prediction: PredictionRecord, tags: Sequence[str], embedder: Embeddings, splitter: ConceptSplitter
) -> Tuple[float, str]:
    """Each tag takes the ground-truth slot of concept similarity; returns the best CS and its tag."""
    concepts = splitter.split(prediction.raw_text, prediction.key)
    best_value, best_tag = 0.0, ""
    for tag in tags:
        value, _ = await concept_similarity_over(tag, concepts, embedder)
        if value > best_value or not best_tag:
            best_value, best_tag = value, tag
    return best_value, best_tag


async def tag_match(
    scores: Sequence[ScoreRecord],
    predictions: Sequence[PredictionRecord],
    tags: Mapping[Tuple[str, str], List[str]],
    embedder: Embeddings,
    thresholds: ThresholdConfig = ThresholdConfig(),
    splitter: Optional[ConceptSplitter] = None,
    wrong_by: WrongBy = WrongBy.LI,
) -> TagMatchReport:
    splitter = splitter or NgramConceptSplitter()
    report = TagMatchReport(threshold=thresholds.tag_match_threshold, wrong_by=wrong_by)
    by_key = {prediction.key: prediction for prediction in predictions}

    pending: List[Tuple[ScoreRecord, PredictionRecord, List[str]]] = []
    for score in sorted(successful(scores), key=lambda score: score.key):
        if not is_wrong(score, wrong_by):
            continue
        prediction = by_key.get(score.key)
        image_tags = tags.get((score.dataset_id, score.sample_id))
        if prediction is None or not image_tags:
            missing = "prediction" if prediction is None else "tags"
            report.diagnostics.append(Diagnostic(f"missing_{missing}", f"{'/'.join(score.key)} excluded"))
            continue
        pending.append((score, prediction, image_tags))

    async def match(prediction: PredictionRecord, image_tags: List[str]):
        try:
            return await best_tag_similarity(prediction, image_tags, embedder, splitter)
        except BackendError as error:
            return error

    results = await asyncio.gather(*(match(prediction, image_tags) for _, prediction, image_tags in pending))
    for (score, _, _), result in zip(pending, results):
        if isinstance(result, BackendError):
            logger.warning("Tag matching %s failed: %s", "/".join(score.key), result)
            report.failures[score.key] = str(result)
            continue
        value, tag = result
        matched = value > thresholds.tag_match_threshold
        counts = report.models.setdefault(score.model_id, ModelTagMatch())
        counts.wrong_count += 1
        counts.matched_count += int(matched)
        report.matches[score.key] = (matched, value, tag)

    for diagnostic in report.diagnostics:
        logger.warning("%s", diagnostic)
    return report


def tag_match_report_from_dict(data: Dict[str, Any]) -> TagMatchReport:
    report = TagMatchReport(threshold=float(data["threshold"]), wrong_by=WrongBy(data["wrong_by"]))
    for model_id, counts in data["models"].items():
        report.models[model_id] = ModelTagMatch(int(counts["wrong_count"]), int(counts["matched_count"]))
    return report
