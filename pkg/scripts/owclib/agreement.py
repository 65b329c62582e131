import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Set, Tuple

from .aggregate import quadrant_of, successful
from .config import AgreementBase
from .errors import InsufficientModelsError
from .records import QUADRANT_ORDER, Diagnostic, QuadrantLabel, ScoreRecord, ThresholdConfig

logger = logging.getLogger(__name__)

LOW = "low"
MEDIUM = "medium"
HIGH = "high"
BUCKETS = (LOW, MEDIUM, HIGH)
LOW_CUTOFF = 0.30
HIGH_CUTOFF = 0.70

SampleRef = Tuple[str, str]
# dataset_id -> sample_id -> model_id -> li
CorrectnessMatrix = Dict[str, Dict[str, Dict[str, int]]]


def correctness_matrix(scores: Sequence[ScoreRecord]) -> CorrectnessMatrix:
    matrix: CorrectnessMatrix = {}
    for score in successful(scores):
        matrix.setdefault(score.dataset_id, {}).setdefault(score.sample_id, {})[score.model_id] = score.li
    return matrix


def bucket_of(fraction: float) -> str:
    if fraction < LOW_CUTOFF:
        return LOW
    if fraction > HIGH_CUTOFF:
        return HIGH
    return MEDIUM


def agreement_buckets(correctness: CorrectnessMatrix) -> Dict[str, Dict[str, float]]:
    """
    Per dataset, the percentage of samples that few (under 30%), some, or most (over 70%) of the models
    got right. The fraction for a sample is taken over the models that scored it.
    """
    buckets: Dict[str, Dict[str, float]] = {}
    for dataset_id, samples in sorted(correctness.items()):
        counts = {bucket: 0 for bucket in BUCKETS}
        for verdicts in samples.values():
            counts[bucket_of(sum(verdicts.values()) / len(verdicts))] += 1
        total = sum(counts.values())
        buckets[dataset_id] = {bucket: counts[bucket] * 100 / total for bucket in BUCKETS}
    return buckets


def shared_percentage(left: Set[SampleRef], right: Set[SampleRef], base: AgreementBase) -> float:
    shared = len(left & right)
    if base == AgreementBase.Min:
        denominator = min(len(left), len(right))
    elif base == AgreementBase.Max:
        denominator = max(len(left), len(right))
    else:
        denominator = len(left | right)
    return shared * 100 / denominator


@dataclass
class PairwiseMatrix:
    quadrant: QuadrantLabel
    base: AgreementBase
    models: List[str]
    values: Dict[Tuple[str, str], float] = field(default_factory=dict)
    diagnostics: List[Diagnostic] = field(default_factory=list)

    def row(self, model_id: str) -> List[float]:
        return [self.values[(model_id, other)] for other in self.models]


def quadrant_sets(
    scores: Sequence[ScoreRecord], quadrant_filter: QuadrantLabel, thresholds: ThresholdConfig
) -> Dict[str, Set[SampleRef]]:
    sets: Dict[str, Set[SampleRef]] = {}
    for score in successful(scores):
        members = sets.setdefault(score.model_id, set())
        if quadrant_of(score.li, score.cs, thresholds) == quadrant_filter:
            members.add((score.dataset_id, score.sample_id))
    return sets


def pairwise_agreement(
    scores: Sequence[ScoreRecord],
    quadrant_filter: QuadrantLabel = QuadrantLabel.CorrectSpecific,
    base: AgreementBase = AgreementBase.Jaccard,
    thresholds: ThresholdConfig = ThresholdConfig(),
) -> PairwiseMatrix:
    sets = quadrant_sets(scores, quadrant_filter, thresholds)
    models = sorted(sets)
    if len(models) < 2:
        raise InsufficientModelsError(f"Pairwise agreement needs at least 2 models, found {len(models)}")

    matrix = PairwiseMatrix(quadrant=quadrant_filter, base=base, models=models)
    for index, left in enumerate(models):
        matrix.values[(left, left)] = 100.0
        for right in models[index + 1 :]:
            if not sets[left] and not sets[right]:
                value = 100.0
                diagnostic = Diagnostic(
                    "empty_sets", f"{left} and {right} place no sample in {quadrant_filter.value}, agreement set to 100"
                )
                logger.info("%s", diagnostic)
                matrix.diagnostics.append(diagnostic)
            elif base == AgreementBase.Min and not (sets[left] and sets[right]):
                value = 0.0
            else:
                value = shared_percentage(sets[left], sets[right], base)
            matrix.values[(left, right)] = value
            matrix.values[(right, left)] = value
    return matrix


@dataclass
class AgreementSummary:
    buckets: Dict[str, Dict[str, float]]
    matrices: Dict[QuadrantLabel, PairwiseMatrix]

    @property
    def diagnostics(self) -> List[Diagnostic]:
        return [diagnostic for matrix in self.matrices.values() for diagnostic in matrix.diagnostics]


def agreement_summary(
    scores: Sequence[ScoreRecord],
    base: AgreementBase = AgreementBase.Jaccard,
    thresholds: ThresholdConfig = ThresholdConfig(),
) -> AgreementSummary:
    return AgreementSummary(
        buckets=agreement_buckets(correctness_matrix(scores)),
        matrices={quadrant: pairwise_agreement(scores, quadrant, base, thresholds) for quadrant in QUADRANT_ORDER},
    )
