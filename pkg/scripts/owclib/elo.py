import asyncio
import logging
import random
from dataclasses import dataclass, field
from typing import Any, Dict, List, NamedTuple, Sequence, Tuple

from .config import DEFAULT_MAX_PROMPT_CHARS
from .errors import InsufficientModelsError, OwcError
from .judges import Judge, Winner, judge_pairwise
from .records import DEFAULT_VARIANT, Diagnostic, EloConfig, PredictionRecord, SampleRecord

logger = logging.getLogger(__name__)

AVERAGE_SCOPE = "average"


def elo_expected(rating_a: float, rating_b: float) -> float:
    return 1.0 / (1.0 + 10.0 ** ((rating_b - rating_a) / 400.0))


def elo_update(rating_a: float, rating_b: float, outcome_a: int, k: float) -> Tuple[float, float]:
    """
    Standard Elo update. The same delta moves both ratings in opposite directions, so the pair's
    rating sum is conserved.
    """
    delta = k * (outcome_a - elo_expected(rating_a, rating_b))
    return rating_a + delta, rating_b - delta


@dataclass
class EloTable:
    dataset_id: str
    ratings: Dict[str, float]
    matches_played: int = 0
    skipped_pairs: int = 0
    diagnostics: List[Diagnostic] = field(default_factory=list)

    def ranking(self) -> List[Tuple[str, float]]:
        return sorted(self.ratings.items(), key=lambda item: (-item[1], item[0]))

    def to_dict(self) -> Dict[str, object]:
        return {
            "dataset_id": self.dataset_id,
            "ratings": dict(sorted(self.ratings.items())),
            "matches_played": self.matches_played,
            "skipped_pairs": self.skipped_pairs,
        }


@dataclass
class EloReport:
    tables: List[EloTable]
    average: EloTable

    @property
    def diagnostics(self) -> List[Diagnostic]:
        return [diagnostic for table in [*self.tables, self.average] for diagnostic in table.diagnostics]

    def to_dict(self) -> Dict[str, object]:
        return {"datasets": [table.to_dict() for table in self.tables], "average": self.average.to_dict()}


class Match(NamedTuple):
    model_a: str
    model_b: str
    sample_id: str


def sample_matches(models: Sequence[str], sample_ids: Sequence[str], pairs: int, rng: random.Random) -> List[Match]:
    """
    Draws ordered pairs of distinct models uniformly together with a uniform sample,
    then puts the pair in A/B slot order by a coin flip
    """
    matches: List[Match] = []
    for _ in range(pairs):
        first = rng.randrange(len(models))
        second = rng.randrange(len(models) - 1)
        if second >= first:
            second += 1
        sample_id = sample_ids[rng.randrange(len(sample_ids))]
        if rng.random() < 0.5:
            first, second = second, first
        matches.append(Match(models[first], models[second], sample_id))
    return matches


async def run_dataset_elo(
    dataset_id: str,
    predictions: Dict[Tuple[str, str], PredictionRecord],
    samples: Sequence[SampleRecord],
    judge: Judge,
    elo_config: EloConfig,
    semaphore: asyncio.Semaphore,
    max_prompt_chars: int = DEFAULT_MAX_PROMPT_CHARS,
) -> EloTable:
    models = sorted({model_id for model_id, _ in predictions})
    table = EloTable(dataset_id, {model_id: elo_config.initial_rating for model_id in models})
    ground_truths = {sample.sample_id: sample.ground_truth for sample in samples}
    rng = random.Random(f"{elo_config.seed}/{dataset_id}")
    matches = sample_matches(models, sorted(ground_truths), elo_config.pairs_per_dataset, rng)

    # Identical matches share one adjudication; ratings are then updated sequentially in sampled order
    async def adjudicate(match: Match):
        label_a = predictions.get((match.model_a, match.sample_id))
        label_b = predictions.get((match.model_b, match.sample_id))
        if label_a is None or label_b is None:
            return None
        async with semaphore:
            try:
                return await judge_pairwise(
                    judge, label_a.raw_text, label_b.raw_text, ground_truths[match.sample_id], max_prompt_chars
                )
            except OwcError as error:
                logger.warning("Skipping %s vs %s on %s/%s: %s", *match[:2], dataset_id, match.sample_id, error)
                return None

    unique = list(dict.fromkeys(matches))
    winners = dict(zip(unique, await asyncio.gather(*(adjudicate(match) for match in unique))))

    for match in matches:
        winner = winners[match]
        if winner is None:
            table.skipped_pairs += 1
            continue
        outcome_a = 1 if winner == Winner.A else 0
        table.ratings[match.model_a], table.ratings[match.model_b] = elo_update(
            table.ratings[match.model_a], table.ratings[match.model_b], outcome_a, elo_config.k_factor
        )
        table.matches_played += 1
    if table.skipped_pairs:
        table.diagnostics.append(
            Diagnostic("skipped_pairs", f"{table.skipped_pairs} pairs on {dataset_id} were not adjudicated")
        )
    logger.info("Elo on %s: %d matches, %d skipped", dataset_id, table.matches_played, table.skipped_pairs)
    return table


def average_table(tables: Sequence[EloTable]) -> EloTable:
    collected: Dict[str, List[float]] = {}
    for table in tables:
        for model_id, rating in table.ratings.items():
            collected.setdefault(model_id, []).append(rating)
    return EloTable(
        AVERAGE_SCOPE,
        {model_id: sum(ratings) / len(ratings) for model_id, ratings in sorted(collected.items())},
        matches_played=sum(table.matches_played for table in tables),
        skipped_pairs=sum(table.skipped_pairs for table in tables),
    )


async def run_elo(
    predictions: Sequence[PredictionRecord],
    samples: Sequence[SampleRecord],
    judge: Judge,
    elo_config: EloConfig = EloConfig(),
    variant_id: str = DEFAULT_VARIANT,
    parallelism: int = 4,
    max_prompt_chars: int = DEFAULT_MAX_PROMPT_CHARS,
) -> EloReport:
    """
    Ranks models per dataset from seeded pairwise judge verdicts, plus the per-model mean rating over datasets.
    Datasets on which fewer than two models have predictions are skipped with a diagnostic.
    """
    by_dataset: Dict[str, Dict[Tuple[str, str], PredictionRecord]] = {}
    for prediction in predictions:
        if prediction.variant_id == variant_id:
            by_dataset.setdefault(prediction.dataset_id, {})[(prediction.model_id, prediction.sample_id)] = prediction
    all_models = {model_id for dataset in by_dataset.values() for model_id, _ in dataset}
    if len(all_models) < 2:
        raise InsufficientModelsError(f"Elo ranking needs at least 2 models, found {len(all_models)}")

    samples_by_dataset: Dict[str, List[SampleRecord]] = {}
    for sample in samples:
        samples_by_dataset.setdefault(sample.dataset_id, []).append(sample)

    semaphore = asyncio.Semaphore(parallelism)
    runnable: List[str] = []
    skipped: List[Diagnostic] = []
    for dataset_id in sorted(samples_by_dataset):
        models = {model_id for model_id, _ in by_dataset.get(dataset_id, {})}
        if len(models) < 2:
            skipped.append(Diagnostic("excluded", f"dataset {dataset_id} has predictions from {len(models)} model(s)"))
        else:
            runnable.append(dataset_id)
    tables = list(
        await asyncio.gather(
            *(
                run_dataset_elo(
                    dataset_id,
                    by_dataset[dataset_id],
                    samples_by_dataset[dataset_id],
                    judge,
                    elo_config,
                    semaphore,
                    max_prompt_chars,
                )
                for dataset_id in runnable
            )
        )
    )
    average = average_table(tables)
    average.diagnostics.extend(skipped)
    for diagnostic in skipped:
        logger.warning("%s", diagnostic)
    return EloReport(tables=tables, average=average)


def elo_report_from_dict(data: Dict[str, Any]) -> EloReport:
    """Rebuilds a report stored by EloReport.to_dict, for rendering it again later."""

    def table(entry: Dict[str, Any]) -> EloTable:
        return EloTable(
            entry["dataset_id"],
            {model_id: float(rating) for model_id, rating in entry["ratings"].items()},
            matches_played=int(entry["matches_played"]),
            skipped_pairs=int(entry["skipped_pairs"]),
        )

    return EloReport(tables=[table(entry) for entry in data["datasets"]], average=table(data["average"]))
