import asyncio
import logging
from abc import ABC
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

from .conceptsplitter import ConceptSplitter
from .config import RunConfig
from .embeddings import Embeddings
from .judges import Judge
from .metrics import score_prediction
from .records import PredictionRecord, SampleRecord, ScoreKey
from .runstore import RunStore, checkpoint_and_resume

logger = logging.getLogger(__name__)


class Strategy(ABC):
    """
    Abstract strategy over a run store. It has a single setup step to perform any required initialization,
    and then a run step that does the work.
    """

    async def setup(self, run_store: RunStore):
        raise NotImplementedError

    async def run(self, run_store: RunStore) -> "ScoreSummary":
        raise NotImplementedError


@dataclass
class ScoreSummary:
    total: int = 0
    already_scored: int = 0
    scored: int = 0
    failed: int = 0
    orphans: int = 0
    deferred: int = 0
    failure_codes: Counter = field(default_factory=Counter)

    def failure_exit_code(self) -> Optional[int]:
        return min(self.failure_codes) if self.failure_codes else None

    def describe(self) -> str:
        tally = ", ".join(f"exit {code}: {count}" for code, count in sorted(self.failure_codes.items()))
        return (
            f"{self.total} predictions: {self.already_scored} already scored, {self.scored} scored, "
            f"{self.failed} failed{f' ({tally})' if tally else ''}, {self.deferred} deferred, {self.orphans} orphaned"
        )


class ScoreStrategy(Strategy):
    """
    Scores every prediction that has no successful record in the run store yet, concurrently,
    appending each record as soon as it is computed
    """

    def __init__(
        self,
        samples: Sequence[SampleRecord],
        predictions: Sequence[PredictionRecord],
        embedder: Embeddings,
        judge: Judge,
        splitter: ConceptSplitter,
        run_config: RunConfig,
        parallelism: int = 4,
        limit: Optional[int] = None,
        force_resume: bool = False,
    ):
        self.samples = samples
        self.predictions = predictions
        self.embedder = embedder
        self.judge = judge
        self.splitter = splitter
        self.run_config = run_config
        self.parallelism = parallelism
        self.limit = limit
        self.force_resume = force_resume

    async def setup(self, run_store: RunStore):
        # The hash check comes first, so a refused resume leaves the store untouched
        checkpoint_and_resume(run_store, [], self.run_config.config_hash(), self.force_resume)
        run_store.initialize(self.run_config.snapshot(), self.run_config.config_hash())
        run_store.write_samples(self.samples)

    async def run(self, run_store: RunStore) -> ScoreSummary:
        samples: Dict[Tuple[str, str], SampleRecord] = {
            (sample.dataset_id, sample.sample_id): sample for sample in self.samples
        }
        by_key: Dict[ScoreKey, PredictionRecord] = {}
        summary = ScoreSummary(total=len(self.predictions))
        for prediction in self.predictions:
            if (prediction.dataset_id, prediction.sample_id) not in samples:
                logger.warning("Skipping orphan prediction %s", "/".join(prediction.key))
                summary.orphans += 1
                continue
            by_key[prediction.key] = prediction

        pending = sorted(by_key)
        remaining = checkpoint_and_resume(run_store, pending, self.run_config.config_hash(), self.force_resume)
        summary.already_scored = len(pending) - len(remaining)
        if self.limit is not None and len(remaining) > self.limit:
            summary.deferred = len(remaining) - self.limit
            remaining = remaining[: self.limit]

        semaphore = asyncio.Semaphore(self.parallelism)

        async def score(key: ScoreKey):
            prediction = by_key[key]
            async with semaphore:
                record = await score_prediction(
                    samples[(prediction.dataset_id, prediction.sample_id)],
                    prediction,
                    self.embedder,
                    self.judge,
                    self.splitter,
                    self.run_config.ti_mode,
                    self.run_config.max_prompt_chars,
                )
            await run_store.append(record)
            return record

        try:
            records = await asyncio.gather(*(score(key) for key in remaining))
        finally:
            run_store.end_session()
        for record in records:
            if record.failed:
                summary.failed += 1
                summary.failure_codes[record.error_code] += 1
            else:
                summary.scored += 1
        logger.info("%s", summary.describe())
        return summary
