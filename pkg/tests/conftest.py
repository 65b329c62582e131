import os
from typing import List

import pytest

from owclib.conceptsplitter import NgramConceptSplitter
from owclib.config import BackendKind
from owclib.embeddings import MockEmbeddingService
from owclib.judges import MockJudgeService
from owclib.loaders import load_manifest, load_predictions
from owclib.metrics import score_prediction
from owclib.records import PredictionRecord, SampleRecord, ScoreRecord

from .mocks import descriptor

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def fixture_path(name: str) -> str:
    return os.path.join(FIXTURES, name)


@pytest.fixture
def samples() -> List[SampleRecord]:
    return load_manifest(fixture_path("c101.jsonl")).samples + load_manifest(fixture_path("fgvc.jsonl")).samples


@pytest.fixture
def predictions() -> List[PredictionRecord]:
    return load_predictions(fixture_path("predictions.jsonl"))


@pytest.fixture
def mock_embedder() -> MockEmbeddingService:
    return MockEmbeddingService(descriptor(BackendKind.MockEmbed, "mock-trigram-256"))


@pytest.fixture
def mock_judge() -> MockJudgeService:
    rules = MockJudgeService.load_rules(fixture_path("judge_rules.json"))
    return MockJudgeService.from_dict(descriptor(BackendKind.MockJudge, "mock-rules"), rules)


@pytest.fixture
def store_dir(tmp_path) -> str:
    return str(tmp_path / "run")


async def score_all(samples, predictions, embedder, judge) -> List[ScoreRecord]:
    by_ref = {(sample.dataset_id, sample.sample_id): sample for sample in samples}
    return [
        await score_prediction(
            by_ref[(prediction.dataset_id, prediction.sample_id)], prediction, embedder, judge, NgramConceptSplitter()
        )
        for prediction in predictions
    ]
