import pytest

from owclib.conceptsplitter import NgramConceptSplitter
from owclib.config import BackendKind, RunConfig
from owclib.errors import EXIT_BACKEND, ResumeRefusedError
from owclib.records import PredictionRecord, ThresholdConfig
from owclib.runstore import RunStore
from owclib.scorestrategy import ScoreStrategy, ScoreSummary

from .mocks import FailingEmbeddings, descriptor


def run_config(**kwargs) -> RunConfig:
    return RunConfig(
        embed=descriptor(BackendKind.MockEmbed, "mock-trigram-256"),
        judge=descriptor(BackendKind.MockJudge, "mock-rules"),
        **kwargs,
    )


@pytest.mark.asyncio
async def test_score_strategy(store_dir, samples, predictions, mock_embedder, mock_judge):
    orphan = PredictionRecord("model-a", "C101", "c101-999", "cat")
    strategy = ScoreStrategy(
        samples, [*predictions[:10], orphan], mock_embedder, mock_judge, NgramConceptSplitter(), run_config()
    )
    run_store = RunStore(store_dir)
    await strategy.setup(run_store)
    summary = await strategy.run(run_store)

    assert (summary.total, summary.scored, summary.orphans, summary.failed) == (11, 10, 1, 0)
    assert summary.failure_exit_code() is None
    assert run_store.read_manifest()["config_hash"] == run_config().config_hash()
    assert len(run_store.read_samples()) == 20


@pytest.mark.asyncio
async def test_score_strategy_failures(store_dir, samples, predictions, mock_judge):
    strategy = ScoreStrategy(
        samples, predictions[:4], FailingEmbeddings(), mock_judge, NgramConceptSplitter(), run_config()
    )
    run_store = RunStore(store_dir)
    await strategy.setup(run_store)
    summary = await strategy.run(run_store)
    assert summary.failed == 4
    assert summary.failure_exit_code() == EXIT_BACKEND
    assert "4 failed (exit 4: 4)" in summary.describe()


@pytest.mark.asyncio
async def test_score_strategy_setup_refuses_changed_config(store_dir, samples, predictions, mock_embedder, mock_judge):
    first = ScoreStrategy(samples, predictions[:2], mock_embedder, mock_judge, NgramConceptSplitter(), run_config())
    await first.setup(RunStore(store_dir))

    changed = run_config(thresholds=ThresholdConfig(cs_threshold=0.7))
    second = ScoreStrategy(samples, predictions[:2], mock_embedder, mock_judge, NgramConceptSplitter(), changed)
    with pytest.raises(ResumeRefusedError):
        await second.setup(RunStore(store_dir))


def test_score_summary_lowest_exit_code():
    summary = ScoreSummary()
    summary.failure_codes.update({5: 2, 3: 1})
    assert summary.failure_exit_code() == 3
