import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from owclib.elo import (
    AVERAGE_SCOPE,
    elo_expected,
    elo_report_from_dict,
    elo_update,
    run_elo,
    sample_matches,
)
from owclib.errors import ConfigError, InsufficientModelsError
from owclib.records import DatasetGroup, EloConfig, PredictionRecord, SampleRecord

from .mocks import ScriptedJudge


def test_elo_expected():
    assert elo_expected(1400, 1000) == pytest.approx(0.9091, abs=1e-4)
    assert elo_expected(1000, 1000) == 0.5
    assert elo_expected(1000, 1400) + elo_expected(1400, 1000) == pytest.approx(1.0)


def test_elo_update():
    assert elo_update(1000, 1000, 1, 32) == (1016.0, 984.0)
    assert elo_update(1000, 1000, 0, 32) == (984.0, 1016.0)
    rating_a, rating_b = elo_update(1200, 1000, 1, 32)
    assert rating_a + rating_b == pytest.approx(2200)
    assert rating_a - 1200 < 16


ratings = st.floats(min_value=0, max_value=3000, allow_nan=False)


@given(ratings, ratings, st.sampled_from([0, 1]), st.floats(min_value=1, max_value=64))
def test_elo_update_conserves_and_mirrors(rating_a, rating_b, outcome, k):
    new_a, new_b = elo_update(rating_a, rating_b, outcome, k)
    assert new_a + new_b == pytest.approx(rating_a + rating_b, abs=1e-9)
    mirrored_b, mirrored_a = elo_update(rating_b, rating_a, 1 - outcome, k)
    assert (mirrored_a, mirrored_b) == pytest.approx((new_a, new_b), abs=1e-9)


def test_sample_matches_distinct_and_seeded():
    models = ["m1", "m2", "m3"]
    first = sample_matches(models, ["s1", "s2"], 200, random.Random("0/C101"))
    second = sample_matches(models, ["s1", "s2"], 200, random.Random("0/C101"))
    assert first == second
    assert all(match.model_a != match.model_b for match in first)
    assert {match.model_a for match in first} == set(models)
    assert {match.sample_id for match in first} == {"s1", "s2"}
    assert first != sample_matches(models, ["s1", "s2"], 200, random.Random("1/C101"))


def samples_for(dataset_id, count=5):
    return [
        SampleRecord(f"s{index}", dataset_id, "", f"class number {index}", DatasetGroup.Prototypical)
        for index in range(count)
    ]


def predictions_for(dataset_id, model_id, text=None, count=5):
    return [
        PredictionRecord(model_id, dataset_id, f"s{index}", text if text is not None else f"class number {index}")
        for index in range(count)
    ]


@pytest.mark.asyncio
async def test_run_elo_better_model_rises(mock_judge):
    predictions = predictions_for("C101", "good") + predictions_for("C101", "bad", "zzz")
    report = await run_elo(predictions, samples_for("C101"), mock_judge, EloConfig(pairs_per_dataset=50))
    (table,) = report.tables
    assert table.matches_played == 50
    assert table.skipped_pairs == 0
    assert table.ratings["good"] > 1000 > table.ratings["bad"]
    assert table.ratings["good"] + table.ratings["bad"] == pytest.approx(2000)
    assert report.average.dataset_id == AVERAGE_SCOPE
    assert report.average.ranking()[0][0] == "good"


@pytest.mark.asyncio
async def test_run_elo_deterministic(samples, predictions, mock_judge):
    config = EloConfig(pairs_per_dataset=100, seed=3)
    first = await run_elo(predictions, samples, mock_judge, config)
    second = await run_elo(predictions, samples, mock_judge, config, parallelism=1)
    assert first.to_dict() == second.to_dict()
    for table in first.tables:
        assert sum(table.ratings.values()) == pytest.approx(3 * 1000)
    assert [table.dataset_id for table in first.tables] == ["C101", "FGVC"]

    other = await run_elo(predictions, samples, mock_judge, EloConfig(pairs_per_dataset=100, seed=4))
    assert other.to_dict() != first.to_dict()


@pytest.mark.asyncio
async def test_run_elo_average(samples, predictions, mock_judge):
    report = await run_elo(predictions, samples, mock_judge, EloConfig(pairs_per_dataset=60))
    for model_id, rating in report.average.ratings.items():
        per_dataset = [table.ratings[model_id] for table in report.tables]
        assert rating == pytest.approx(sum(per_dataset) / len(per_dataset))
    assert report.average.matches_played == 120


@pytest.mark.asyncio
async def test_run_elo_skips_missing_predictions(mock_judge):
    predictions = predictions_for("C101", "m1") + predictions_for("C101", "m2", count=2)
    report = await run_elo(predictions, samples_for("C101"), mock_judge, EloConfig(pairs_per_dataset=40))
    (table,) = report.tables
    assert table.skipped_pairs > 0
    assert table.matches_played + table.skipped_pairs == 40
    assert [diagnostic.kind for diagnostic in report.diagnostics] == ["skipped_pairs"]


@pytest.mark.asyncio
async def test_run_elo_skips_unparseable_verdicts():
    predictions = predictions_for("C101", "m1") + predictions_for("C101", "m2", "zzz")
    report = await run_elo(predictions, samples_for("C101"), ScriptedJudge(["no idea"]), EloConfig(pairs_per_dataset=5))
    (table,) = report.tables
    assert table.skipped_pairs == 5
    assert table.ratings == {"m1": 1000.0, "m2": 1000.0}


@pytest.mark.asyncio
async def test_run_elo_single_model_dataset(mock_judge):
    predictions = predictions_for("C101", "m1") + predictions_for("C101", "m2") + predictions_for("S397", "m1")
    samples = samples_for("C101") + samples_for("S397")
    report = await run_elo(predictions, samples, mock_judge, EloConfig(pairs_per_dataset=10))
    assert [table.dataset_id for table in report.tables] == ["C101"]
    assert [diagnostic.kind for diagnostic in report.average.diagnostics] == ["excluded"]


@pytest.mark.asyncio
async def test_run_elo_needs_two_models(mock_judge):
    with pytest.raises(InsufficientModelsError):
        await run_elo(predictions_for("C101", "m1"), samples_for("C101"), mock_judge)


@pytest.mark.asyncio
async def test_run_elo_variant_filter(mock_judge):
    predictions = predictions_for("C101", "m1") + [
        PredictionRecord("m2", "C101", "s0", "zzz", variant_id="generic"),
    ]
    with pytest.raises(InsufficientModelsError):
        await run_elo(predictions, samples_for("C101"), mock_judge)


@pytest.mark.asyncio
async def test_elo_report_from_dict(samples, predictions, mock_judge):
    report = await run_elo(predictions, samples, mock_judge, EloConfig(pairs_per_dataset=20))
    restored = elo_report_from_dict(report.to_dict())
    assert restored.to_dict() == report.to_dict()
    assert restored.average.ranking() == report.average.ranking()


def test_elo_config_validation():
    with pytest.raises(ConfigError):
        EloConfig(k_factor=0)
    with pytest.raises(ConfigError):
        EloConfig(pairs_per_dataset=0)


@pytest.mark.asyncio
async def test_run_elo_conserves_rating_sum_over_many_matches(mock_judge):
    labels = ["class number {}", "class {}", "number", "a thing", "zzz"]
    predictions = [
        prediction
        for index, label in enumerate(labels)
        for prediction in predictions_for("C101", f"m{index}", label.format(index))
    ]
    report = await run_elo(predictions, samples_for("C101"), mock_judge, EloConfig(pairs_per_dataset=10000))
    (table,) = report.tables
    assert table.matches_played == 10000
    assert sum(table.ratings.values()) == pytest.approx(5000, abs=1e-6)
