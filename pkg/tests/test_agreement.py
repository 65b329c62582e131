import pytest

from owclib.agreement import (
    HIGH,
    LOW,
    MEDIUM,
    agreement_buckets,
    agreement_summary,
    bucket_of,
    correctness_matrix,
    pairwise_agreement,
    shared_percentage,
)
from owclib.config import AgreementBase
from owclib.errors import InsufficientModelsError
from owclib.records import QUADRANT_ORDER, QuadrantLabel, ScoreRecord


def correct_specific(model_id, sample_ids, all_ids=range(1, 6)):
    """Scores where model_id is correct and specific exactly on sample_ids."""
    return [
        ScoreRecord(
            model_id,
            "C101",
            f"s{index}",
            "base",
            li=int(index in sample_ids),
            cs=0.9 if index in sample_ids else 0.1,
        )
        for index in all_ids
    ]


@pytest.mark.parametrize(
    "fraction, bucket",
    [(0.0, LOW), (0.29, LOW), (0.30, MEDIUM), (0.5, MEDIUM), (0.70, MEDIUM), (0.71, HIGH), (1.0, HIGH)],
)
def test_bucket_of(fraction, bucket):
    assert bucket_of(fraction) == bucket


def test_shared_percentage_bases():
    left = {("C101", "s1"), ("C101", "s2"), ("C101", "s3")}
    right = {("C101", "s2"), ("C101", "s3"), ("C101", "s4")}
    assert shared_percentage(left, right, AgreementBase.Jaccard) == 50.0
    assert shared_percentage(left, right, AgreementBase.Min) == pytest.approx(200 / 3)
    assert shared_percentage(left, right, AgreementBase.Max) == pytest.approx(200 / 3)


def test_pairwise_agreement_jaccard():
    scores = correct_specific("model-i", {1, 2, 3}) + correct_specific("model-j", {2, 3, 4})
    matrix = pairwise_agreement(scores)
    assert matrix.models == ["model-i", "model-j"]
    assert matrix.values[("model-i", "model-j")] == 50.0
    assert matrix.values[("model-j", "model-i")] == 50.0
    assert matrix.row("model-i") == [100.0, 50.0]


def test_pairwise_agreement_empty_sets():
    scores = correct_specific("model-i", set()) + correct_specific("model-j", set())
    matrix = pairwise_agreement(scores)
    assert matrix.values[("model-i", "model-j")] == 100.0
    assert [diagnostic.kind for diagnostic in matrix.diagnostics] == ["empty_sets"]


def test_pairwise_agreement_min_base_one_empty():
    scores = correct_specific("model-i", {1}) + correct_specific("model-j", set())
    matrix = pairwise_agreement(scores, base=AgreementBase.Min)
    assert matrix.values[("model-i", "model-j")] == 0.0


def test_pairwise_agreement_other_quadrant():
    scores = correct_specific("model-i", {1, 2, 3}) + correct_specific("model-j", {2, 3, 4})
    # Wrong-generic sets: i is wrong on {4, 5}, j on {1, 5}
    matrix = pairwise_agreement(scores, QuadrantLabel.WrongGeneric)
    assert matrix.values[("model-i", "model-j")] == pytest.approx(100 / 3)


def test_pairwise_agreement_needs_two_models():
    with pytest.raises(InsufficientModelsError):
        pairwise_agreement(correct_specific("model-i", {1}))


def test_agreement_buckets():
    scores = (
        correct_specific("model-a", {1, 2, 3})
        + correct_specific("model-b", {1, 2})
        + correct_specific("model-c", {1})
    )
    buckets = agreement_buckets(correctness_matrix(scores))
    # s1: 3/3 high, s2: 2/3 medium, s3: 1/3 medium, s4 and s5: 0/3 low
    assert buckets["C101"] == {LOW: 40.0, MEDIUM: 40.0, HIGH: 20.0}


def test_agreement_buckets_over_models_that_scored():
    scores = correct_specific("model-a", {1}, all_ids=[1, 2]) + correct_specific("model-b", {1}, all_ids=[1])
    buckets = agreement_buckets(correctness_matrix(scores))
    # s2 was scored by model-a only, and wrongly
    assert buckets["C101"] == {LOW: 50.0, MEDIUM: 0.0, HIGH: 50.0}


def test_agreement_summary():
    scores = correct_specific("model-i", {1, 2, 3}) + correct_specific("model-j", {2, 3, 4})
    summary = agreement_summary(scores)
    assert list(summary.matrices) == QUADRANT_ORDER
    # Neither model is ever correct-generic or wrong-specific
    assert [diagnostic.kind for diagnostic in summary.diagnostics] == ["empty_sets", "empty_sets"]
    assert summary.matrices[QuadrantLabel.CorrectSpecific].values[("model-i", "model-j")] == 50.0
