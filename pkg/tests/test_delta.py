import pytest

from owclib.delta import ALL_SCOPE, DELTA_COLUMNS, delta_report, parse_model_map
from owclib.records import DatasetGroup, SampleRecord, ScoreRecord

SAMPLES = [SampleRecord(f"s{index}", "C101", "", "ant", DatasetGroup.Prototypical) for index in range(10)]


def run(model_id, wrong=(), variant_id="base"):
    return [
        ScoreRecord(
            model_id,
            "C101",
            f"s{index}",
            variant_id,
            ti=1,
            li=0 if index in wrong else 1,
            ss=0.4,
            cs=0.9,
        )
        for index in range(10)
    ]


def test_identical_runs_have_zero_delta():
    report = delta_report(run("model-a"), run("model-a"), SAMPLES)
    assert report.models() == ["model-a"]
    assert report.scopes() == ["prototypical", "C101", ALL_SCOPE]
    for values in report.rows.values():
        assert values == {column: 0.0 for column in DELTA_COLUMNS}
    assert report.diagnostics == []


def test_one_flipped_sample():
    report = delta_report(run("model-a"), run("model-a", wrong={3}, variant_id="generic"), SAMPLES)
    values = report.rows[("model-a", "C101")]
    assert values["li"] == pytest.approx(-10.0)
    assert values["ti"] == 0.0
    # The flipped sample moves from correct-specific to wrong-specific
    assert values["correct_specific"] == pytest.approx(-10.0)
    assert values["wrong_specific"] == pytest.approx(10.0)
    assert report.rows[("model-a", ALL_SCOPE)]["li"] == pytest.approx(-10.0)


def test_key_mismatch_excluded():
    report = delta_report(run("model-a"), run("model-a", wrong={3})[:8], SAMPLES)
    assert [diagnostic.kind for diagnostic in report.diagnostics] == ["key_mismatch", "key_mismatch"]
    # s3 is still among the eight matched samples
    assert report.rows[("model-a", "C101")]["li"] == pytest.approx(-12.5)


def test_model_map():
    report = delta_report(run("model-a", wrong={0, 1}), run("model-b"), SAMPLES, model_map={"model-a": "model-b"})
    assert report.models() == ["model-a->model-b"]
    assert report.rows[("model-a->model-b", "prototypical")]["li"] == pytest.approx(20.0)


def test_model_map_without_variant_scores():
    report = delta_report(run("model-a"), run("model-b"), SAMPLES, model_map={"model-a": "model-c"})
    assert report.rows == {}
    assert len(report.diagnostics) == 10


def test_parse_model_map():
    assert parse_model_map(["Qwen2VL-2B=Qwen2VL-7B", "a=b"]) == {"Qwen2VL-2B": "Qwen2VL-7B", "a": "b"}
    with pytest.raises(ValueError, match="Expected BASE=VARIANT"):
        parse_model_map(["Qwen2VL-2B"])
    with pytest.raises(ValueError):
        parse_model_map(["=b"])
