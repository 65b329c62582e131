import pytest

from owclib.errors import IngestError, ValidationError
from owclib.loaders import load_manifest, load_predictions, load_published_table, load_splits, load_tags
from owclib.records import DatasetGroup, PredictionRecord, SampleRecord, validate_run_bundle

from .conftest import fixture_path


def write_lines(path, *lines):
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return str(path)


def test_load_manifest_with_header():
    manifest = load_manifest(fixture_path("c101.jsonl"))
    assert manifest.dataset_id == "C101"
    assert manifest.group == DatasetGroup.Prototypical
    assert len(manifest.class_list) == 10
    assert len(manifest.samples) == 10
    assert manifest.samples[0] == SampleRecord(
        "c101-000", "C101", "images/c101/000.jpg", "accordion", DatasetGroup.Prototypical
    )


def test_load_manifest_known_dataset_without_header():
    manifest = load_manifest(fixture_path("fgvc.jsonl"))
    assert manifest.group == DatasetGroup.VeryFineGrained
    assert manifest.class_list is None
    assert [sample.ground_truth for sample in manifest.samples][:2] == ["Boeing 737-300", "Airbus A320"]


def test_load_manifest_unknown_dataset_needs_group(tmp_path):
    path = write_lines(tmp_path / "m.jsonl", '{"sample_id": "1", "dataset_id": "MINE", "ground_truth": "cat"}')
    with pytest.raises(ValidationError) as raised:
        load_manifest(path)
    assert raised.value.exit_code == 3

    path = write_lines(
        tmp_path / "m.jsonl",
        '{"dataset_id": "MINE", "group": "fine_grained"}',
        '{"sample_id": "1", "ground_truth": "cat"}',
    )
    assert load_manifest(path).samples[0].group == DatasetGroup.FineGrained


def test_load_manifest_errors(tmp_path):
    path = write_lines(tmp_path / "m.jsonl", '{"dataset_id": "MINE", "group": "tiny"}', '{"sample_id": "1"}')
    with pytest.raises(ValidationError, match="Unknown dataset group"):
        load_manifest(path)

    path = write_lines(tmp_path / "m.jsonl", '{"sample_id": "1", "dataset_id": "C101", "ground_truth": "cat"', "")
    with pytest.raises(IngestError, match=r"m\.jsonl:1: Malformed JSON"):
        load_manifest(path)

    path = write_lines(
        tmp_path / "m.jsonl",
        '{"sample_id": "1", "dataset_id": "C101", "ground_truth": "cat"}',
        '{"sample_id": "1", "dataset_id": "C101", "ground_truth": "dog"}',
    )
    with pytest.raises(ValidationError, match="Duplicate sample_id"):
        load_manifest(path)

    path = write_lines(
        tmp_path / "m.jsonl",
        '{"sample_id": "1", "dataset_id": "C101", "ground_truth": "cat"}',
        '{"sample_id": "2", "dataset_id": "DTD", "ground_truth": "dotted"}',
    )
    with pytest.raises(ValidationError, match="belongs to dataset 'DTD'"):
        load_manifest(path)

    with pytest.raises(IngestError, match="Cannot read file"):
        load_manifest(str(tmp_path / "missing.jsonl"))


def test_load_manifest_empty_ground_truth(tmp_path):
    path = write_lines(tmp_path / "m.jsonl", '{"sample_id": "1", "dataset_id": "C101", "ground_truth": " . "}')
    manifest = load_manifest(path)
    assert [diagnostic.kind for diagnostic in manifest.diagnostics] == ["empty_ground_truth"]


def test_load_predictions(predictions):
    assert len(predictions) == 60
    assert predictions[0] == PredictionRecord("model-a", "C101", "c101-000", "An accordion.", "base")
    assert predictions[-1].raw_text == ""


def test_load_predictions_variant_and_null(tmp_path):
    path = write_lines(
        tmp_path / "p.jsonl",
        '{"model_id": "m", "dataset_id": "C101", "sample_id": "1", "raw_text": null, "variant_id": "generic"}',
    )
    (prediction,) = load_predictions(path)
    assert prediction.raw_text == ""
    assert prediction.variant_id == "generic"


def test_load_predictions_duplicate_key(tmp_path):
    line = '{"model_id": "m", "dataset_id": "C101", "sample_id": "1", "raw_text": "cat"}'
    path = write_lines(tmp_path / "p.jsonl", line, line)
    with pytest.raises(ValidationError, match="first seen on line 1"):
        load_predictions(path)


def test_load_predictions_missing_field(tmp_path):
    path = write_lines(tmp_path / "p.jsonl", '{"model_id": "m", "sample_id": "1", "raw_text": "cat"}')
    with pytest.raises(IngestError, match='"dataset_id"'):
        load_predictions(path)


def test_load_tags():
    tags = load_tags(fixture_path("tags.jsonl"))
    assert tags[("C101", "c101-003")] == ["ant", "leaf", "spider"]
    assert ("FGVC", "fgvc-000") not in tags


def test_load_tags_rejects_non_list(tmp_path):
    path = write_lines(tmp_path / "t.jsonl", '{"dataset_id": "C101", "sample_id": "1", "tags": "cat"}')
    with pytest.raises(IngestError):
        load_tags(path)


def test_load_splits():
    splits = load_splits(fixture_path("splits.jsonl"))
    assert splits[("model-b", "C101", "c101-000", "base")] == ["musical instrument", "instrument"]


def test_load_published_table():
    table = load_published_table(fixture_path("published_tables.csv"))
    assert table.get("Qwen2VL-7B", "C101", "ti") == 63.2
    assert table.get("Qwen2VL-2B", "CARS", "ti") == 0.1
    assert table.get("Qwen2VL-2B", "CARS", "li") is None
    assert table.models() == ["LLaVA-NeXT-Mistral-7B", "Qwen2VL-2B", "Qwen2VL-7B"]
    assert table.scopes()[:3] == ["C101", "S397", "DTD"]


def test_load_published_table_errors(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("model,dataset,value\nQwen2VL-7B,C101,63.2\n", encoding="utf-8")
    with pytest.raises(IngestError, match="lacks columns: metric"):
        load_published_table(str(path))

    path.write_text("model,dataset,metric,value\nQwen2VL-7B,C101,BLEU,63.2\n", encoding="utf-8")
    with pytest.raises(IngestError, match="Unknown metric"):
        load_published_table(str(path))

    path.write_text("", encoding="utf-8")
    table = load_published_table(str(path))
    assert table.is_empty()
    assert table.diagnostics[0].kind == "empty"


def test_validate_run_bundle(samples, predictions):
    assert validate_run_bundle(samples, predictions) == []

    extra = [
        predictions[0],
        PredictionRecord("model-z", "C101", "c101-999", "cat"),
    ]
    kinds = [diagnostic.kind for diagnostic in validate_run_bundle(samples, predictions + extra)]
    assert kinds == ["duplicate", "orphan"]
