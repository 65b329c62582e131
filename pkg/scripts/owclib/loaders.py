import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Tuple

import pandas as pd

from .aggregate import METRICS, AggregateLevel, AggregateTable
from .errors import IngestError, ValidationError
from .records import (
    DEFAULT_VARIANT,
    KNOWN_DATASET_GROUPS,
    DatasetGroup,
    Diagnostic,
    PredictionRecord,
    SampleRecord,
    ScoreKey,
)
from .text import normalize

logger = logging.getLogger(__name__)

SampleRef = Tuple[str, str]


@dataclass
class DatasetManifest:
    """
    One dataset: its group, the optional closed-world class list (kept as metadata only) and its samples
    """

    dataset_id: str
    group: DatasetGroup
    samples: List[SampleRecord]
    class_list: Optional[List[str]] = None
    diagnostics: List[Diagnostic] = field(default_factory=list)


def read_jsonl(path: str) -> Iterator[Tuple[int, Dict[str, Any]]]:
    try:
        with open(path, encoding="utf-8") as jsonl_file:
            for line_number, line in enumerate(jsonl_file, start=1):
                if not line.strip():
                    continue
                try:
                    data = json.loads(line)
                except json.JSONDecodeError as error:
                    raise IngestError(f"Malformed JSON: {error.msg}", path, line_number) from error
                if not isinstance(data, dict):
                    raise IngestError("Expected a JSON object", path, line_number)
                yield line_number, data
    except OSError as error:
        raise IngestError(f"Cannot read file: {error}", path) from error


def require(data: Dict[str, Any], name: str, path: str, line_number: int) -> str:
    value = data.get(name)
    if not isinstance(value, str) or not value:
        raise IngestError(f'Missing or empty "{name}" field', path, line_number)
    return value


def parse_group(value: str, path: str, line_number: Optional[int] = None) -> DatasetGroup:
    try:
        return DatasetGroup(value)
    except ValueError:
        raise ValidationError(
            f"Unknown dataset group {value!r}, expected one of {[group.value for group in DatasetGroup]}",
            path,
            line_number,
        ) from None


def load_manifest(path: str) -> DatasetManifest:
    """
    Reads a dataset manifest: JSONL whose optional first line is a header object without "sample_id"
    ({"dataset_id", "group", "class_list"}), every other line a sample
    {"sample_id", "dataset_id", "image_ref", "ground_truth"}. Datasets of the ten known benchmarks
    may omit the group.
    """
    header: Dict[str, Any] = {}
    header_line: Optional[int] = None
    rows: List[Tuple[int, Dict[str, Any]]] = []
    for line_number, data in read_jsonl(path):
        if "sample_id" not in data and not rows and header_line is None:
            header, header_line = data, line_number
        else:
            rows.append((line_number, data))

    dataset_id = header.get("dataset_id") or (rows[0][1].get("dataset_id") if rows else None)
    if not dataset_id:
        raise ValidationError("Manifest names no dataset_id", path)
    if "group" in header:
        group = parse_group(header["group"], path, header_line)
    elif dataset_id in KNOWN_DATASET_GROUPS:
        group = KNOWN_DATASET_GROUPS[dataset_id]
    else:
        raise ValidationError(f"No group given for unknown dataset {dataset_id!r}", path, header_line)

    samples: List[SampleRecord] = []
    diagnostics: List[Diagnostic] = []
    for line_number, data in rows:
        sample_dataset = data.get("dataset_id") or dataset_id
        if sample_dataset != dataset_id:
            raise ValidationError(
                f"Sample belongs to dataset {sample_dataset!r}, manifest is for {dataset_id!r}", path, line_number
            )
        ground_truth = data.get("ground_truth") or ""
        if not normalize(ground_truth):
            diagnostics.append(Diagnostic("empty_ground_truth", f"{path}:{line_number}: sample has no ground truth"))
        samples.append(
            SampleRecord(
                sample_id=require(data, "sample_id", path, line_number),
                dataset_id=dataset_id,
                image_ref=data.get("image_ref") or "",
                ground_truth=ground_truth,
                group=group,
            )
        )

    duplicates = sorted(sample_id for sample_id, count in Counter(s.sample_id for s in samples).items() if count > 1)
    if duplicates:
        raise ValidationError(f"Duplicate sample_id values: {', '.join(duplicates)}", path)
    for diagnostic in diagnostics:
        logger.warning("%s", diagnostic)
    return DatasetManifest(
        dataset_id=dataset_id,
        group=group,
        samples=samples,
        class_list=header.get("class_list"),
        diagnostics=diagnostics,
    )


def load_predictions(path: str) -> List[PredictionRecord]:
    predictions: List[PredictionRecord] = []
    seen: Dict[ScoreKey, int] = {}
    for line_number, data in read_jsonl(path):
        if "raw_text" not in data or data["raw_text"] is None:
            logger.warning("%s:%d: prediction has no raw_text, scoring it as empty", path, line_number)
        elif not isinstance(data["raw_text"], str):
            raise IngestError('"raw_text" must be a string', path, line_number)
        prediction = PredictionRecord(
            model_id=require(data, "model_id", path, line_number),
            dataset_id=require(data, "dataset_id", path, line_number),
            sample_id=require(data, "sample_id", path, line_number),
            raw_text=data.get("raw_text") or "",
            variant_id=data.get("variant_id") or DEFAULT_VARIANT,
        )
        if prediction.key in seen:
            raise ValidationError(
                f"Duplicate prediction key {'/'.join(prediction.key)} (first seen on line {seen[prediction.key]})",
                path,
                line_number,
            )
        seen[prediction.key] = line_number
        predictions.append(prediction)
    return predictions


def load_tags(path: str) -> Dict[SampleRef, List[str]]:
    tags: Dict[SampleRef, List[str]] = {}
    for line_number, data in read_jsonl(path):
        values = data.get("tags", [])
        if not isinstance(values, list) or not all(isinstance(tag, str) for tag in values):
            raise IngestError('"tags" must be a list of strings', path, line_number)
        ref = (require(data, "dataset_id", path, line_number), require(data, "sample_id", path, line_number))
        tags[ref] = list(dict.fromkeys(values))
    return tags


def load_splits(path: str) -> Dict[ScoreKey, List[str]]:
    splits: Dict[ScoreKey, List[str]] = {}
    for line_number, data in read_jsonl(path):
        spans = data.get("spans")
        if not isinstance(spans, list) or not all(isinstance(span, str) for span in spans):
            raise IngestError('"spans" must be a list of strings', path, line_number)
        key = ScoreKey(
            require(data, "model_id", path, line_number),
            require(data, "dataset_id", path, line_number),
            require(data, "sample_id", path, line_number),
            data.get("variant_id") or DEFAULT_VARIANT,
        )
        splits[key] = spans
    return splits


def load_published_table(path: str) -> AggregateTable:
    """
    Reads per-dataset published results from a CSV with model, dataset, metric and value columns.
    Values are percentages; metric names are TI, LI, SS or CS in any case.
    """
    table = AggregateTable(level=AggregateLevel.Dataset, scope_groups=dict(KNOWN_DATASET_GROUPS))
    try:
        frame = pd.read_csv(path, dtype={"model": str, "dataset": str, "metric": str})
    except pd.errors.EmptyDataError:
        table.diagnostics.append(Diagnostic("empty", f"{path}: published table is empty"))
        logger.warning("%s: published table is empty", path)
        return table
    except (OSError, pd.errors.ParserError) as error:
        raise IngestError(f"Cannot read published table: {error}", path) from error

    missing = {"model", "dataset", "metric", "value"} - set(frame.columns)
    if missing:
        raise IngestError(f"Published table lacks columns: {', '.join(sorted(missing))}", path)
    if frame.empty:
        table.diagnostics.append(Diagnostic("empty", f"{path}: published table has no rows"))
        return table

    for row_number, row in enumerate(frame.itertuples(index=False), start=2):
        metric = str(row.metric).strip().lower()
        if metric not in METRICS:
            raise IngestError(f"Unknown metric {row.metric!r}", path, row_number)
        table.set(str(row.model).strip(), str(row.dataset).strip(), metric, float(row.value))
    return table
