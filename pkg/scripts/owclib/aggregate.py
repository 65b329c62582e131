import logging
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import pandas as pd

from .records import (
    QUADRANT_ORDER,
    DatasetGroup,
    Diagnostic,
    QuadrantLabel,
    SampleRecord,
    ScoreRecord,
    ThresholdConfig,
)
from .text import normalize

logger = logging.getLogger(__name__)

METRICS = ("ti", "li", "ss", "cs")
GROUP_ORDER = list(DatasetGroup)

Cell = Tuple[str, str]


class AggregateLevel(str, Enum):
    Dataset = "dataset"
    Group = "group"


def round_half_away(value: float, digits: int = 1) -> float:
    """Rounds half away from zero on the shortest decimal representation, so 46.35 becomes 46.4."""
    quantum = Decimal(1).scaleb(-digits)
    rounded = Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP)
    return float(rounded) + 0.0


def scope_sort_key(scope: str, scope_groups: Mapping[str, DatasetGroup]) -> Tuple[int, str]:
    if scope in (group.value for group in GROUP_ORDER):
        return GROUP_ORDER.index(DatasetGroup(scope)), ""
    group = scope_groups.get(scope)
    return (GROUP_ORDER.index(group) if group else len(GROUP_ORDER)), scope


@dataclass
class AggregateTable:
    """
    Metric means in percent keyed by (model_id, scope). A scope is a dataset id or a group name.
    Values are unrounded; the report layer rounds them.
    """

    level: AggregateLevel
    cells: Dict[Cell, Dict[str, float]] = field(default_factory=dict)
    counts: Dict[Cell, int] = field(default_factory=dict)
    scope_groups: Dict[str, DatasetGroup] = field(default_factory=dict)
    diagnostics: List[Diagnostic] = field(default_factory=list)

    def set(self, model_id: str, scope: str, metric: str, value: float):
        self.cells.setdefault((model_id, scope), {})[metric] = value

    def get(self, model_id: str, scope: str, metric: str) -> Optional[float]:
        return self.cells.get((model_id, scope), {}).get(metric)

    def models(self) -> List[str]:
        return sorted({model_id for model_id, _ in self.cells})

    def scopes(self) -> List[str]:
        return sorted({scope for _, scope in self.cells}, key=lambda scope: scope_sort_key(scope, self.scope_groups))

    def is_empty(self) -> bool:
        return not self.cells


def successful(scores: Iterable[ScoreRecord]) -> List[ScoreRecord]:
    return [score for score in scores if not score.failed]


def select_variant(scores: Iterable[ScoreRecord], variant_id: str) -> List[ScoreRecord]:
    return [score for score in scores if score.variant_id == variant_id]


def dataset_groups_of(samples: Iterable[SampleRecord]) -> Dict[str, DatasetGroup]:
    return {sample.dataset_id: sample.group for sample in samples}


def score_frame(scores: Iterable[ScoreRecord]) -> pd.DataFrame:
    rows = [
        {
            "model_id": score.model_id,
            "dataset_id": score.dataset_id,
            "sample_id": score.sample_id,
            "variant_id": score.variant_id,
            "ti": float(score.ti),
            "li": float(score.li),
            "ss": score.ss_clamped,
            "cs": score.cs,
        }
        for score in successful(scores)
    ]
    frame = pd.DataFrame(rows, columns=["model_id", "dataset_id", "sample_id", "variant_id", *METRICS])
    # Fixed summation order keeps the means independent of completion order
    return frame.sort_values(["model_id", "dataset_id", "sample_id", "variant_id"], kind="mergesort")


def aggregate_datasets(scores: Sequence[ScoreRecord], samples: Sequence[SampleRecord]) -> AggregateTable:
    groups = dataset_groups_of(samples)
    table = AggregateTable(level=AggregateLevel.Dataset, scope_groups=groups)
    frame = score_frame(scores)
    for (model_id, dataset_id), rows in frame.groupby(["model_id", "dataset_id"], sort=True):
        for metric in METRICS:
            table.set(model_id, dataset_id, metric, float(rows[metric].mean()) * 100)
        table.counts[(model_id, dataset_id)] = len(rows)

    for model_id in sorted(frame["model_id"].unique()):
        for dataset_id in sorted(set(groups) - {scope for model, scope in table.cells if model == model_id}):
            diagnostic = Diagnostic("excluded", f"model {model_id} has no scored samples on dataset {dataset_id}")
            logger.warning("%s", diagnostic)
            table.diagnostics.append(diagnostic)
    return table


def aggregate_groups(dataset_table: AggregateTable, dataset_groups: Mapping[str, DatasetGroup]) -> AggregateTable:
    """
    Group rows are the unweighted mean of their member dataset rows (macro-average).
    Datasets with no known group are left out with a diagnostic.
    """
    table = AggregateTable(level=AggregateLevel.Group, scope_groups=dict(dataset_groups))
    members: Dict[Tuple[str, DatasetGroup], List[Dict[str, float]]] = {}
    for (model_id, dataset_id), values in sorted(dataset_table.cells.items()):
        group = dataset_groups.get(dataset_id)
        if group is None:
            table.diagnostics.append(Diagnostic("excluded", f"dataset {dataset_id} belongs to no known group"))
            continue
        members.setdefault((model_id, group), []).append(values)

    for (model_id, group), rows in members.items():
        for metric in METRICS:
            present = [row[metric] for row in rows if metric in row]
            if present:
                table.set(model_id, group.value, metric, sum(present) / len(present))
        table.counts[(model_id, group.value)] = len(rows)
    return table


def aggregate(
    scores: Sequence[ScoreRecord], samples: Sequence[SampleRecord], level: AggregateLevel
) -> AggregateTable:
    dataset_table = aggregate_datasets(scores, samples)
    if level == AggregateLevel.Dataset:
        return dataset_table
    table = aggregate_groups(dataset_table, dataset_groups_of(samples))
    table.diagnostics = dataset_table.diagnostics + table.diagnostics
    return table


def quadrant_of(li_value: float, cs_value: float, thresholds: ThresholdConfig) -> QuadrantLabel:
    correct = li_value >= thresholds.li_threshold
    specific = cs_value >= thresholds.cs_threshold
    if correct:
        return QuadrantLabel.CorrectSpecific if specific else QuadrantLabel.CorrectGeneric
    return QuadrantLabel.WrongSpecific if specific else QuadrantLabel.WrongGeneric


@dataclass
class QuadrantStats:
    level: AggregateLevel
    fractions: Dict[Cell, Dict[QuadrantLabel, float]] = field(default_factory=dict)
    scope_groups: Dict[str, DatasetGroup] = field(default_factory=dict)

    def scopes(self) -> List[str]:
        return sorted(
            {scope for _, scope in self.fractions}, key=lambda scope: scope_sort_key(scope, self.scope_groups)
        )

    def models(self) -> List[str]:
        return sorted({model_id for model_id, _ in self.fractions})


def quadrant_stats(
    scores: Sequence[ScoreRecord],
    samples: Sequence[SampleRecord],
    thresholds: ThresholdConfig,
    level: AggregateLevel = AggregateLevel.Dataset,
) -> QuadrantStats:
    groups = dataset_groups_of(samples)
    counts: Dict[Cell, Dict[QuadrantLabel, int]] = {}
    for score in successful(scores):
        cell = counts.setdefault((score.model_id, score.dataset_id), {label: 0 for label in QUADRANT_ORDER})
        cell[quadrant_of(score.li, score.cs, thresholds)] += 1

    per_dataset = QuadrantStats(level=AggregateLevel.Dataset, scope_groups=groups)
    for cell, cell_counts in sorted(counts.items()):
        total = sum(cell_counts.values())
        per_dataset.fractions[cell] = {label: cell_counts[label] / total for label in QUADRANT_ORDER}
    if level == AggregateLevel.Dataset:
        return per_dataset

    members: Dict[Cell, List[Dict[QuadrantLabel, float]]] = {}
    for (model_id, dataset_id), fractions in per_dataset.fractions.items():
        if dataset_id in groups:
            members.setdefault((model_id, groups[dataset_id].value), []).append(fractions)
    per_group = QuadrantStats(level=AggregateLevel.Group, scope_groups=groups)
    for cell, rows in sorted(members.items()):
        per_group.fractions[cell] = {label: sum(row[label] for row in rows) / len(rows) for label in QUADRANT_ORDER}
    return per_group


def class_quadrant_points(
    scores: Sequence[ScoreRecord], samples: Sequence[SampleRecord], thresholds: ThresholdConfig
) -> List[Dict[str, object]]:
    """
    Per (model, dataset, class) means of LI and CS, thresholded after averaging,
    for scatter plots of classes over the four quadrants
    """
    classes = {(sample.dataset_id, sample.sample_id): normalize(sample.ground_truth) for sample in samples}
    sums: Dict[Tuple[str, str, str], List[float]] = {}
    for score in sorted(successful(scores), key=lambda score: score.key):
        label = classes.get((score.dataset_id, score.sample_id))
        if label is None:
            continue
        entry = sums.setdefault((score.model_id, score.dataset_id, label), [0.0, 0.0, 0])
        entry[0] += score.li
        entry[1] += score.cs
        entry[2] += 1

    points: List[Dict[str, object]] = []
    for (model_id, dataset_id, label), (li_sum, cs_sum, count) in sorted(sums.items()):
        li_mean = li_sum / count
        cs_mean = cs_sum / count
        points.append(
            {
                "model_id": model_id,
                "dataset_id": dataset_id,
                "class": label,
                "count": int(count),
                "li": li_mean,
                "cs": cs_mean,
                "quadrant": quadrant_of(li_mean, cs_mean, thresholds).value,
            }
        )
    return points
