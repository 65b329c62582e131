import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import pandas as pd

from .aggregate import METRICS, dataset_groups_of, quadrant_of, score_frame, scope_sort_key
from .records import QUADRANT_ORDER, DatasetGroup, Diagnostic, SampleRecord, ScoreRecord, ThresholdConfig

logger = logging.getLogger(__name__)

ALL_SCOPE = "all"
DELTA_COLUMNS = (*METRICS, *(label.value for label in QUADRANT_ORDER))
JOIN_KEYS = ["dataset_id", "sample_id"]


@dataclass
class DeltaReport:
    """
    Signed differences (variant minus base) in percentage points, keyed by (model label, scope).
    Scopes are dataset ids, group names and "all" for the macro-average over a model's datasets.
    """

    rows: Dict[Tuple[str, str], Dict[str, float]] = field(default_factory=dict)
    scope_groups: Dict[str, DatasetGroup] = field(default_factory=dict)
    diagnostics: List[Diagnostic] = field(default_factory=list)

    def models(self) -> List[str]:
        return sorted({model for model, _ in self.rows})

    def scopes(self) -> List[str]:
        def key(scope: str):
            return (1, 0, "") if scope == ALL_SCOPE else (0, *scope_sort_key(scope, self.scope_groups))

        return sorted({scope for _, scope in self.rows}, key=key)


def with_quadrants(frame: pd.DataFrame, thresholds: ThresholdConfig) -> pd.DataFrame:
    frame = frame.copy()
    quadrants = [quadrant_of(li, cs, thresholds) for li, cs in zip(frame["li"], frame["cs"])]
    for label in QUADRANT_ORDER:
        frame[label.value] = [float(quadrant == label) for quadrant in quadrants]
    return frame


def parse_model_map(pairs: Sequence[str]) -> Dict[str, str]:
    """Parses "base=variant" model pairs."""
    mapping: Dict[str, str] = {}
    for pair in pairs:
        base, separator, variant = pair.partition("=")
        if not separator or not base or not variant:
            raise ValueError(f"Expected BASE=VARIANT, got {pair!r}")
        mapping[base] = variant
    return mapping


def delta_report(
    base_scores: Sequence[ScoreRecord],
    variant_scores: Sequence[ScoreRecord],
    samples: Sequence[SampleRecord],
    thresholds: ThresholdConfig = ThresholdConfig(),
    model_map: Optional[Mapping[str, str]] = None,
) -> DeltaReport:
    """
    Compares two runs sample by sample. Without a model map every model is compared with itself
    (prompt-variant deltas); with one, each base model is compared with its mapped successor.
    Samples scored on only one side are excluded with a diagnostic.
    """
    groups = dataset_groups_of(samples)
    report = DeltaReport(scope_groups=groups)
    base_frame = with_quadrants(score_frame(base_scores), thresholds)
    variant_frame = with_quadrants(score_frame(variant_scores), thresholds)

    if model_map:
        pairs = sorted(model_map.items())
    else:
        models = sorted(set(base_frame["model_id"]) | set(variant_frame["model_id"]))
        pairs = [(model_id, model_id) for model_id in models]

    for base_model, variant_model in pairs:
        label = base_model if base_model == variant_model else f"{base_model}->{variant_model}"
        base_rows = base_frame[base_frame["model_id"] == base_model]
        variant_rows = variant_frame[variant_frame["model_id"] == variant_model]
        joined = base_rows.merge(
            variant_rows, on=JOIN_KEYS, how="outer", suffixes=("_base", "_variant"), indicator="side", sort=True
        )
        for row in joined[joined["side"] != "both"].itertuples(index=False):
            side = "variant" if row.side == "left_only" else "base"
            report.diagnostics.append(
                Diagnostic("key_mismatch", f"{label}: {row.dataset_id}/{row.sample_id} has no {side} score")
            )
        matched = joined[joined["side"] == "both"]

        dataset_rows: Dict[str, Dict[str, float]] = {}
        for dataset_id, rows in matched.groupby("dataset_id", sort=True):
            dataset_rows[dataset_id] = {
                column: (float(rows[f"{column}_variant"].mean()) - float(rows[f"{column}_base"].mean())) * 100
                for column in DELTA_COLUMNS
            }
            report.rows[(label, dataset_id)] = dataset_rows[dataset_id]
        if not dataset_rows:
            continue

        members: Dict[str, List[Dict[str, float]]] = {ALL_SCOPE: list(dataset_rows.values())}
        for dataset_id, values in dataset_rows.items():
            if dataset_id in groups:
                members.setdefault(groups[dataset_id].value, []).append(values)
        for scope, rows in members.items():
            report.rows[(label, scope)] = {
                column: sum(row[column] for row in rows) / len(rows) for column in DELTA_COLUMNS
            }

    for diagnostic in report.diagnostics:
        logger.warning("%s", diagnostic)
    return report
