from collections import Counter
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any, Dict, List, NamedTuple, Sequence

from .errors import ConfigError
from .text import normalize

DEFAULT_VARIANT = "base"


class DatasetGroup(str, Enum):
    """
    The four challenges the benchmark datasets are grouped by
    """

    Prototypical = "prototypical"
    NonPrototypical = "non_prototypical"
    FineGrained = "fine_grained"
    VeryFineGrained = "very_fine_grained"


KNOWN_DATASET_GROUPS: Dict[str, DatasetGroup] = {
    "C101": DatasetGroup.Prototypical,
    "S397": DatasetGroup.Prototypical,
    "DTD": DatasetGroup.NonPrototypical,
    "U101": DatasetGroup.NonPrototypical,
    "ESAT": DatasetGroup.NonPrototypical,
    "FLWR": DatasetGroup.FineGrained,
    "FOOD": DatasetGroup.FineGrained,
    "PETS": DatasetGroup.FineGrained,
    "CARS": DatasetGroup.VeryFineGrained,
    "FGVC": DatasetGroup.VeryFineGrained,
}


class QuadrantLabel(str, Enum):
    CorrectSpecific = "correct_specific"
    CorrectGeneric = "correct_generic"
    WrongSpecific = "wrong_specific"
    WrongGeneric = "wrong_generic"


QUADRANT_ORDER: List[QuadrantLabel] = [
    QuadrantLabel.CorrectSpecific,
    QuadrantLabel.CorrectGeneric,
    QuadrantLabel.WrongSpecific,
    QuadrantLabel.WrongGeneric,
]


class ScoreKey(NamedTuple):
    model_id: str
    dataset_id: str
    sample_id: str
    variant_id: str


@dataclass(frozen=True)
class SampleRecord:
    sample_id: str
    dataset_id: str
    image_ref: str
    ground_truth: str
    group: DatasetGroup

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sample_id": self.sample_id,
            "dataset_id": self.dataset_id,
            "image_ref": self.image_ref,
            "ground_truth": self.ground_truth,
            "group": self.group.value,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SampleRecord":
        return cls(
            sample_id=data["sample_id"],
            dataset_id=data["dataset_id"],
            image_ref=data.get("image_ref", ""),
            ground_truth=data["ground_truth"],
            group=DatasetGroup(data["group"]),
        )


@dataclass(frozen=True)
class PredictionRecord:
    """
    One model's raw text output for one sample under one prompt variant
    """

    model_id: str
    dataset_id: str
    sample_id: str
    raw_text: str
    variant_id: str = DEFAULT_VARIANT

    @property
    def key(self) -> ScoreKey:
        return ScoreKey(self.model_id, self.dataset_id, self.sample_id, self.variant_id)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "model_id": self.model_id,
            "dataset_id": self.dataset_id,
            "sample_id": self.sample_id,
            "variant_id": self.variant_id,
            "raw_text": self.raw_text,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PredictionRecord":
        return cls(
            model_id=data["model_id"],
            dataset_id=data["dataset_id"],
            sample_id=data["sample_id"],
            raw_text=data.get("raw_text") or "",
            variant_id=data.get("variant_id") or DEFAULT_VARIANT,
        )


@dataclass(frozen=True)
class ScoreRecord:
    """
    The four metric values for one prediction. ss is kept signed; reports clamp it to [0, 1].
    A failed record keeps the key and the error so that a resumed run can retry it.
    """

    model_id: str
    dataset_id: str
    sample_id: str
    variant_id: str
    ti: int = 0
    li: int = 0
    ss: float = 0.0
    cs: float = 0.0
    best_concept: str = ""
    judge_raw: str = ""
    failed: bool = False
    error: str = ""
    error_code: int = 0

    @property
    def key(self) -> ScoreKey:
        return ScoreKey(self.model_id, self.dataset_id, self.sample_id, self.variant_id)

    @property
    def ss_clamped(self) -> float:
        return min(1.0, max(0.0, self.ss))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScoreRecord":
        return cls(
            model_id=data["model_id"],
            dataset_id=data["dataset_id"],
            sample_id=data["sample_id"],
            variant_id=data["variant_id"],
            ti=int(data.get("ti", 0)),
            li=int(data.get("li", 0)),
            ss=float(data.get("ss", 0.0)),
            cs=float(data.get("cs", 0.0)),
            best_concept=data.get("best_concept", ""),
            judge_raw=data.get("judge_raw", ""),
            failed=bool(data.get("failed", False)),
            error=data.get("error", ""),
            error_code=int(data.get("error_code", 0)),
        )

    @classmethod
    def failure(cls, key: ScoreKey, error: Exception, error_code: int) -> "ScoreRecord":
        return cls(*key, failed=True, error=f"{type(error).__name__}: {error}", error_code=error_code)


@dataclass(frozen=True)
class ThresholdConfig:
    cs_threshold: float = 0.6
    li_threshold: float = 0.5
    tag_match_threshold: float = 0.95

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not 0.0 < value < 1.0:
                raise ConfigError(f"{name} must be in (0, 1), got {value}")


@dataclass(frozen=True)
class EloConfig:
    initial_rating: float = 1000.0
    k_factor: float = 32.0
    pairs_per_dataset: int = 10000
    seed: int = 0

    def __post_init__(self):
        if self.k_factor <= 0:
            raise ConfigError(f"k_factor must be positive, got {self.k_factor}")
        if self.pairs_per_dataset < 1:
            raise ConfigError(f"pairs_per_dataset must be at least 1, got {self.pairs_per_dataset}")


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    message: str

    def __str__(self) -> str:
        return f"[{self.kind}] {self.message}"


def validate_run_bundle(samples: Sequence[SampleRecord], predictions: Sequence[PredictionRecord]) -> List[Diagnostic]:
    diagnostics: List[Diagnostic] = []
    sample_keys = set()
    for sample in samples:
        sample_keys.add((sample.dataset_id, sample.sample_id))
        if not normalize(sample.ground_truth):
            diagnostics.append(
                Diagnostic("empty_ground_truth", f"sample {sample.dataset_id}/{sample.sample_id} has no ground truth")
            )

    key_counts = Counter(prediction.key for prediction in predictions)
    for key, count in sorted(key_counts.items()):
        for _ in range(count - 1):
            diagnostics.append(Diagnostic("duplicate", f"prediction key {'/'.join(key)} appears {count} times"))

    for prediction in predictions:
        if (prediction.dataset_id, prediction.sample_id) not in sample_keys:
            diagnostics.append(
                Diagnostic(
                    "orphan",
                    f"prediction {'/'.join(prediction.key)} refers to unknown sample "
                    f"{prediction.dataset_id}/{prediction.sample_id}",
                )
            )
    return diagnostics
