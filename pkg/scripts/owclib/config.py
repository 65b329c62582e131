import hashlib
import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, Optional

from .conceptsplitter import SplitterMode
from .errors import ConfigError
from .records import EloConfig, ThresholdConfig

ARTIFACT_VERSION = "1.0.0"

ENV_API_KEY = "OWC_API_KEY"
ENV_EMBED_ENDPOINT = "OWC_EMBED_ENDPOINT"
ENV_JUDGE_ENDPOINT = "OWC_JUDGE_ENDPOINT"
ENV_EMBED_MODEL = "OWC_EMBED_MODEL"
ENV_JUDGE_MODEL = "OWC_JUDGE_MODEL"
ENV_LOG_LEVEL = "OWC_LOG_LEVEL"

DEFAULT_MAX_PROMPT_CHARS = 4000


class TiMode(str, Enum):
    Token = "token"
    Char = "char"


class AgreementBase(str, Enum):
    Jaccard = "jaccard"
    Min = "min"
    Max = "max"


class WrongBy(str, Enum):
    LI = "li"
    TI = "ti"


class BackendKind(str, Enum):
    RemoteEmbed = "remote_embed"
    RemoteJudge = "remote_judge"
    MockEmbed = "mock_embed"
    MockJudge = "mock_judge"
    ReplayEmbed = "replay_embed"
    ReplayJudge = "replay_judge"


REMOTE_KINDS = {BackendKind.RemoteEmbed, BackendKind.RemoteJudge}


@dataclass(frozen=True)
class BackendDescriptor:
    kind: BackendKind
    model_name: str
    endpoint: Optional[str] = None
    parallelism: int = 4
    timeout_ms: int = 30000
    seed: int = 0
    batch_size: int = 16
    max_attempts: int = 5

    def __post_init__(self):
        if self.kind in REMOTE_KINDS and not self.endpoint:
            raise ConfigError(f"{self.kind.value} backend requires an endpoint")
        if self.parallelism < 1:
            raise ConfigError(f"parallelism must be at least 1, got {self.parallelism}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be at least 1, got {self.batch_size}")

    def identity(self) -> Dict[str, Any]:
        """Fields that can change backend results. Parallelism, timeouts and batching cannot."""
        identity: Dict[str, Any] = {"kind": self.kind.value, "model_name": self.model_name}
        if self.kind in REMOTE_KINDS:
            identity["endpoint"] = self.endpoint
        else:
            identity["seed"] = self.seed
        return identity

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["kind"] = self.kind.value
        return data


@dataclass(frozen=True)
class RunConfig:
    embed: BackendDescriptor
    judge: BackendDescriptor
    thresholds: ThresholdConfig = field(default_factory=ThresholdConfig)
    elo: EloConfig = field(default_factory=EloConfig)
    ti_mode: TiMode = TiMode.Token
    splitter_mode: SplitterMode = SplitterMode.BuiltinNgram
    max_prompt_chars: int = DEFAULT_MAX_PROMPT_CHARS
    seed: int = 0
    judge_rules_digest: str = ""

    def snapshot(self) -> Dict[str, Any]:
        return {
            "artifact_version": ARTIFACT_VERSION,
            "embed": self.embed.to_dict(),
            "judge": self.judge.to_dict(),
            "thresholds": asdict(self.thresholds),
            "elo": asdict(self.elo),
            "ti_mode": self.ti_mode.value,
            "splitter_mode": self.splitter_mode.value,
            "max_prompt_chars": self.max_prompt_chars,
            "seed": self.seed,
            "judge_rules_digest": self.judge_rules_digest,
        }

    def hashed_subset(self) -> Dict[str, Any]:
        snapshot = self.snapshot()
        snapshot["embed"] = self.embed.identity()
        snapshot["judge"] = self.judge.identity()
        return snapshot

    def config_hash(self) -> str:
        return config_digest(self.hashed_subset())


def config_digest(data: Any) -> str:
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
